"""Interaction-picture series propagator for drives given as exponential sums.

With ``V(t) = sum_{i,k} exp(L_k t) D_i^(k) P_i`` and the global interaction
picture ``V_I(s) = exp(i D0 s) V(s) exp(-i D0 s)``, leg ``j`` of a path
contributes the rate ``mu_j = L_{k_j} + i (E(z_j) - E(z_{j-1}))`` and the
segment ``[a, b]`` term of order ``q`` is

    (-i)**q exp(a x_1) dd(b - a; x_1, ..., x_q, 0) d_path |z_q>,
    x_j = mu_j + ... + mu_q.

The engine evaluates the equivalent prefix form
``i**q exp(b y_q) dd(-(b - a); y_0, ..., y_q)`` with ``y_j = mu_1 + ... + mu_j``,
which only ever appends nodes. The Schrodinger propagator is
``exp(-i D0 T)`` times the time-ordered product of segment operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._series import SeriesSpec, expand
from .divdiff import NodeSet, dd_exp
from .errors import ConvergenceError, ValidationError
from .models import FloquetTFIMParams, build_tfim
from .pmr import TDPMRForm
from .spin import BasisState, DiagonalPolynomial, check_dense
from .ti_propagator import LN2, TruncationOrder, truncation_order

# Sign of the energy difference in the per-leg rate, L + sign * i (E(z_{j-1}) - E(z_j)).
# Fixed by matching the first-order term against direct quadrature
# (see ``calibrate_interaction_sign``).
INTERACTION_SIGN = -1


def build_td_form(p: FloquetTFIMParams) -> TDPMRForm:
    """Floquet Ising model with ``-zeta cos(w t) = sum_k exp((-1)**k i w t) (-zeta/2)``."""
    model = build_tfim(p)
    N = p.N
    D0 = DiagonalPolynomial.from_terms(N, 0.0, ((t.z_mask, t.weight) for t in model.A_terms))
    amp = DiagonalPolynomial(N, -p.zeta / 2)
    rates = (1j * p.omega, -1j * p.omega)
    drives = tuple(tuple((r, amp) for r in rates) for _ in range(N))
    masks = tuple(1 << i for i in range(N))
    return TDPMRForm(N, D0, masks, drives)


@dataclass(frozen=True)
class TDSegmentSchedule:
    boundaries: tuple[float, ...]
    policy: str = "uniform"

    def __post_init__(self):
        b = self.boundaries
        if len(b) < 2 or b[0] != 0 or any(y <= x for x, y in zip(b, b[1:])):
            raise ValidationError("boundaries must increase strictly from 0")
        if self.policy not in ("uniform", "adaptive"):
            raise ValidationError(f"unknown policy {self.policy!r}")

    @property
    def r(self) -> int:
        return len(self.boundaries) - 1

    @property
    def T(self) -> float:
        return self.boundaries[-1]

    def segments(self) -> list[tuple[float, float]]:
        return list(zip(self.boundaries, self.boundaries[1:]))


def uniform_schedule(T: float, gamma_bound: float) -> TDSegmentSchedule:
    """``r = ceil(T Gamma / ln 2)`` equal segments, so each is at most ``ln 2 / Gamma`` long."""
    if T <= 0:
        raise ValidationError("T must be positive")
    r = max(1, math.ceil(T * gamma_bound / LN2)) if gamma_bound > 0 else 1
    return TDSegmentSchedule(tuple(T * w / r for w in range(r)) + (T,), "uniform")


def adaptive_schedule(form: TDPMRForm, T: float, *, max_segments: int = 1_000_000) -> TDSegmentSchedule:
    """Left-endpoint widths ``ln 2 / Gamma(t_w)``, never wider than ``ln 2 / Gamma_bound``."""
    if T <= 0:
        raise ValidationError("T must be positive")
    G = form.gamma_bound
    if G == 0:
        return TDSegmentSchedule((0.0, T), "adaptive")
    cap = LN2 / G
    bounds = [0.0]
    while bounds[-1] < T:
        g = form.gamma_at(bounds[-1])
        width = cap if g <= 0 else min(LN2 / g, cap)
        nxt = bounds[-1] + width
        # absorb a sliver left by rounding
        bounds.append(T if nxt >= T * (1 - 1e-12) else nxt)
        if len(bounds) > max_segments:
            raise ValidationError("adaptive schedule exceeded the segment limit")
    return TDSegmentSchedule(tuple(bounds), "adaptive")


def td_orders(schedule: TDSegmentSchedule, gamma_bound: float, eps: float) -> tuple[TruncationOrder, ...]:
    """Per-segment truncation orders: tail at ``Gamma_bound * width`` within ``eps / (2 r)``."""
    if eps <= 0:
        raise ValidationError("eps must be positive")
    budget = eps / (2 * schedule.r)
    return tuple(truncation_order(gamma_bound * (b - a), budget) for a, b in schedule.segments())


def select_td_Q(N: int, zeta: float, T: float, eps: float) -> TruncationOrder:
    """Truncation order for the Floquet model on uniform segments; depends on ``N zeta`` only."""
    G = N * abs(zeta)
    orders = td_orders(uniform_schedule(T, G), G, eps)
    return max(orders, key=lambda o: o.Q)


@dataclass(frozen=True)
class TDPathWeight:
    q: int
    i_q: tuple[int, ...]
    k_q: tuple[int, ...]
    node_set: NodeSet
    amp: complex
    z_final: int = 0

    def term(self) -> complex:
        """Coefficient of ``|z_q><z|`` contributed by this path."""
        if self.q == 0:
            return self.amp
        return (-1j) ** self.q * dd_exp(self.node_set).value * self.amp


def td_nodes(
    form: TDPMRForm,
    z: BasisState | int,
    i_q: Sequence[int],
    k_q: Sequence[int],
    segment: tuple[float, float],
    *,
    sign: int = INTERACTION_SIGN,
) -> TDPathWeight:
    """Suffix-sum nodes and folded amplitude for one path on ``segment``."""
    i_q, k_q = tuple(int(i) for i in i_q), tuple(int(k) for k in k_q)
    if len(i_q) != len(k_q):
        raise ValidationError("i_q and k_q must have equal length")
    a, b = segment
    zi = z.index if isinstance(z, BasisState) else int(z)
    if not i_q:
        return TDPathWeight(0, (), (), NodeSet((0.0,), b - a), 1.0 + 0j, zi)
    lam = []
    amp = 1.0 + 0j
    state = zi
    E_prev = form.D0.evaluate(state)
    for i, k in zip(i_q, k_q):
        if not (0 <= i < form.M and 0 <= k < form.K):
            raise IndexError(f"leg ({i}, {k}) out of range")
        state ^= form.perm_masks[i]
        E = form.D0.evaluate(state)
        rate, d = form.drives[i][k]
        lam.append(complex(rate) + sign * 1j * (E_prev - E))
        amp *= d.evaluate(state)
        E_prev = E
    suffix = np.cumsum(np.asarray(lam)[::-1])[::-1]
    amp *= np.exp(a * suffix[0])
    nodes = tuple(complex(x) for x in suffix) + (0j,)
    return TDPathWeight(len(i_q), i_q, k_q, NodeSet(nodes, b - a), complex(amp), state)


def _series_spec(form: TDPMRForm, segment: tuple[float, float]) -> SeriesSpec:
    a, b = segment
    legs = form.legs
    return SeriesSpec(
        energies=form.energies,
        masks=np.array([form.perm_masks[i] for i, _, _, _ in legs], dtype=np.int64),
        amps=np.array([v for _, _, _, v in legs]).reshape(len(legs), -1),
        rates=np.array([r for _, _, r, _ in legs], dtype=complex),
        scale=-(b - a),
        energy_coeff=1j,
        step_factor=1j,
        end_weight=b,
    )


def td_segment(form: TDPMRForm, segment: tuple[float, float], Q: int, *, budget: int | None = None) -> np.ndarray:
    """Interaction-picture propagator of one segment, truncated at order ``Q``."""
    dim = check_dense(form.n)
    a, b = segment
    if b <= a:
        raise ValidationError("segment must have positive length")
    if Q == 0 or form.M == 0:
        return np.eye(dim, dtype=complex)
    return expand(_series_spec(form, segment), Q, budget=budget)


@dataclass(frozen=True)
class TDEvolveResult:
    U: np.ndarray
    schedule: TDSegmentSchedule
    orders: tuple[TruncationOrder, ...] = field(default_factory=tuple)
    gamma_bound: float = 0.0


def td_evolve_detailed(
    form: TDPMRForm, T: float, eps: float, *, adaptive: bool = False, budget: int | None = None
) -> TDEvolveResult:
    if eps <= 0:
        raise ValidationError("eps must be positive")
    if form.lam > 0:
        raise ValidationError("growing drive rates (positive real part) are not supported")
    dim = check_dense(form.n)
    if T == 0:
        return TDEvolveResult(np.eye(dim, dtype=complex), TDSegmentSchedule((0.0, 1.0)), (), form.gamma_bound)
    if T < 0:
        raise ValidationError("T must be non-negative")
    G = form.gamma_bound
    schedule = adaptive_schedule(form, T) if adaptive else uniform_schedule(T, G)
    orders = td_orders(schedule, G, eps)
    U_I = np.eye(dim, dtype=complex)
    if G > 0:
        for seg, order in zip(schedule.segments(), orders):
            U_I = td_segment(form, seg, order.Q, budget=budget) @ U_I
    U = np.exp(-1j * T * form.energies)[:, None] * U_I
    return TDEvolveResult(U, schedule, orders, G)


def td_evolve(form: TDPMRForm, T: float, eps: float, *, adaptive: bool = False, budget: int | None = None) -> np.ndarray:
    """Schrodinger-picture ``U(T, 0)`` to spectral-norm accuracy ``eps``."""
    return td_evolve_detailed(form, T, eps, adaptive=adaptive, budget=budget).U


def first_order_term(form: TDPMRForm, segment: tuple[float, float], sign: int) -> np.ndarray:
    """Dense ``q = 1`` contribution on ``segment`` built from ``td_nodes`` with ``sign``."""
    dim = check_dense(form.n)
    out = np.zeros((dim, dim), dtype=complex)
    for z in range(dim):
        for i in range(form.M):
            for k in range(form.K):
                w = td_nodes(form, z, (i,), (k,), segment, sign=sign)
                out[w.z_final, z] += w.term()
    return out


def calibrate_interaction_sign(segment: tuple[float, float] = (0.1, 0.35), tol: float = 1e-10) -> int:
    """Return the energy sign for which the first-order term matches direct quadrature.

    Uses a two-spin Ising instance with a cosine drive; the quadrature comes
    from the independent oracle module.
    """
    from . import oracles

    p = FloquetTFIMParams(2, 1, J=1.0, zeta=0.8, omega=5.0)
    form = build_td_form(p)
    H0 = np.diag(form.energies.astype(complex))
    drive = lambda s: form.to_dense(s) - H0
    ref = oracles.dyson_q1_integral(H0, drive, segment)
    errors = {s: float(np.max(np.abs(first_order_term(form, segment, s) - ref))) for s in (1, -1)}
    good = [s for s, e in errors.items() if e <= tol]
    if len(good) != 1:
        raise ConvergenceError(f"sign calibration inconclusive: {errors}")
    return good[0]
