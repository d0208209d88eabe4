"""Truncated off-diagonal series propagator for time-independent Hamiltonians.

One segment of length ``dt`` is ``U_od @ exp(-i dt D0)``, where column ``z`` of
``U_od`` is

    sum_{q <= Q} sum_{i_1..i_q} dd(-i dt; 0, dE_1, ..., dE_q) d_{i_q}...d_{i_1} |z_q>

with ``dE_j = E(z_j) - E(z)``. The full evolution is the ``r``-th power of
the segment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._series import SeriesSpec, expand
from .divdiff import NodeSet, dd_exp
from .errors import ValidationError
from .pmr import PMRForm, delta_energy
from .spin import BasisState, check_dense

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SegmentPlan:
    r: int
    dt: float
    t: float

    def __post_init__(self):
        if self.r < 1:
            raise ValidationError("r must be >= 1")


@dataclass(frozen=True)
class TruncationOrder:
    Q: int
    eps_segment: float
    tail: float = 0.0


@dataclass(frozen=True)
class BetaCoefficient:
    value: complex
    path: tuple[int, ...]
    z: BasisState
    chi: float
    phi: float


def select_r(t: float, Gamma: float) -> SegmentPlan:
    """``r = ceil(t Gamma / ln 2)`` equal segments (``r = 1`` when ``Gamma = 0``)."""
    if t < 0:
        raise ValidationError("t must be non-negative")
    if Gamma < 0:
        raise ValidationError("Gamma must be non-negative")
    r = max(1, math.ceil(t * Gamma / LN2)) if Gamma > 0 else 1
    return SegmentPlan(r, t / r, t)


def series_tail(x: float, Q: int) -> float:
    """``sum_{q > Q} x**q / q!`` for ``x >= 0``, summed until terms vanish."""
    if x == 0:
        return 0.0
    term = 1.0
    for q in range(1, Q + 1):
        term *= x / q
    total = 0.0
    q = Q + 1
    term *= x / q
    while True:
        total += term
        q += 1
        term *= x / q
        if term <= 1e-17 * total:
            return total + term


def tail_bound(x: float, Q: int) -> float:
    """First omitted term times the geometric factor ``1 / (1 - x / (Q + 2))``."""
    if x == 0:
        return 0.0
    ratio = x / (Q + 2)
    if ratio >= 1:
        return math.inf
    first = math.exp((Q + 1) * math.log(x) - math.lgamma(Q + 2))
    return first / (1 - ratio)


def truncation_order(x: float, eps_segment: float, *, q_max: int = 170) -> TruncationOrder:
    """Smallest ``Q`` whose series tail at ``x`` is at most ``eps_segment``."""
    if eps_segment <= 0:
        raise ValidationError("eps must be positive")
    if x < 0:
        raise ValidationError("x must be non-negative")
    for Q in range(q_max + 1):
        tail = series_tail(x, Q)
        if tail <= eps_segment:
            return TruncationOrder(Q, eps_segment, tail)
    raise ValidationError(f"no truncation order up to {q_max} meets eps={eps_segment:g}")


def select_Q(plan: SegmentPlan, Gamma: float, eps_total: float) -> TruncationOrder:
    """Per-segment budget ``eps_total / (2 r)`` applied to the tail at ``Gamma * dt``."""
    return truncation_order(Gamma * plan.dt, eps_total / (2 * plan.r))


def lcu_weight(x: float, Q: int) -> float:
    """``sum_{q <= Q} x**q / q!``: total weight of the truncated combination."""
    term, total = 1.0, 1.0
    for q in range(1, Q + 1):
        term *= x / q
        total += term
    return total


def beta(form: PMRForm, z: BasisState | int, path: Sequence[int], dt: float) -> BetaCoefficient:
    """Normalised path coefficient ``q! / (Gamma_path dt**q) * dd * d_path``."""
    path = tuple(int(i) for i in path)
    zi = z.index if isinstance(z, BasisState) else int(z)
    zb = z if isinstance(z, BasisState) else BasisState(zi, form.n)
    if not path:
        return BetaCoefficient(1.0 + 0j, path, zb, 0.0, 0.0)
    dE = delta_energy(form, zi, path)
    dd = dd_exp(NodeSet((0.0, *dE), -1j * dt)).value
    d_path = 1.0 + 0j
    g_path = 1.0
    state = zi
    for i in path:
        state ^= form.perm_masks[i]
        d_path *= form.diagonals[i].evaluate(state)
        g_path *= form.gammas[i]
    q = len(path)
    if g_path == 0:
        value = 0j
    else:
        value = math.factorial(q) / (g_path * dt**q) * dd * d_path
    mag = min(abs(value), 1.0)
    return BetaCoefficient(complex(value), path, zb, float(np.angle(value)), math.acos(mag))


def diagonal_phases(form: PMRForm, dt: float) -> np.ndarray:
    return np.exp(-1j * dt * form.energies)


def _series_spec(form: PMRForm, dt: float) -> SeriesSpec:
    masks = np.asarray(form.perm_masks, dtype=np.int64)
    return SeriesSpec(
        energies=form.energies,
        masks=masks,
        amps=form.diagonal_values,
        rates=np.zeros(len(masks), dtype=complex),
        scale=-1j * dt,
    )


def assemble_segment(form: PMRForm, plan: SegmentPlan, Qorder: TruncationOrder | int, *, budget: int | None = None) -> np.ndarray:
    """Dense truncated segment ``U_od @ exp(-i dt D0)``."""
    check_dense(form.n)
    Q = Qorder.Q if isinstance(Qorder, TruncationOrder) else int(Qorder)
    phases = diagonal_phases(form, plan.dt)
    if form.M == 0 or Q == 0:
        return np.diag(phases)
    U_od = expand(_series_spec(form, plan.dt), Q, budget=budget)
    return U_od * phases[None, :]


@dataclass(frozen=True)
class EvolveResult:
    U: np.ndarray
    plan: SegmentPlan
    order: TruncationOrder
    Gamma: float


def evolve_detailed(form: PMRForm, t: float, eps: float, *, budget: int | None = None) -> EvolveResult:
    if eps <= 0:
        raise ValidationError("eps must be positive")
    Gamma = form.Gamma
    dim = check_dense(form.n)
    if t == 0:
        return EvolveResult(np.eye(dim, dtype=complex), SegmentPlan(1, 0.0, 0.0), TruncationOrder(0, eps), Gamma)
    plan = select_r(t, Gamma)
    if Gamma == 0:
        order = TruncationOrder(0, eps / 2)
        return EvolveResult(np.diag(diagonal_phases(form, t)), plan, order, Gamma)
    order = select_Q(plan, Gamma, eps)
    seg = assemble_segment(form, plan, order, budget=budget)
    # every segment is the same matrix, so time ordering is trivial
    U = np.linalg.matrix_power(seg, plan.r)
    return EvolveResult(U, plan, order, Gamma)


def evolve(form: PMRForm, t: float, eps: float, *, budget: int | None = None) -> np.ndarray:
    """Approximate ``exp(-i H t)`` to spectral-norm accuracy ``eps``."""
    return evolve_detailed(form, t, eps, budget=budget).U
