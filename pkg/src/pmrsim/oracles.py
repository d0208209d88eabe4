"""Brute-force references used to validate the rest of the package.

Nothing here imports from the modules it validates: Hamiltonians are rebuilt
from Kronecker products, lattices are re-enumerated, and divided differences
are recomputed in extended precision by the Newton recurrence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import mpmath
import numpy as np
from scipy.integrate import quad_vec

from .errors import ConvergenceError, ValidationError

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class OracleConfig:
    tol: float = 1e-9
    max_refinements: int = 22
    precision_digits: int = 60
    initial_steps: int = 16

    def __post_init__(self):
        if self.tol <= 0:
            raise ValidationError("tol must be positive")


def site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    """``op`` on ``site`` (site 0 = least significant bit), identity elsewhere."""
    out = np.ones((1, 1), dtype=complex)
    for j in reversed(range(n)):
        out = np.kron(out, op if j == site else _I2)
    return out


def _check_hermitian(H: np.ndarray, tol: float = 1e-10) -> None:
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError("expected a square matrix")
    dev = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if dev > tol * max(1.0, np.max(np.abs(H))):
        raise ValidationError(f"matrix is not Hermitian (deviation {dev:.3g})")


def exact_expm(H: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` by Hermitian eigendecomposition."""
    H = np.asarray(H, dtype=complex)
    _check_hermitian(H)
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def spectral_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A, 2))


class TimeOrderedResult(NamedTuple):
    U: np.ndarray
    difference: float
    steps: int


_CHUNK = 8192


def _ordered_product(steps: np.ndarray) -> np.ndarray:
    """``steps[-1] @ ... @ steps[0]`` by pairwise reduction."""
    while steps.shape[0] > 1:
        odd = steps[-1:] if steps.shape[0] % 2 else None
        even = steps[: steps.shape[0] // 2 * 2]
        steps = even[1::2] @ even[0::2]
        if odd is not None:
            steps = np.concatenate([steps, odd])
    return steps[0]


def _midpoint_product(H_of_t, T: float, steps: int) -> np.ndarray:
    h = T / steps
    U = None
    for start in range(0, steps, _CHUNK):
        Hs = np.stack([np.asarray(H_of_t((k + 0.5) * h), dtype=complex) for k in range(start, min(steps, start + _CHUNK))])
        w, V = np.linalg.eigh(Hs)
        step = (V * np.exp(-1j * w * h)[:, None, :]) @ np.conj(np.swapaxes(V, 1, 2))
        block = _ordered_product(step)
        U = block if U is None else block @ U
    return U


def time_ordered_propagator(
    H_of_t: Callable[[float], np.ndarray], T: float, cfg: OracleConfig = OracleConfig()
) -> TimeOrderedResult:
    """``T exp(-i int_0^T H(t) dt)`` by the midpoint rule with step halving.

    Stops once two successive refinements differ by at most ``cfg.tol`` in
    spectral norm and returns the finer product.
    """
    dim = np.asarray(H_of_t(0.0)).shape[0]
    if T == 0:
        return TimeOrderedResult(np.eye(dim, dtype=complex), 0.0, 0)
    steps = cfg.initial_steps
    prev = _midpoint_product(H_of_t, T, steps)
    for _ in range(cfg.max_refinements):
        steps *= 2
        cur = _midpoint_product(H_of_t, T, steps)
        diff = spectral_norm(cur - prev)
        if diff <= cfg.tol:
            return TimeOrderedResult(cur, diff, steps)
        prev = cur
    raise ConvergenceError(f"time-ordered product not converged after {steps} steps (diff {diff:.3g})")


def _newton_dd(xs, s, dps: int):
    with mpmath.workdps(dps):
        s = mpmath.mpc(s)
        xs = [mpmath.mpc(x) for x in xs]
        q = len(xs) - 1
        table = [mpmath.exp(s * x) for x in xs]
        for level in range(1, q + 1):
            row = []
            for i in range(q + 1 - level):
                lo, hi = xs[i], xs[i + level]
                if hi == lo:
                    # sorted, so the whole run is one repeated node
                    row.append(s**level * mpmath.exp(s * lo) / mpmath.factorial(level))
                else:
                    row.append((table[i + 1] - table[i]) / (hi - lo))
            table = row
        return table[0]


def dd_reference(nodes: Sequence[complex], scale: complex = 1.0, cfg: OracleConfig = OracleConfig()) -> complex:
    """Divided difference of ``exp(scale * x)`` in extended precision.

    Newton recurrence on sorted nodes, with the derivative formula for exactly
    repeated nodes. Nearly coincident nodes cancel digits at every level, so
    the working precision is doubled until two evaluations agree to far below
    double precision.
    """
    if len(nodes) > 17:
        raise ValidationError("reference supports at most 17 nodes")
    xs = sorted((complex(x) for x in nodes), key=lambda v: (v.real, v.imag))
    gaps = [abs(a - b) for a, b in itertools.combinations(xs, 2) if a != b]
    # each Newton level can cancel about -log10(gap) digits
    lost = max(0, math.ceil(-math.log10(min(gaps)))) if gaps else 0
    dps = cfg.precision_digits + (len(xs) - 1) * lost
    prev = _newton_dd(xs, complex(scale), dps)
    while dps < 20000:
        dps *= 2
        cur = _newton_dd(xs, complex(scale), dps)
        with mpmath.workdps(dps):
            if abs(cur - prev) <= mpmath.mpf(10) ** -30 * abs(cur) or cur == prev:
                return complex(cur)
        prev = cur
    raise ConvergenceError("divided-difference reference did not stabilise")


def dyson_q1_integral(
    H0: np.ndarray,
    V_of_t: Callable[[float], np.ndarray],
    segment: tuple[float, float],
    *,
    tol: float = 1e-13,
) -> np.ndarray:
    """First-order interaction-picture Dyson term ``-i int_a^b e^{iH0 s} V(s) e^{-iH0 s} ds``."""
    H0 = np.asarray(H0, dtype=complex)
    _check_hermitian(H0)
    w, W = np.linalg.eigh(H0)
    a, b = segment

    def integrand(s):
        R = (W * np.exp(1j * w * s)) @ W.conj().T
        return (R @ V_of_t(s) @ R.conj().T).ravel()

    val, err = quad_vec(integrand, a, b, epsabs=tol, epsrel=tol, limit=2000)
    if not np.isfinite(err) or err > 1e3 * tol * max(1.0, float(np.max(np.abs(val)))):
        raise ConvergenceError(f"quadrature did not converge (error estimate {err:.3g})")
    return -1j * val.reshape(H0.shape)


def riemann_q1_integral(H0: np.ndarray, V_of_t, segment: tuple[float, float], steps: int = 4000) -> np.ndarray:
    """Composite Simpson version of ``dyson_q1_integral`` for self-checks."""
    w, W = np.linalg.eigh(np.asarray(H0, dtype=complex))
    a, b = segment
    if steps % 2:
        steps += 1
    s = np.linspace(a, b, steps + 1)
    acc = np.zeros(H0.shape, dtype=complex)
    for k, sk in enumerate(s):
        wt = 1 if k in (0, steps) else (4 if k % 2 else 2)
        R = (W * np.exp(1j * w * sk)) @ W.conj().T
        acc += wt * (R @ V_of_t(sk) @ R.conj().T)
    return -1j * acc * (b - a) / (3 * steps)


# ---------------------------------------------------------------- dense models


def rydberg_dense(omegas: Sequence[float], delta: float, c6p: float) -> np.ndarray:
    """Rydberg chain with ``n_i = (I + Z_i)/2`` and couplings ``c6p / |i-j|**6``."""
    N = len(omegas)
    dim = 1 << N
    H = np.zeros((dim, dim), dtype=complex)
    num = [0.5 * (np.eye(dim) + site_operator(_Z, i, N)) for i in range(N)]
    for i, w in enumerate(omegas):
        H += 0.5 * (w * site_operator(_X, i, N) - delta * site_operator(_Z, i, N))
    for i, j in itertools.combinations(range(N), 2):
        H += c6p / abs(i - j) ** 6 * num[i] @ num[j]
    return H


def periodic_neighbours(n_per_axis: int, dim: int) -> set[tuple[int, int]]:
    sites = {}
    for idx, coords in enumerate(itertools.product(range(n_per_axis), repeat=dim)):
        sites[coords] = idx
    pairs = set()
    for coords, idx in sites.items():
        for axis in range(dim):
            nb = list(coords)
            nb[axis] = (nb[axis] + 1) % n_per_axis
            j = sites[tuple(nb)]
            if j != idx:
                pairs.add(frozenset((idx, j)))
    return {tuple(sorted(p)) for p in pairs}


def tfim_static_dense(n_per_axis: int, dim: int, J: float) -> np.ndarray:
    N = n_per_axis**dim
    H = np.zeros((1 << N, 1 << N), dtype=complex)
    for i, j in periodic_neighbours(n_per_axis, dim):
        H -= J * site_operator(_Z, i, N) @ site_operator(_Z, j, N)
    return H


def x_field_dense(N: int) -> np.ndarray:
    return sum(site_operator(_X, i, N) for i in range(N))


def tfim_dense_factory(n_per_axis: int, dim: int, J: float, zeta: float, omega: float):
    """Return ``H(t)`` for the Floquet-driven Ising model as a callable."""
    A = tfim_static_dense(n_per_axis, dim, J)
    S = x_field_dense(n_per_axis**dim)
    return lambda t: A - zeta * math.cos(omega * t) * S


def pauli_dense(label: str) -> np.ndarray:
    """Dense matrix of a site-ordered label (site 0 first), e.g. ``'XIZ'``."""
    ops = {"I": _I2, "X": _X, "Y": _Y, "Z": _Z}
    n = len(label)
    out = np.eye(1 << n, dtype=complex)
    for site, ch in enumerate(label):
        if ch != "I":
            out = out @ site_operator(ops[ch], site, n)
    return out
