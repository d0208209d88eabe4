"""Range cutoffs for the ``1/r**6`` tail of the Rydberg diagonal.

Dropping ``Z_i Z_j`` terms with ``|i - j| > n`` perturbs the diagonal by a
diagonal operator whose norm is exactly the sum of the dropped absolute
coefficients (all pair couplings share a sign, so the all-equal-spins state
attains it). Nothing here builds a matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import zeta as hurwitz_zeta

from .errors import ValidationError
from .pmr import PMRForm
from .spin import DiagonalPolynomial, popcount


@dataclass(frozen=True)
class CutoffPlan:
    n: int
    target_eps: float
    t: float
    Q: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("cutoff n must be >= 1")


def _positive(**kw) -> None:
    for name, v in kw.items():
        if not v > 0:
            raise ValidationError(f"{name} must be positive, got {v}")


def cutoff_d0(t: float, C6prime: float, eps: float) -> CutoffPlan:
    """``n = max(1, ceil((t C6' / (5 eps))**(1/5)))``."""
    _positive(t=t, C6prime=C6prime, eps=eps)
    n = max(1, math.ceil((t * C6prime / (5 * eps)) ** 0.2))
    return CutoffPlan(n, eps, t)


def cutoff_delta_d0(Q: int, t: float, C6prime: float, eps: float) -> CutoffPlan:
    """``n = max(1, ceil((8 Q t C6' / (5 eps))**(1/5)))``."""
    if Q < 1:
        raise ValidationError("Q must be >= 1")
    _positive(t=t, C6prime=C6prime, eps=eps)
    n = max(1, math.ceil((8 * Q * t * C6prime / (5 * eps)) ** 0.2))
    return CutoffPlan(n, eps, t, Q)


def _pair_sites(mask: int) -> tuple[int, int] | None:
    if popcount(mask) != 2:
        return None
    i = (mask & -mask).bit_length() - 1
    j = mask.bit_length() - 1
    return i, j


def truncate_interaction(D0: DiagonalPolynomial, n: int, N: int | None = None) -> DiagonalPolynomial:
    """Drop every two-site term ``Z_i Z_j`` with ``|i - j| > n``; keep everything else."""
    if n < 0:
        raise ValidationError("cutoff must be non-negative")
    if N is not None and N != D0.n:
        raise ValidationError(f"N={N} does not match the operator size {D0.n}")
    kept = []
    for mask, c in D0.terms:
        pair = _pair_sites(mask)
        if pair is None or pair[1] - pair[0] <= n:
            kept.append((mask, c))
    return DiagonalPolynomial(D0.n, D0.constant, tuple(kept))


def dropped_norm(D0: DiagonalPolynomial, n: int) -> float:
    """Sum of absolute coefficients removed by ``truncate_interaction``: an upper bound on ``||D0 - D0~||``."""
    total = 0.0
    for mask, c in D0.terms:
        pair = _pair_sites(mask)
        if pair is not None and pair[1] - pair[0] > n:
            total += abs(c)
    return total


def diagonal_difference_norm(A: DiagonalPolynomial, B: DiagonalPolynomial) -> float:
    """Exact ``max_z |A(z) - B(z)|`` by enumerating the support of the difference."""
    return (A - B).max_abs()


def tail_sum(n: int, N: int | None = None) -> float:
    """``sum_{i=n+1}^{N-1} i**-6``; to infinity (Hurwitz zeta) when ``N`` is None."""
    if N is None:
        return float(hurwitz_zeta(6, n + 1))
    return float(sum(i**-6.0 for i in range(N - 1, n, -1)))


def tail_bound(n: int) -> float:
    """Integral bound ``1 / (5 n**5)`` on ``sum_{i>n} i**-6``."""
    return 1.0 / (5.0 * n**5)


def pair_tail(N: int, n: int, c6p: float) -> float:
    """Exact dropped weight ``(c6p/4) sum_{d>n} (N - d) d**-6`` of the chain (``N - d`` pairs at distance ``d``)."""
    return c6p / 4 * sum((N - d) / d**6 for d in range(n + 1, N))


def cutoff_d0_exact(N: int, t: float, C6prime: float, eps: float) -> CutoffPlan:
    """Smallest ``n`` whose dropped pair weight, counted with multiplicity, is at most ``eps / t``."""
    _positive(t=t, C6prime=C6prime, eps=eps)
    for n in range(1, max(2, N)):
        if pair_tail(N, n, C6prime) <= eps / t:
            return CutoffPlan(n, eps, t)
    return CutoffPlan(max(1, N - 1), eps, t)


def delta_d0_budget(Q: int, t: float, eps: float) -> float:
    """Allowed energy-update error per permutation: ``eps / (2 Q t)``."""
    if Q < 1:
        raise ValidationError("Q must be >= 1")
    _positive(t=t, eps=eps)
    return eps / (2 * Q * t)


def delta_d0_errors(form: PMRForm, n: int) -> list[float]:
    """Per permutation, the exact worst-case change in its energy update when ``D0`` is truncated at ``n``.

    Flipping ``mask`` changes the energy by ``-2 sum_{touched} c Z^m``; the
    truncated diagonal omits the touched far pairs, whose dropped contribution
    is at most ``2 sum |c|`` (and is attained when their signs align).
    """
    out = []
    for touched in form.touched_terms:
        err = DiagonalPolynomial.from_terms(
            form.n,
            0.0,
            (
                (form.D0.terms[k][0], 2 * form.D0.terms[k][1])
                for k in touched
                if (p := _pair_sites(form.D0.terms[k][0])) is not None and p[1] - p[0] > n
            ),
        )
        out.append(err.max_abs())
    return out
