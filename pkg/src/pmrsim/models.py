"""Rydberg-chain and Floquet transverse-field Ising Hamiltonians as Pauli sums.

Site ``i`` of a model (0-based) is bit ``i`` of the basis index. The Rydberg
number operator is taken literally as ``n_i = (I + Z_i) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ValidationError
from .spin import PauliTerm, check_dense

ZETA6 = math.pi**6 / 945.0


@dataclass(frozen=True)
class RydbergParams:
    """Equally spaced 1-D chain of ``N`` Rydberg atoms."""

    N: int
    omegas: tuple[float, ...]
    delta: float
    C6: float
    R: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        if self.N < 1:
            raise ValidationError("N must be >= 1")
        if len(self.omegas) != self.N:
            raise ValidationError(f"expected {self.N} Rabi frequencies, got {len(self.omegas)}")
        if any(w < 0 for w in self.omegas):
            raise ValidationError("Rabi frequencies must be non-negative")
        if self.R <= 0:
            raise ValidationError("lattice spacing R must be positive")

    @classmethod
    def uniform(cls, N: int, omega: float, delta: float, c6p: float) -> "RydbergParams":
        """Uniform drive, with ``C6' = C6 / R**6`` given directly (R = 1)."""
        return cls(N, (omega,) * N, delta, c6p, 1.0)

    @property
    def c6p(self) -> float:
        return self.C6 / self.R**6

    @property
    def omega_mean(self) -> float:
        return sum(self.omegas) / self.N

    @property
    def omega_max(self) -> float:
        return max(self.omegas)


class PairConstants(NamedTuple):
    """Interaction sums of the ``n_i n_j`` expansion.

    ``C[i, j] = C6' / |i - j|**6`` for ``i < j``; ``C_prime[i]`` sums row ``i``
    over ``j > i``; ``C_dprime[j]`` sums column ``j`` over ``i < j``;
    ``C_total`` is the sum over all pairs.
    """

    C: np.ndarray
    C_prime: np.ndarray
    C_dprime: np.ndarray
    C_total: float


def rydberg_pair_constants(p: RydbergParams) -> PairConstants:
    N = p.N
    C = np.zeros((N, N))
    for i in range(N):
        for j in range(i + 1, N):
            C[i, j] = p.c6p / (j - i) ** 6
    return PairConstants(C, C.sum(axis=1), C.sum(axis=0), float(C.sum()))


def build_rydberg_terms(p: RydbergParams, *, dense: bool = False) -> tuple[list[PauliTerm], float]:
    """Pauli decomposition of the Rydberg Hamiltonian.

    Returns ``(terms, identity_coefficient)`` with terms ordered as all ``X_i``,
    then all ``Z_i``, then ``Z_i Z_j`` for ``i < j``. Because
    ``n_i n_j = (I + Z_i + Z_j + Z_i Z_j) / 4``, each pair constant enters the
    Pauli weights with a factor 1/4.
    """
    if dense:
        check_dense(p.N)
    N = p.N
    pc = rydberg_pair_constants(p)
    terms = [PauliTerm(N, x_mask=1 << i, weight=w / 2) for i, w in enumerate(p.omegas)]
    for i in range(N):
        w = (pc.C_prime[i] + pc.C_dprime[i]) / 4 - p.delta / 2
        terms.append(PauliTerm(N, z_mask=1 << i, weight=float(w)))
    for i in range(N):
        for j in range(i + 1, N):
            terms.append(PauliTerm(N, z_mask=(1 << i) | (1 << j), weight=float(pc.C[i, j] / 4)))
    return terms, pc.C_total / 4


def rydberg_hamiltonian_terms(p: RydbergParams) -> list[PauliTerm]:
    """Decomposition including the identity term, i.e. the exact Hamiltonian."""
    terms, c = build_rydberg_terms(p)
    return terms + [PauliTerm.identity(p.N, c)]


def rydberg_alpha(p: RydbergParams) -> float:
    """Sum of absolute Pauli weights, identity excluded."""
    terms, _ = build_rydberg_terms(p)
    return float(sum(abs(t.weight) for t in terms))


def rydberg_alpha_bound(p: RydbergParams) -> float:
    return p.N * (p.omega_max / 2 + abs(p.delta) / 2 + 2 * ZETA6 * p.c6p)


@dataclass(frozen=True)
class FloquetTFIMParams:
    """Periodic hypercubic lattice with ``n_per_axis**dim`` spins."""

    n_per_axis: int
    dim: int
    J: float
    zeta: float
    omega: float

    def __post_init__(self):
        if self.n_per_axis < 1:
            raise ValidationError("n_per_axis must be >= 1")
        if self.dim < 1:
            raise ValidationError("dim must be >= 1")

    @property
    def N(self) -> int:
        return self.n_per_axis**self.dim


@dataclass(frozen=True)
class EdgeList:
    """Sorted, duplicate-free list of unordered site pairs ``(i, j)`` with ``i < j``."""

    edges: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def __contains__(self, pair) -> bool:
        i, j = pair
        return (min(i, j), max(i, j)) in self.edges


def lattice_edges(n_per_axis: int, dim: int) -> EdgeList:
    """Nearest-neighbour bonds of the periodic lattice, row-major site order."""
    shape = (n_per_axis,) * dim
    pairs = set()
    for site in range(n_per_axis**dim):
        coords = np.unravel_index(site, shape)
        for axis in range(dim):
            nb = list(coords)
            nb[axis] = (nb[axis] + 1) % n_per_axis
            other = int(np.ravel_multi_index(nb, shape))
            if other != site:
                pairs.add((min(site, other), max(site, other)))
    return EdgeList(tuple(sorted(pairs)))


class TFIMModel(NamedTuple):
    A_terms: list[PauliTerm]
    edges: EdgeList
    drive_sites: int


def build_tfim(p: FloquetTFIMParams) -> TFIMModel:
    """Static part ``A = -J sum_<ij> Z_i Z_j``; drive is ``-zeta cos(omega t) sum_i X_i``."""
    edges = lattice_edges(p.n_per_axis, p.dim)
    N = p.N
    A = [PauliTerm(N, z_mask=(1 << i) | (1 << j), weight=-p.J) for i, j in edges]
    return TFIMModel(A, edges, N)


def tfim_drive_terms(p: FloquetTFIMParams, t: float) -> list[PauliTerm]:
    f = -p.zeta * math.cos(p.omega * t)
    return [PauliTerm(p.N, x_mask=1 << i, weight=f) for i in range(p.N)]


def tfim_hamiltonian_terms(p: FloquetTFIMParams, t: float) -> list[PauliTerm]:
    return build_tfim(p).A_terms + tfim_drive_terms(p, t)


def parse_omegas(N: int, omega: float | Sequence[float]) -> tuple[float, ...]:
    if isinstance(omega, (int, float)):
        return (float(omega),) * N
    return tuple(float(w) for w in omega)
