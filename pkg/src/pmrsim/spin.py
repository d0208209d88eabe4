"""Pauli strings, diagonal Z-polynomials and dense operators on a few spins.

Conventions
-----------
* Bit ``j`` of a mask (and of a basis index ``z``) refers to site ``j``; site 0
  is the least-significant bit. Dense matrices are indexed by ``z`` directly,
  so site 0 is the *last* factor of a Kronecker product.
* ``Z|z> = (-1)^{z_j} |z>`` on site ``j``, i.e. bit value 0 is the +1 eigenstate.
* A Pauli string is stored as ``(x_mask, z_mask)``. A site with both bits set
  carries ``Y``; there is no separate ``Y`` symbol. The operator represented is

      weight * i**phase * prod_j sigma(x_j, z_j),  sigma(1, 1) = Y.

Dense operators are plain ``numpy`` complex arrays of shape ``(2**n, 2**n)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import CapacityError, DimensionError, ValidationError

_dense_limit = 12

_PHASES = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)


def dense_limit() -> int:
    """Largest site count for which dense matrices may be built."""
    return _dense_limit


def set_dense_limit(n: int) -> int:
    """Override the dense-size guard; returns the previous value."""
    global _dense_limit
    if n < 1:
        raise ValueError("dense limit must be positive")
    previous, _dense_limit = _dense_limit, int(n)
    return previous


def check_dense(n: int, max_sites: int | None = None) -> int:
    limit = _dense_limit if max_sites is None else max_sites
    if n > limit:
        raise CapacityError(
            f"dense operator on {n} sites exceeds the limit of {limit} sites",
            requested=n,
            limit=limit,
        )
    return 1 << n


def popcount(x: int) -> int:
    return bin(x).count("1")


def parity_signs(zs: np.ndarray, mask: int) -> np.ndarray:
    """``(-1)**popcount(z & mask)`` for every entry of the integer array ``zs``."""
    bits = np.bitwise_count(np.bitwise_and(zs, mask))
    return 1 - 2 * (bits & 1).astype(np.int64)


def _sites(mask: int) -> list[int]:
    out, j = [], 0
    while mask:
        if mask & 1:
            out.append(j)
        mask >>= 1
        j += 1
    return out


@dataclass(frozen=True)
class BasisState:
    """Computational basis state ``|z>`` of ``n`` spins."""

    index: int
    n: int

    def __post_init__(self):
        if not 0 <= self.index < (1 << self.n):
            raise ValueError(f"basis index {self.index} out of range for n={self.n}")

    def bit(self, site: int) -> int:
        return (self.index >> site) & 1


def _as_index(z: BasisState | int) -> int:
    return z.index if isinstance(z, BasisState) else int(z)


@dataclass(frozen=True)
class PauliTerm:
    """Weighted, phased Pauli string on ``n`` sites."""

    n: int
    x_mask: int = 0
    z_mask: int = 0
    weight: float = 1.0
    phase: int = 0  # power of i

    def __post_init__(self):
        full = (1 << self.n) - 1
        if (self.x_mask | self.z_mask) & ~full:
            raise DimensionError(f"mask bits beyond n={self.n}")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def from_sites(cls, n: int, ops: Mapping[int, str], weight: float = 1.0, phase: int = 0) -> "PauliTerm":
        """Build from a ``{site: 'X'|'Y'|'Z'}`` mapping."""
        x = z = 0
        for site, op in ops.items():
            op = op.upper()
            if op in ("X", "Y"):
                x |= 1 << site
            if op in ("Z", "Y"):
                z |= 1 << site
            if op not in ("X", "Y", "Z", "I"):
                raise ValueError(f"unknown Pauli symbol {op!r}")
        return cls(n, x, z, weight, phase)

    @classmethod
    def identity(cls, n: int, weight: float = 1.0) -> "PauliTerm":
        return cls(n, 0, 0, weight)

    @property
    def coefficient(self) -> complex:
        return self.weight * _PHASES[self.phase]

    @property
    def is_diagonal(self) -> bool:
        return self.x_mask == 0

    @property
    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def label(self) -> str:
        """Site-ordered label, site 0 first, e.g. ``'XIZ'``."""
        chars = []
        for j in range(self.n):
            x, z = (self.x_mask >> j) & 1, (self.z_mask >> j) & 1
            chars.append("IXZY"[x + 2 * z])
        return "".join(chars)

    def __matmul__(self, other: "PauliTerm") -> "PauliTerm":
        return pauli_product(self, other)


def pauli_product(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Operator product ``a @ b`` with exact phase bookkeeping."""
    if a.n != b.n:
        raise DimensionError(f"cannot multiply Pauli terms on {a.n} and {b.n} sites")
    x = a.x_mask ^ b.x_mask
    z = a.z_mask ^ b.z_mask
    # sigma(x, z) = i^{x.z} X^x Z^z; moving Z^{za} past X^{xb} costs (-1)^{|za & xb|}.
    k = (
        a.phase
        + b.phase
        + popcount(a.x_mask & a.z_mask)
        + popcount(b.x_mask & b.z_mask)
        + 2 * popcount(a.z_mask & b.x_mask)
        - popcount(x & z)
    )
    return PauliTerm(a.n, x, z, a.weight * b.weight, k % 4)


def pauli_to_dense(p: PauliTerm, n: int | None = None, *, max_sites: int | None = None) -> np.ndarray:
    n = p.n if n is None else n
    if n != p.n:
        raise DimensionError(f"term lives on {p.n} sites, requested n={n}")
    dim = check_dense(n, max_sites)
    cols = np.arange(dim, dtype=np.int64)
    rows = cols ^ p.x_mask
    vals = parity_signs(cols, p.z_mask) * (p.coefficient * 1j ** popcount(p.x_mask & p.z_mask))
    out = np.zeros((dim, dim), dtype=complex)
    out[rows, cols] = vals
    return out


def terms_to_dense(terms: Iterable[PauliTerm], n: int, *, max_sites: int | None = None) -> np.ndarray:
    dim = check_dense(n, max_sites)
    out = np.zeros((dim, dim), dtype=complex)
    for t in terms:
        out += pauli_to_dense(t, n, max_sites=max_sites)
    return out


def is_power_of_two_dim(a: np.ndarray) -> bool:
    d = a.shape[0]
    return a.ndim == 2 and a.shape[1] == d and d > 0 and d & (d - 1) == 0


@dataclass(frozen=True)
class DiagonalPolynomial:
    """Diagonal operator ``constant + sum_k c_k Z^{m_k}`` on ``n`` sites.

    Coefficients of the off-diagonal factors ``D_i`` of a PMR form may be
    complex; the diagonal part ``D_0`` of a Hermitian operator is always real.
    """

    n: int
    constant: complex = 0.0
    terms: tuple[tuple[int, complex], ...] = field(default_factory=tuple)

    def __post_init__(self):
        for mask, _ in self.terms:
            if mask == 0:
                raise ValidationError("fold the identity into `constant`")
            if mask >> self.n:
                raise DimensionError(f"mask {mask:#x} beyond n={self.n}")

    @classmethod
    def from_terms(cls, n: int, constant: complex, pairs: Iterable[tuple[int, complex]]) -> "DiagonalPolynomial":
        """Merge repeated masks, fold mask 0 into the constant, drop exact zeros."""
        merged: dict[int, complex] = {}
        for mask, c in pairs:
            if mask == 0:
                constant += c
            else:
                merged[mask] = merged.get(mask, 0.0) + c
        kept = tuple((m, _tidy(c)) for m, c in merged.items() if c != 0)
        return cls(n, _tidy(constant), kept)

    @property
    def support(self) -> int:
        s = 0
        for mask, _ in self.terms:
            s |= mask
        return s

    @property
    def is_real(self) -> bool:
        return all(complex(c).imag == 0 for _, c in self.terms) and complex(self.constant).imag == 0

    def evaluate(self, z: BasisState | int):
        """``<z|D|z>`` without building a matrix."""
        zi = _as_index(z)
        val = self.constant
        for mask, c in self.terms:
            val += -c if popcount(mask & zi) & 1 else c
        return val

    def values(self, zs: np.ndarray | None = None) -> np.ndarray:
        """Diagonal entries for every basis index in ``zs`` (default: all 2**n)."""
        if zs is None:
            zs = np.arange(1 << self.n, dtype=np.int64)
        dtype = float if self.is_real else complex
        out = np.full(zs.shape, self.constant, dtype=dtype)
        for mask, c in self.terms:
            out += c * parity_signs(zs, mask)
        return out

    def max_abs(self) -> float:
        """Exact ``max_z |<z|D|z>|`` by enumerating assignments of the support bits."""
        support = _sites(self.support)
        if not support:
            return abs(self.constant)
        if len(support) > 24:
            raise CapacityError("support too large for exact enumeration", len(support), 24)
        local = np.arange(1 << len(support), dtype=np.int64)
        zs = np.zeros_like(local)
        for k, site in enumerate(support):
            zs |= ((local >> k) & 1) << site
        return float(np.max(np.abs(self.values(zs))))

    def to_dense(self, *, max_sites: int | None = None) -> np.ndarray:
        check_dense(self.n, max_sites)
        return np.diag(self.values().astype(complex))

    def scaled(self, factor: complex) -> "DiagonalPolynomial":
        return DiagonalPolynomial.from_terms(
            self.n, self.constant * factor, ((m, c * factor) for m, c in self.terms)
        )

    def __add__(self, other: "DiagonalPolynomial") -> "DiagonalPolynomial":
        if other.n != self.n:
            raise DimensionError("diagonal polynomials on different site counts")
        return DiagonalPolynomial.from_terms(self.n, self.constant + other.constant, self.terms + other.terms)

    def __sub__(self, other: "DiagonalPolynomial") -> "DiagonalPolynomial":
        return self + other.scaled(-1.0)


def _tidy(c: complex):
    c = complex(c)
    return c.real if c.imag == 0 else c


def diag_eval(d: DiagonalPolynomial, z: BasisState | int):
    return d.evaluate(z)
