"""Permutation-matrix-representation form ``H = D0 + sum_i D_i P_i``.

Every ``P_i`` is an X-type permutation ``z -> z ^ perm_mask``; the diagonal
factor ``D_i`` acts *after* the permutation, so the matrix element
``<z ^ m_i| D_i P_i |z>`` equals ``d_i(z ^ m_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .spin import BasisState, DiagonalPolynomial, PauliTerm, check_dense, popcount

HERMITIAN_TOL = 1e-12


def _flip_sign(mask: int, x: int) -> int:
    return -1 if popcount(mask & x) & 1 else 1


@dataclass(frozen=True)
class PMRForm:
    n: int
    D0: DiagonalPolynomial
    perm_masks: tuple[int, ...]
    diagonals: tuple[DiagonalPolynomial, ...]
    gammas: tuple[float, ...]

    @property
    def M(self) -> int:
        return len(self.perm_masks)

    @property
    def Gamma(self) -> float:
        return float(sum(self.gammas))

    @cached_property
    def touched_terms(self) -> tuple[tuple[int, ...], ...]:
        """Per permutation, indices of the ``D0`` terms whose sign it flips."""
        return tuple(
            tuple(k for k, (zm, _) in enumerate(self.D0.terms) if popcount(zm & m) & 1)
            for m in self.perm_masks
        )

    @property
    def delta_d0_costs(self) -> tuple[int, ...]:
        """Empirical cost of one energy update per permutation (terms touched)."""
        return tuple(len(t) for t in self.touched_terms)

    @property
    def d0_cost(self) -> int:
        """Empirical cost of one diagonal energy: number of ``D0`` terms."""
        return len(self.D0.terms)

    @cached_property
    def energies(self) -> np.ndarray:
        check_dense(self.n)
        return np.asarray(self.D0.values(), dtype=float)

    @cached_property
    def diagonal_values(self) -> np.ndarray:
        """``(M, 2**n)`` array of ``d_i(z)``."""
        check_dense(self.n)
        if not self.diagonals:
            return np.zeros((0, 1 << self.n), dtype=complex)
        return np.stack([d.values().astype(complex) for d in self.diagonals])

    def to_dense(self) -> np.ndarray:
        dim = check_dense(self.n)
        out = np.diag(self.energies.astype(complex))
        cols = np.arange(dim)
        for m, dv in zip(self.perm_masks, self.diagonal_values):
            rows = cols ^ m
            out[rows, cols] += dv[rows]
        return out


def pmr_decompose(terms: Iterable[PauliTerm], n: int | None = None, *, tol: float = HERMITIAN_TOL) -> PMRForm:
    """Group a Hermitian Pauli sum by X-mask into PMR form.

    Raises ``ValidationError`` if the summed coefficients are not real, i.e.
    the operator is not Hermitian.
    """
    terms = list(terms)
    if n is None:
        if not terms:
            raise ValidationError("cannot infer n from an empty term list")
        n = terms[0].n
    merged: dict[tuple[int, int], complex] = {}
    scale = 0.0
    for t in terms:
        if t.n != n:
            raise ValidationError(f"term on {t.n} sites in an {n}-site Hamiltonian")
        key = (t.x_mask, t.z_mask)
        merged[key] = merged.get(key, 0.0) + t.coefficient
        scale = max(scale, abs(t.weight))
    for (x, z), c in merged.items():
        if abs(c.imag) > tol * max(1.0, scale):
            raise ValidationError(
                f"non-Hermitian input: Pauli string x={x:#x}, z={z:#x} has coefficient {c}"
            )

    diag_pairs: list[tuple[int, complex]] = []
    groups: dict[int, list[tuple[int, complex]]] = {}
    for (x, z), c in merged.items():
        c = c.real
        if x == 0:
            diag_pairs.append((z, c))
            continue
        # <z1| i^{|x&z|} X^x Z^z |z1 ^ x> = i^{|x&z|} (-1)^{|z&x|} (-1)^{|z&z1|}
        factor = c * 1j ** popcount(x & z) * _flip_sign(z, x)
        groups.setdefault(x, []).append((z, factor))

    D0 = DiagonalPolynomial.from_terms(n, 0.0, diag_pairs)
    masks, diagonals, gammas = [], [], []
    for x, pairs in groups.items():
        d = DiagonalPolynomial.from_terms(n, 0.0, pairs)
        if not d.terms and d.constant == 0:
            continue
        masks.append(x)
        diagonals.append(d)
        gammas.append(d.max_abs())
    return PMRForm(n, D0, tuple(masks), tuple(diagonals), tuple(gammas))


def apply_perm(z: BasisState | int, perm_mask: int):
    if isinstance(z, BasisState):
        return BasisState(z.index ^ perm_mask, z.n)
    return z ^ perm_mask


def delta_energy(form: PMRForm, z: BasisState | int, path: Sequence[int]) -> list[float]:
    """``[E(z_1) - E(z), ..., E(z_q) - E(z)]`` along the walk given by ``path``.

    Each step only revisits the ``D0`` terms whose sign the permutation flips.
    """
    zi = z.index if isinstance(z, BasisState) else int(z)
    terms = form.D0.terms
    out = []
    acc = 0.0
    for i in path:
        if not 0 <= i < form.M:
            raise IndexError(f"permutation index {i} out of range (M={form.M})")
        for k in form.touched_terms[i]:
            zm, c = terms[k]
            # sign flips from s to -s: change is -2 c s
            acc -= 2 * c * _flip_sign(zm, zi)
        zi ^= form.perm_masks[i]
        out.append(acc)
    return out


@dataclass(frozen=True)
class TDPMRForm:
    """Time-dependent PMR form with exponential-sum off-diagonal factors.

    ``H(t) = D0 + sum_i (sum_k exp(rate_ik t) amp_ik) P_i`` with scalar rates.
    """

    n: int
    D0: DiagonalPolynomial
    perm_masks: tuple[int, ...]
    drives: tuple[tuple[tuple[complex, DiagonalPolynomial], ...], ...]

    def __post_init__(self):
        if len(self.drives) != len(self.perm_masks):
            raise ValidationError("one drive list per permutation is required")
        ks = {len(d) for d in self.drives}
        if len(ks) > 1:
            raise ValidationError("pad drive lists with zero amplitudes to a common K")

    @property
    def M(self) -> int:
        return len(self.perm_masks)

    @property
    def K(self) -> int:
        return len(self.drives[0]) if self.drives else 0

    @property
    def lam(self) -> float:
        """Largest real part over all rates."""
        rates = [complex(r).real for d in self.drives for r, _ in d]
        return max(rates) if rates else 0.0

    @property
    def gamma_bound(self) -> float:
        """``sum_{i,k} max_z |d_i^(k)(z)|``: bounds the off-diagonal norm when ``lam <= 0``."""
        return float(sum(a.max_abs() for d in self.drives for _, a in d))

    def gamma_at(self, t: float) -> float:
        """Instantaneous off-diagonal norm ``Gamma(t) = sum_i max_z |d_i(z, t)|``."""
        total = 0.0
        for d in self.drives:
            acc = DiagonalPolynomial(self.n)
            for rate, amp in d:
                acc = acc + amp.scaled(np.exp(rate * t))
            total += acc.max_abs()
        return total

    @cached_property
    def energies(self) -> np.ndarray:
        check_dense(self.n)
        return np.asarray(self.D0.values(), dtype=float)

    @cached_property
    def legs(self) -> tuple[tuple[int, int, complex, np.ndarray], ...]:
        """Flattened ``(i, k, rate, amp_values)`` for every (term, exponential) pair."""
        check_dense(self.n)
        out = []
        for i, d in enumerate(self.drives):
            for k, (rate, amp) in enumerate(d):
                out.append((i, k, complex(rate), amp.values().astype(complex)))
        return tuple(out)

    def to_dense(self, t: float) -> np.ndarray:
        dim = check_dense(self.n)
        out = np.diag(self.energies.astype(complex))
        cols = np.arange(dim)
        for i, k, rate, vals in self.legs:
            rows = cols ^ self.perm_masks[i]
            out[rows, cols] += np.exp(rate * t) * vals[rows]
        return out
