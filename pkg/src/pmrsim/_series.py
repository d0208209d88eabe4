"""Batched enumeration of off-diagonal series paths shared by both propagators.

Both expansions have the same shape. Starting from ``|z_0>``, a path applies
legs ``l_1, ..., l_q`` (leg ``l`` flips ``masks[l]`` and multiplies by
``amps[l, z_j]``), and accumulates prefix nodes

    y_0 = 0,   y_j = y_{j-1} + rates[l_j] + energy_coeff * (E[z_j] - E[z_{j-1}]).

The path contributes ``step_factor**q * prod(amps) * exp(end_weight * y_q) *
dd(scale; y_0..y_q)`` to ``U[z_q, z_0]``. Because nodes are only ever appended,
paths sharing a prefix share divided-difference work through
``DDAccumulator.branch``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divdiff import DDAccumulator
from .errors import CapacityError

PATH_BUDGET = 50_000_000
BATCH_LIMIT = 4096


@dataclass
class SeriesSpec:
    energies: np.ndarray  # (dim,) real
    masks: np.ndarray  # (L,) int
    amps: np.ndarray  # (L, dim) complex, evaluated at the state *after* the flip
    rates: np.ndarray  # (L,) complex
    scale: complex
    energy_coeff: complex = 1.0
    step_factor: complex = 1.0
    end_weight: complex = 0.0


def path_count(dim: int, legs: int, Q: int) -> int:
    return dim * sum(legs**q for q in range(Q + 1))


def expand(spec: SeriesSpec, Q: int, *, budget: int | None = None, batch_limit: int = BATCH_LIMIT) -> np.ndarray:
    """Dense matrix of the truncated series (orders ``0..Q``)."""
    E = np.asarray(spec.energies, dtype=float)
    dim = E.size
    L = len(spec.masks)
    budget = PATH_BUDGET if budget is None else budget
    count = path_count(dim, L, Q)
    if count > budget:
        raise CapacityError(f"series needs {count} paths, budget is {budget}", requested=count, limit=budget)

    U = np.eye(dim, dtype=complex)
    if Q == 0 or L == 0:
        return U

    masks = np.asarray(spec.masks, dtype=np.int64)
    amps = np.asarray(spec.amps, dtype=complex)
    rates = np.asarray(spec.rates, dtype=complex)
    legs = np.arange(L)[None, :]
    spread = float(E.max() - E.min()) if dim else 0.0
    bound = Q * float(np.max(np.abs(rates), initial=0.0)) + abs(spec.energy_coeff) * spread
    flat = np.zeros(dim * dim, dtype=complex)

    def deposit(vals, zn, z0, an, yn, q):
        coef = spec.step_factor**q * an * vals
        if spec.end_weight != 0:
            coef = coef * np.exp(spec.end_weight * yn)
        idx = (zn * dim + z0[:, None]).ravel()
        coef = coef.ravel()
        flat.real += np.bincount(idx, coef.real, minlength=dim * dim)
        flat.imag += np.bincount(idx, coef.imag, minlength=dim * dim)

    rows_per = max(1, batch_limit // L)

    def descend(acc, zc, z0, y, amp, q):
        zn = zc[:, None] ^ masks[None, :]
        yn = y[:, None] + rates[None, :] + spec.energy_coeff * (E[zn] - E[zc][:, None])
        an = amp[:, None] * amps[legs, zn]
        q1 = q + 1
        if q1 == Q:
            deposit(acc.peek(yn), zn, z0, an, yn, q1)
            return
        B = zc.size
        for lo in range(0, B, rows_per):
            hi = min(B, lo + rows_per)
            sub = acc if (lo == 0 and hi == B) else acc.select(slice(lo, hi))
            child = sub.branch(yn[lo:hi])
            deposit(child.value.reshape(hi - lo, L), zn[lo:hi], z0[lo:hi], an[lo:hi], yn[lo:hi], q1)
            descend(
                child,
                zn[lo:hi].ravel(),
                np.repeat(z0[lo:hi], L),
                yn[lo:hi].ravel(),
                an[lo:hi].ravel(),
                q1,
            )

    for lo in range(0, dim, rows_per):
        hi = min(dim, lo + rows_per)
        z0 = np.arange(lo, hi, dtype=np.int64)
        acc = DDAccumulator(spec.scale, batch=z0.size, bound=bound, capacity=Q + 1)
        acc.append(0.0)
        descend(acc, z0, z0, np.zeros(z0.size, dtype=complex), np.ones(z0.size, dtype=complex), 0)

    # identity part already holds the q = 0 term
    return U + flat.reshape(dim, dim)
