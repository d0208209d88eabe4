"""Leading-order gate and qubit counts for the compared simulation algorithms.

Every cost is the asymptotic expression evaluated with all constants set to
one. Logarithms of register sizes use ``ceil(log2(.))``; logarithms of
accuracy and time ratios are natural and floored at zero so that a cost never
turns negative. Truncation orders come from the explicit tail rule, so the
numbers are self-consistent with the propagators in this package.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .models import FloquetTFIMParams, RydbergParams, build_rydberg_terms, build_tfim, rydberg_alpha
from .spin import check_dense, terms_to_dense, PauliTerm
from .td_propagator import select_td_Q
from .ti_propagator import LN2, select_Q, select_r
from .truncation import cutoff_d0, cutoff_delta_d0

DISCLAIMER = "leading-order with unit constants"
ALGORITHMS = ("qubitization", "pmr_ti", "pmr_ti_approx", "qhop", "pmr_td")
RYDBERG_ALGORITHMS = ALGORITHMS[:3]
TFIM_ALGORITHMS = ALGORITHMS[3:]
CSV_FIELDS = (
    "algorithm", "N", "d", "t", "eps", "omega", "delta", "c6p", "J", "zeta", "w",
    "gate_cost", "qubit_cost", "branch", "notes",
)


def clog2(x: float) -> int:
    """``ceil(log2(x))`` for ``x >= 1``."""
    if x < 1:
        raise ValidationError(f"log2 count of {x} < 1")
    return math.ceil(math.log2(x) - 1e-12) if x > 1 else 0


def ln0(x: float) -> float:
    """Natural log floored at zero."""
    return max(0.0, math.log(x)) if x > 0 else 0.0


@dataclass(frozen=True)
class CostReport:
    algorithm: str
    gate_cost: float
    qubit_cost: float
    inputs: Mapping[str, Any]
    breakdown: Mapping[str, float]
    branch: int | None = None
    details: Mapping[str, Any] = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.gate_cost < 0 or self.qubit_cost < 0:
            raise ValidationError("costs must be non-negative")


def _check_eps(eps: float) -> None:
    if not 0 < eps:
        raise ValidationError("eps must be positive")


def _rydberg_inputs(p: RydbergParams, t: float, eps: float) -> dict:
    return {"N": p.N, "t": t, "eps": eps, "omega": p.omega_mean, "delta": p.delta, "c6p": p.c6p}


def qubitization_cost(p: RydbergParams, t: float, eps: float) -> CostReport:
    """``(alpha t + ln(1/eps)) M (N + ceil(log2 M))`` with ``ceil(log2 M) + 2`` qubits."""
    _check_eps(eps)
    terms, _ = build_rydberg_terms(p)
    M = len(terms)
    alpha = rydberg_alpha(p)
    per_step = M * (p.N + clog2(M))
    a = alpha * t * per_step
    b = ln0(1 / eps) * per_step
    return CostReport(
        "qubitization", a + b, clog2(M) + 2, _rydberg_inputs(p, t, eps),
        {"alpha_t": a, "log_inv_eps": b},
        details={"alpha": alpha, "M": M},
        notes=f"alpha={alpha:.12g};M={M}",
    )


def _pmr_ti(p: RydbergParams, t: float, eps: float, c_d0, c_dd0, include_q_factor: bool, algorithm: str) -> CostReport:
    _check_eps(eps)
    N = M = p.N
    Gamma = N * p.omega_mean / 2
    plan = select_r(t, Gamma)
    Q = select_Q(plan, Gamma, eps).Q if include_q_factor else 1
    C_D0, C_dD0 = c_d0(Q), c_dd0(Q)
    r = plan.r
    k_od = 1
    parts = {
        "diagonal": r * C_D0,
        "q_squared": r * Q**2,
        "off_diagonal": r * Q * M * (C_dD0 + k_od + clog2(M)),
    }
    qubits = math.ceil(Q * math.log2(M)) if M > 1 else 0
    return CostReport(
        algorithm, sum(parts.values()), qubits, _rydberg_inputs(p, t, eps), parts,
        details={"r": r, "Q": Q, "Gamma": Gamma, "C_D0": C_D0, "C_dD0": C_dD0, "asymptotic_qubits": clog2(N)},
        notes=f"r={r};Q={Q};C_D0={C_D0};C_dD0={C_dD0}",
    )


def pmr_ti_cost(p: RydbergParams, t: float, eps: float, *, include_q_factor: bool = True) -> CostReport:
    """``r (N**2 + Q**2 + Q N (N + 1 + ceil(log2 N)))``, ``r = ceil(t N Omega / (2 ln 2))``."""
    N = p.N
    return _pmr_ti(p, t, eps, lambda Q: N * N, lambda Q: N, include_q_factor, "pmr_ti")


def pmr_ti_approx_cost(p: RydbergParams, t: float, eps: float, *, include_q_factor: bool = True) -> CostReport:
    """As ``pmr_ti_cost`` with ``C_D0 = N n_C`` and ``C_dD0 = n_D`` from the range cutoffs."""
    N = p.N
    return _pmr_ti(
        p, t, eps,
        lambda Q: N * cutoff_d0(t, p.c6p, eps).n,
        lambda Q: cutoff_delta_d0(max(Q, 1), t, p.c6p, eps).n,
        include_q_factor, "pmr_ti_approx",
    )


def _tfim_inputs(p: FloquetTFIMParams, T: float, eps: float) -> dict:
    return {"N": p.N, "d": p.dim, "t": T, "eps": eps, "J": p.J, "zeta": p.zeta, "w": p.omega}


def qhop_cost(p: FloquetTFIMParams, T: float, eps: float) -> CostReport:
    """Smaller of the two query-count branches, times the outer log and the oracle cost ``N (d + N)``."""
    _check_eps(eps)
    N, d = p.N, p.dim
    aB = N * abs(p.zeta)
    bB = N * abs(p.zeta) * abs(p.omega)
    aAB = 4 * abs(p.J) * N * abs(p.zeta) * d
    s = aAB + bB
    b1 = aB**2 * T**2 / eps * ln0(aB * T / eps)
    b2 = aB * T + math.sqrt(aB * s) * T**1.5 / math.sqrt(eps) * ln0(aB * s * T / eps)
    outer = ln0(s * T / eps)
    oracle = N * (d + N)
    branch = 1 if b1 <= b2 else 2
    total1, total2 = b1 * outer * oracle, b2 * outer * oracle
    gate = min(total1, total2)
    M1 = max(1.0, s / aB**2) if aB > 0 else 1.0
    M2 = max(1.0, math.sqrt(2 * s * T / eps))
    q1 = clog2(N) + clog2(M1)
    q2 = clog2(N) + clog2(M2)
    return CostReport(
        "qhop", gate, q1 if branch == 1 else q2, _tfim_inputs(p, T, eps),
        {"branch1": total1, "branch2": total2},
        branch=branch,
        details={"alpha_B": aB, "beta_B": bB, "alpha_AB": aAB, "log_factor": outer, "oracle_cost": oracle,
                 "M1": M1, "M2": M2, "qubits_branch1": q1, "qubits_branch2": q2},
        notes=f"M={M1 if branch == 1 else M2:.12g}",
    )


def pmr_td_cost(p: FloquetTFIMParams, T: float, eps: float, *, include_q_factor: bool = True) -> CostReport:
    """``r (Q**2 + Q N (ceil(log2 N) + 1) + Q N K (C_D + C_dH0 + C_L)) + L d~`` with ``r = ceil(T N zeta / ln 2)``."""
    _check_eps(eps)
    N, d = p.N, p.dim
    G = N * abs(p.zeta)
    r = max(1, math.ceil(T * G / LN2)) if G > 0 else 1
    Q = (select_td_Q(N, p.zeta, T, eps).Q if G > 0 else 0) if include_q_factor else 1
    K, C_D, C_L, C_dH0 = 2, 1, 1, 2 * d
    L, d_tilde, k_od = d * N, 2, 1
    parts = {
        "q_squared": r * Q**2,
        "permutations": r * Q * N * (k_od + clog2(N)),
        "drive": r * Q * N * K * (C_D + C_dH0 + C_L),
        "diagonal": L * d_tilde,
    }
    return CostReport(
        "pmr_td", sum(parts.values()), clog2(N * K), _tfim_inputs(p, T, eps), parts,
        details={"r": r, "Q": Q, "K": K, "asymptotic_qubits": clog2(N)},
        notes=f"r={r};Q={Q}",
    )


# ---------------------------------------------------------------- norm bounds


@dataclass(frozen=True)
class NormBounds:
    alpha_B: float
    beta_B: float
    alpha_AB_bound: float
    exact_B: float
    exact_dB: float
    exact_AB: float
    sum_x_norm: float
    holds: bool
    samples: tuple[float, ...] = ()


def _hermitian_norm(H: np.ndarray) -> float:
    w = np.linalg.eigvalsh(H)
    return float(np.max(np.abs(w))) if w.size else 0.0


def verify_norm_bounds(p: FloquetTFIMParams, samples: Sequence[float], *, rtol: float = 1e-10) -> NormBounds:
    """Exact spectral norms of ``B(t)``, ``B'(t)`` and ``[A, B(t)]`` at the sample times vs their bounds."""
    N = p.N
    check_dense(N)
    model = build_tfim(p)
    A = terms_to_dense(model.A_terms, N)
    S = terms_to_dense([PauliTerm(N, x_mask=1 << i) for i in range(N)], N)
    sx = _hermitian_norm(S)
    # i [A, S] is Hermitian, and [A, B(t)] = -zeta cos(w t) [A, S]
    comm = _hermitian_norm(1j * (A @ S - S @ A))
    ts = tuple(float(t) for t in samples)
    c = np.abs(np.cos(p.omega * np.asarray(ts)))
    s = np.abs(np.sin(p.omega * np.asarray(ts)))
    exact_B = float(np.max(abs(p.zeta) * c * sx, initial=0.0))
    exact_dB = float(np.max(abs(p.zeta * p.omega) * s * sx, initial=0.0))
    exact_AB = float(np.max(abs(p.zeta) * c * comm, initial=0.0))
    aB, bB = N * abs(p.zeta), N * abs(p.zeta * p.omega)
    aAB = 4 * abs(p.J) * N * abs(p.zeta) * p.dim
    slack = lambda b: b * (1 + rtol) + rtol
    holds = (
        exact_B <= slack(aB) and exact_dB <= slack(bB) and exact_AB <= slack(aAB) and abs(sx - N) <= rtol * N
    )
    return NormBounds(aB, bB, aAB, exact_B, exact_dB, exact_AB, sx, holds, ts)


def sampled_norms(p: FloquetTFIMParams, t: float) -> tuple[float, float, float]:
    """Direct dense norms ``(||B(t)||, ||B'(t)||, ||[A, B(t)]||)`` at one time."""
    N = p.N
    check_dense(N)
    A = terms_to_dense(build_tfim(p).A_terms, N)
    S = terms_to_dense([PauliTerm(N, x_mask=1 << i) for i in range(N)], N)
    B = -p.zeta * math.cos(p.omega * t) * S
    dB = p.zeta * p.omega * math.sin(p.omega * t) * S
    return _hermitian_norm(B), _hermitian_norm(dB), _hermitian_norm(1j * (A @ B - B @ A))


# ---------------------------------------------------------------- sweeps

GRID_KEYS = ("N", "d", "t", "eps", "omega", "delta", "c6p", "J", "zeta", "w")
_RELEVANT = {
    "qubitization": ("N", "t", "eps", "omega", "delta", "c6p"),
    "pmr_ti": ("N", "t", "eps", "omega", "delta", "c6p"),
    "pmr_ti_approx": ("N", "t", "eps", "omega", "delta", "c6p"),
    "qhop": ("N", "d", "t", "eps", "J", "zeta", "w"),
    "pmr_td": ("N", "d", "t", "eps", "J", "zeta", "w"),
}
_DEFAULTS = {"d": 1, "delta": 0.0, "c6p": 1.0, "J": 1.0, "zeta": 1.0, "w": 1.0, "omega": 1.0}


def _lattice_side(N: int, d: int) -> int:
    side = round(N ** (1.0 / d))
    for s in (side - 1, side, side + 1):
        if s >= 1 and s**d == N:
            return s
    raise ValidationError(f"N={N} is not a perfect {d}-th power; cannot build a d={d} lattice")


def evaluate(algorithm: str, point: Mapping[str, Any]) -> CostReport:
    """Cost of ``algorithm`` at one grid point."""
    pt = {**_DEFAULTS, **point}
    N, t, eps = int(pt["N"]), float(pt["t"]), float(pt["eps"])
    if N < 1:
        raise ValidationError("N must be >= 1")
    if algorithm in RYDBERG_ALGORITHMS:
        p = RydbergParams.uniform(N, float(pt["omega"]), float(pt["delta"]), float(pt["c6p"]))
        fn = {"qubitization": qubitization_cost, "pmr_ti": pmr_ti_cost, "pmr_ti_approx": pmr_ti_approx_cost}
        return fn[algorithm](p, t, eps)
    if algorithm in TFIM_ALGORITHMS:
        d = int(pt["d"])
        p = FloquetTFIMParams(_lattice_side(N, d), d, float(pt["J"]), float(pt["zeta"]), float(pt["w"]))
        return (qhop_cost if algorithm == "qhop" else pmr_td_cost)(p, t, eps)
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def sweep(grid: Mapping[str, Sequence[Any]], algorithms: Iterable[str] = ALGORITHMS) -> list[CostReport]:
    """Cartesian product of ``grid`` in ``GRID_KEYS`` order, one report per (point, algorithm).

    Points that differ only in parameters an algorithm ignores produce a single
    row for that algorithm.
    """
    if not grid:
        raise ValidationError("grid must not be empty")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValidationError(f"unknown grid keys: {sorted(unknown)}")
    for key in ("N", "t", "eps"):
        if key not in grid:
            raise ValidationError(f"grid needs {key!r}")
    algos = [a for a in ALGORITHMS if a in set(algorithms)]
    bad = set(algorithms) - set(ALGORITHMS)
    if bad:
        raise ValidationError(f"unknown algorithms: {sorted(bad)}")
    keys = [k for k in GRID_KEYS if k in grid]
    values = []
    for k in keys:
        v = list(grid[k]) if isinstance(grid[k], (list, tuple)) else [grid[k]]
        if not v:
            raise ValidationError(f"grid axis {k!r} is empty")
        values.append(v)
    rows, seen = [], set()
    for combo in itertools.product(*values):
        point = dict(zip(keys, combo))
        for a in algos:
            sig = (a,) + tuple(point.get(k) for k in _RELEVANT[a])
            if sig in seen:
                continue
            seen.add(sig)
            rows.append(evaluate(a, point))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        if v.is_integer() and abs(v) < 1e15:
            return str(int(v))
        return format(v, ".12g")
    return str(v)


def report_row(rep: CostReport) -> dict[str, str]:
    inp = rep.inputs
    row = {k: _fmt(inp.get(k)) for k in CSV_FIELDS[1:11]}
    row.update(
        algorithm=rep.algorithm,
        gate_cost=_fmt(float(rep.gate_cost)),
        qubit_cost=_fmt(rep.qubit_cost),
        branch=_fmt(rep.branch),
        notes=rep.notes,
    )
    return row


def to_csv(reports: Sequence[CostReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerow(report_row(rep))
    return buf.getvalue()


def to_json(reports: Sequence[CostReport]) -> str:
    doc = {
        "disclaimer": DISCLAIMER,
        "rows": [
            {**report_row(r), "breakdown": {k: float(v) for k, v in r.breakdown.items()}} for r in reports
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
