"""Command-line entry point: ``pmrsim --config run.yaml [--task ...]``.

Exit codes: 0 success, 1 invalid configuration, 2 a numerical check failed,
3 a capacity limit (dense size or path budget) was hit.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np
import yaml

from . import oracles
from .divdiff import NodeSet, dd_exp, simplex_integral_mc, simplex_nodes
from .errors import CapacityError, PMRError, ValidationError
from .models import FloquetTFIMParams, RydbergParams, parse_omegas, rydberg_hamiltonian_terms
from .pmr import PMRForm, pmr_decompose
from .resources import ALGORITHMS, DISCLAIMER, sweep, to_csv, to_json, verify_norm_bounds
from .spin import check_dense, terms_to_dense
from .td_propagator import INTERACTION_SIGN, build_td_form, calibrate_interaction_sign, td_evolve_detailed
from .ti_propagator import evolve_detailed, lcu_weight, truncation_order, LN2
from .truncation import cutoff_d0, dropped_norm, truncate_interaction

TASKS = ("decompose", "evolve-ti", "evolve-td", "estimate", "verify")
FORMATS = ("csv", "json")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_CAPACITY = 0, 1, 2, 3


@dataclass
class RunConfig:
    model: str
    params: dict
    task: str
    eps: float = 1e-6
    t: float = 1.0
    out: str | None = None
    format: str = "json"
    truncate_diagonal: bool = False
    adaptive_segments: bool = False
    seed: int = 0
    grid: dict = field(default_factory=dict)
    algorithms: tuple[str, ...] = ALGORITHMS


def _field(doc: Mapping, key: str, kind: Callable, path: str, default=None, required=False):
    if key not in doc or doc[key] is None:
        if required:
            raise ValidationError(f"{path}{key}: missing required field")
        return default
    try:
        return kind(doc[key])
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}{key}: {exc}") from None


def _positive(value: float, name: str) -> float:
    if not (value > 0 and math.isfinite(value)):
        raise ValidationError(f"{name}: must be a positive finite number, got {value}")
    return value


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    raise ValueError(f"expected true/false, got {v!r}")


def parse_config(doc: Any, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Validate a configuration document; errors name the offending field."""
    if not isinstance(doc, Mapping):
        raise ValidationError("config: top level must be a mapping")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    task = overrides.get("task", doc.get("task"))
    if task not in TASKS:
        raise ValidationError(f"config.task: must be one of {', '.join(TASKS)}, got {task!r}")

    model_doc = doc.get("model") or {}
    if not isinstance(model_doc, Mapping):
        raise ValidationError("config.model: must be a mapping")
    kind = model_doc.get("type", "rydberg" if task != "evolve-td" else "tfim")
    if kind not in ("rydberg", "tfim"):
        raise ValidationError(f"config.model.type: must be rydberg or tfim, got {kind!r}")
    params = {k: v for k, v in model_doc.items() if k != "type"}

    output = doc.get("output") or {}
    flags = doc.get("flags") or {}
    fmt = overrides.get("format", _field(output, "format", str, "config.output.", "csv" if task == "estimate" else "json"))
    if fmt not in FORMATS:
        raise ValidationError(f"config.output.format: must be csv or json, got {fmt!r}")
    cfg = RunConfig(
        model=kind,
        params=params,
        task=task,
        eps=_positive(_field(doc, "eps", float, "config.", 1e-6), "config.eps"),
        t=_field(doc, "t", float, "config.", None) if "t" in doc else _field(doc, "T", float, "config.", 1.0),
        out=overrides.get("out", _field(output, "path", str, "config.output.")),
        format=fmt,
        truncate_diagonal=overrides.get("truncate_diagonal") or _field(flags, "truncate_diagonal", _bool, "config.flags.", False),
        adaptive_segments=overrides.get("adaptive_segments") or _field(flags, "adaptive_segments", _bool, "config.flags.", False),
        seed=int(overrides.get("seed", _field(doc, "seed", int, "config.", 0))),
        grid=dict(doc.get("grid") or {}),
        algorithms=tuple(doc.get("algorithms") or ALGORITHMS),
    )
    if cfg.t is None or cfg.t < 0 or not math.isfinite(cfg.t):
        raise ValidationError("config.t: must be a non-negative finite number")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ValidationError("config.seed: must fit in an unsigned 64-bit integer")
    if task == "evolve-ti" and kind != "rydberg":
        raise ValidationError("config.model.type: evolve-ti needs the rydberg model")
    if task == "evolve-td" and kind != "tfim":
        raise ValidationError("config.model.type: evolve-td needs the tfim model")
    if task == "estimate" and not cfg.grid:
        raise ValidationError("config.grid: estimate needs a parameter grid")
    return cfg


def rydberg_params(params: Mapping) -> RydbergParams:
    p = "config.model."
    N = _field(params, "N", int, p, required=True)
    if N < 1:
        raise ValidationError(f"{p}N: must be >= 1")
    omega = params.get("omega", 1.0)
    try:
        omegas = parse_omegas(N, omega)
    except (TypeError, ValueError):
        raise ValidationError(f"{p}omega: expected a number or a list of numbers") from None
    try:
        return RydbergParams(
            N, omegas, _field(params, "delta", float, p, 0.0), _field(params, "c6p", float, p, 1.0), 1.0
        )
    except ValidationError as exc:
        raise ValidationError(f"{p}{exc}") from None


def tfim_params(params: Mapping) -> FloquetTFIMParams:
    p = "config.model."
    try:
        return FloquetTFIMParams(
            _field(params, "n_per_axis", int, p, required=True),
            _field(params, "d", int, p, 1),
            _field(params, "J", float, p, 1.0),
            _field(params, "zeta", float, p, 1.0),
            _field(params, "w", float, p, 1.0),
        )
    except ValidationError as exc:
        raise ValidationError(f"{p}{exc}") from None


# ---------------------------------------------------------------- tasks


class Outcome:
    def __init__(self, rows: list[dict], ok: bool = True, extra: dict | None = None):
        self.rows, self.ok, self.extra = rows, ok, extra or {}


def _spectral(A) -> float:
    return float(np.linalg.norm(A, 2))


def task_decompose(cfg: RunConfig) -> Outcome:
    if cfg.model == "rydberg":
        p = rydberg_params(cfg.params)
        terms = rydberg_hamiltonian_terms(p)
        form = pmr_decompose(terms)
        rows = [{"label": t.label(), "weight": t.weight} for t in terms]
        extra = {"Gamma": form.Gamma, "M": form.M, "perm_masks": list(form.perm_masks),
                 "gammas": list(form.gammas), "D0_terms": len(form.D0.terms), "D0_constant": form.D0.constant}
    else:
        p = tfim_params(cfg.params)
        form = build_td_form(p)
        rows = [{"label": "".join("Z" if (m >> j) & 1 else "I" for j in range(form.n)), "weight": c}
                for m, c in form.D0.terms]
        rows += [{"label": "".join("X" if j == i else "I" for j in range(form.n)), "weight": -p.zeta}
                 for i in range(form.n)]
        extra = {"M": form.M, "K": form.K, "gamma_bound": form.gamma_bound}
    return Outcome(rows, True, extra)


def task_evolve_ti(cfg: RunConfig) -> Outcome:
    p = rydberg_params(cfg.params)
    check_dense(p.N)
    form = pmr_decompose(rydberg_hamiltonian_terms(p))
    eps_series, extra = cfg.eps, {}
    if cfg.truncate_diagonal:
        eps_series = cfg.eps / 2
        plan = cutoff_d0(max(cfg.t, 1e-300), p.c6p, cfg.eps / 2) if p.c6p > 0 else None
        if plan is not None:
            extra = {"cutoff": plan.n, "dropped_norm": dropped_norm(form.D0, plan.n)}
            D0t = truncate_interaction(form.D0, plan.n, p.N)
            form = PMRForm(form.n, D0t, form.perm_masks, form.diagonals, form.gammas)
    start = time.perf_counter()
    res = evolve_detailed(form, cfg.t, eps_series)
    wall = time.perf_counter() - start
    H = oracles.rydberg_dense(p.omegas, p.delta, p.c6p)
    err = _spectral(res.U - oracles.exact_expm(H, cfg.t))
    row = {"N": p.N, "t": cfg.t, "eps": cfg.eps, "error": err, "r": res.plan.r, "Q": res.order.Q,
           "Gamma": res.Gamma, "passed": err <= cfg.eps, **extra, "wall_time": wall}
    return Outcome([row], err <= cfg.eps)


def task_evolve_td(cfg: RunConfig) -> Outcome:
    p = tfim_params(cfg.params)
    check_dense(p.N)
    form = build_td_form(p)
    start = time.perf_counter()
    res = td_evolve_detailed(form, cfg.t, cfg.eps, adaptive=cfg.adaptive_segments)
    wall = time.perf_counter() - start
    if cfg.t > 0:
        Hf = oracles.tfim_dense_factory(p.n_per_axis, p.dim, p.J, p.zeta, p.omega)
        ref = oracles.time_ordered_propagator(Hf, cfg.t, oracles.OracleConfig(tol=min(1e-9, cfg.eps / 10))).U
    else:
        ref = np.eye(1 << p.N)
    err = _spectral(res.U - ref)
    qs = [o.Q for o in res.orders]
    row = {"N": p.N, "d": p.dim, "T": cfg.t, "eps": cfg.eps, "error": err, "r": res.schedule.r,
           "Q": max(qs) if qs else 0, "gamma_bound": res.gamma_bound, "policy": res.schedule.policy,
           "passed": err <= cfg.eps, "wall_time": wall}
    return Outcome([row], err <= cfg.eps)


def task_estimate(cfg: RunConfig) -> Outcome:
    reports = sweep(cfg.grid, cfg.algorithms)
    return Outcome([], True, {"reports": reports})


def verification_suite(seed: int) -> list[dict]:
    """Seeded oracle cross-checks, one row per invariant."""
    rng = np.random.default_rng(seed)
    rows = []

    def record(name, passed, detail):
        rows.append({"check": name, "passed": bool(passed), "detail": detail})

    worst = 0.0
    for _ in range(200):
        q = int(rng.integers(0, 13))
        x = rng.uniform(-20, 20, q + 1)
        if q and rng.random() < 0.3:
            j = int(rng.integers(0, q))
            x[j + 1] = x[j] + 1e-8
        s = (1.0, -1j)[int(rng.integers(0, 2))]
        v = dd_exp(NodeSet(tuple(x), s)).value
        r = oracles.dd_reference(x, s)
        worst = max(worst, abs(v - r) / abs(r))
    record("divided_difference_vs_reference", worst <= 1e-8, f"max_rel_error={worst:.3e}")

    bad = []
    for q in (1, 2, 3, 4):
        rates = 1j * rng.uniform(-3, 3, q)
        est, se = simplex_integral_mc(rates, 100_000, rng=rng)
        dd = dd_exp(NodeSet(simplex_nodes(rates), 1.0)).value
        if abs(est - dd) > 3 * se:
            bad.append(q)
    record("simplex_integral_identity", not bad, f"failing_q={bad}")

    ok = True
    for side, d in ((2, 1), (3, 1), (2, 2)):
        p = FloquetTFIMParams(side, d, rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.5, 10))
        ok &= verify_norm_bounds(p, rng.uniform(0, 5, 5)).holds
    record("norm_bounds", ok, "lattices=(2,1),(3,1),(2,2)")

    dev = 0.0
    for N in range(1, 7):
        p = RydbergParams(N, tuple(rng.uniform(0, 2, N)), rng.uniform(-1, 1), rng.uniform(0, 2))
        dev = max(dev, float(np.max(np.abs(terms_to_dense(rydberg_hamiltonian_terms(p), N)
                                           - oracles.rydberg_dense(p.omegas, p.delta, p.c6p)))))
    record("rydberg_reconstruction", dev <= 1e-12, f"max_abs_dev={dev:.3e}")

    w = [lcu_weight(LN2, truncation_order(LN2, e).Q) for e in (1e-2, 1e-5, 1e-8)]
    ok = all(2 - 2 * e <= wi <= 2 for wi, e in zip(w, (1e-2, 1e-5, 1e-8)))
    record("lcu_weight_window", ok, "weights=" + ",".join(f"{v:.12f}" for v in w))

    sign = calibrate_interaction_sign()
    record("interaction_sign", sign == INTERACTION_SIGN, f"calibrated={sign}")
    return rows


def task_verify(cfg: RunConfig) -> Outcome:
    rows = verification_suite(cfg.seed)
    return Outcome(rows, all(r["passed"] for r in rows))


HANDLERS = {
    "decompose": task_decompose,
    "evolve-ti": task_evolve_ti,
    "evolve-td": task_evolve_td,
    "estimate": task_estimate,
    "verify": task_verify,
}


# ---------------------------------------------------------------- output


def _scalar(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(format(float(v), ".12g"))
    if isinstance(v, complex):
        return [float(format(v.real, ".12g")), float(format(v.imag, ".12g"))]
    if isinstance(v, (list, tuple)):
        return [_scalar(x) for x in v]
    return v


def emit_report(cfg: RunConfig, outcome: Outcome) -> str:
    """Render the task result in the configured format."""
    if cfg.task == "estimate":
        reports = outcome.extra["reports"]
        return to_csv(reports) if cfg.format == "csv" else to_json(reports)
    rows = [{k: _scalar(v) for k, v in r.items()} for r in outcome.rows]
    if cfg.format == "json":
        doc = {"task": cfg.task, "passed": outcome.ok, "disclaimer": DISCLAIMER, "rows": rows}
        if outcome.extra:
            doc["summary"] = {k: _scalar(v) for k, v in outcome.extra.items()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    fields = list(dict.fromkeys(k for r in rows for k in r))
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (json.dumps(v) if isinstance(v, list) else v) for k, v in r.items()})
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pmrsim", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--task", choices=TASKS)
    ap.add_argument("--out", help="output file (default: stdout)")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--truncate-diagonal", action="store_true", default=None)
    ap.add_argument("--adaptive-segments", action="store_true", default=None)
    return ap


def run(cfg: RunConfig) -> tuple[int, str]:
    """Execute a validated configuration; returns ``(exit_code, rendered_output)``."""
    outcome = HANDLERS[cfg.task](cfg)
    text = emit_report(cfg, outcome)
    return (EXIT_OK if outcome.ok else EXIT_NUMERIC), text


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            doc = yaml.safe_load(fh)
        cfg = parse_config(
            doc,
            {
                "task": args.task,
                "out": args.out,
                "format": args.format,
                "seed": args.seed,
                "truncate_diagonal": args.truncate_diagonal,
                "adaptive_segments": args.adaptive_segments,
            },
        )
        code, text = run(cfg)
    except CapacityError as exc:
        print(f"capacity: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (ValidationError, OSError, yaml.YAMLError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except PMRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        if cfg.out:
            with open(cfg.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if code == EXIT_NUMERIC:
        print("numerical check failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
