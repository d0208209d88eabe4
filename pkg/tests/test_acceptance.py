"""Headline acceptance criteria, one test each.

Each test carries ``@pytest.mark.criterion(number, title)``; the conftest hook
prints a ``CRITERION n PASS|FAIL`` line per criterion at the end of the run.
Reference values come from the dense oracles or from formulas re-derived in
this file with mpmath, never from the code under test.
"""

import csv
import io
import itertools
import math
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest
import yaml

from pmrsim import cli, oracles
from pmrsim.divdiff import NodeSet, dd_exp, dd_perturbation_check, simplex_integral_mc, simplex_nodes
from pmrsim.models import FloquetTFIMParams, RydbergParams, rydberg_alpha, rydberg_hamiltonian_terms
from pmrsim.pmr import pmr_decompose
from pmrsim.resources import pmr_td_cost, pmr_ti_cost, sweep, to_csv, verify_norm_bounds
from pmrsim.spin import terms_to_dense
from pmrsim.td_propagator import build_td_form, select_td_Q, td_evolve, td_orders, uniform_schedule
from pmrsim.ti_propagator import LN2, beta, evolve, lcu_weight, select_r, truncation_order
from pmrsim.truncation import cutoff_d0, truncate_interaction

GOLDEN = Path(__file__).parent / "golden"
X = np.array([[0, 1], [1, 0]], dtype=complex)


def seeded(k):
    return np.random.default_rng(1000 + k)


@pytest.mark.criterion(1, "time-independent propagator, Rydberg N=4")
def test_criterion_1_ti_propagator(record_property):
    p = RydbergParams.uniform(4, 1.0, 0.5, 0.3)
    start = time.perf_counter()
    form = pmr_decompose(rydberg_hamiltonian_terms(p))
    U = evolve(form, 1.0, 1e-6)
    wall = time.perf_counter() - start
    err = oracles.spectral_norm(U - oracles.exact_expm(oracles.rydberg_dense(p.omegas, p.delta, p.c6p), 1.0))
    record_property("detail", f"error={err:.2e}, runtime={wall:.1f}s")
    assert err <= 1e-6
    assert wall <= 60


@pytest.mark.criterion(2, "time-dependent propagator, Floquet TFIM N=3")
def test_criterion_2_td_propagator(record_property):
    p = FloquetTFIMParams(3, 1, 1.0, 0.8, 5.0)
    U = td_evolve(build_td_form(p), 0.5, 1e-5)
    Hf = oracles.tfim_dense_factory(3, 1, p.J, p.zeta, p.omega)
    ref = oracles.time_ordered_propagator(Hf, 0.5, oracles.OracleConfig(tol=1e-9)).U
    err = oracles.spectral_norm(U - ref)

    # J = 0, one spin: U(T) = exp(i (zeta / omega) sin(omega T) X)
    zeta, omega, T = 0.8, 5.0, 0.5
    U1 = td_evolve(build_td_form(FloquetTFIMParams(1, 1, 0.0, zeta, omega)), T, 1e-9)
    phi = zeta / omega * math.sin(omega * T)
    closed = math.cos(phi) * np.eye(2) + 1j * math.sin(phi) * X
    err1 = oracles.spectral_norm(U1 - closed)
    record_property("detail", f"error={err:.2e}, closed-form error={err1:.2e}")
    assert err <= 1e-5
    assert err1 <= 1e-8


@pytest.mark.criterion(3, "cost invariance in omega (pmr_td) and in delta, C6' (pmr_ti)")
def test_criterion_3_invariance(record_property):
    def fingerprint(rep):
        return (rep.gate_cost, rep.qubit_cost, tuple(rep.breakdown.items()), rep.notes)

    td, orders, qs = set(), set(), set()
    for omega in (1.0, 10.0, 100.0):
        p = FloquetTFIMParams(3, 1, 1.0, 0.8, omega)
        td.add(fingerprint(pmr_td_cost(p, 0.5, 1e-5)))
        form = build_td_form(p)
        orders.add(td_orders(uniform_schedule(0.5, form.gamma_bound), form.gamma_bound, 1e-5))
        qs.add(select_td_Q(p.N, p.zeta, 0.5, 1e-5))
    ti = {
        fingerprint(pmr_ti_cost(RydbergParams.uniform(4, 1.0, delta, c6p), 1.0, 1e-3))
        for delta in (0.0, 10.0, 100.0)
        for c6p in (0.1, 1.0, 100.0)
    }
    record_property("detail", f"distinct outputs td={len(td)}, orders={len(orders)}, Q={len(qs)}, ti={len(ti)}")
    assert len(td) == len(orders) == len(qs) == len(ti) == 1


@pytest.mark.criterion(4, "divided differences vs extended precision, 10^4 node sets")
def test_criterion_4_divided_differences(record_property):
    rng = seeded(4)
    worst = drift = 0.0
    clustered = 0
    for k in range(10_000):
        q = int(rng.integers(0, 13))
        x = rng.uniform(-20, 20, q + 1)
        if q and rng.random() < 0.3:
            j = int(rng.integers(0, q))
            x[j + 1] = x[j] + 1e-8
            clustered += 1
        s = (1.0, -1j)[k % 2]
        v = dd_exp(NodeSet(tuple(x), s)).value
        ref = oracles.dd_reference(x, s)
        worst = max(worst, abs(v - ref) / abs(ref))
        perm = dd_exp(NodeSet(tuple(rng.permutation(x)), s)).value
        drift = max(drift, abs(perm - v) / abs(v))
    record_property("detail", f"max rel error={worst:.1e}, permutation drift={drift:.1e}, clustered sets={clustered}")
    assert worst <= 1e-8
    assert drift <= 1e-12


@pytest.mark.criterion(5, "simplex integral identity, 10^6 Monte Carlo samples")
def test_criterion_5_simplex_identity(record_property):
    rng = seeded(5)
    zs = []
    for q in (1, 2, 3, 4):
        rates = 1j * rng.uniform(-3, 3, q)
        est, se = simplex_integral_mc(rates, 1_000_000, rng=rng)
        dd = dd_exp(NodeSet(simplex_nodes(rates), 1.0)).value
        zs.append(abs(est - dd) / se)
    record_property("detail", "deviation/SE=" + ",".join(f"{z:.2f}" for z in zs))
    assert max(zs) <= 3


@pytest.mark.criterion(6, "norm bounds for the driven Ising lattice")
def test_criterion_6_norm_bounds(record_property):
    rng = seeded(6)
    worst_eq, ratios = 0.0, [0.0, 0.0]
    for side, d in [(2, 1), (3, 1), (4, 1), (2, 2), (3, 2)]:
        N = side**d
        S = oracles.x_field_dense(N)
        for _ in range(20):
            J, zeta, omega = rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 20)
            t = rng.uniform(0, 10)
            A = oracles.tfim_static_dense(side, d, J)
            B = -zeta * math.cos(omega * t) * S
            dB = zeta * omega * math.sin(omega * t) * S
            nB = oracles.spectral_norm(B)
            nAB = oracles.spectral_norm(A @ B - B @ A)
            worst_eq = max(worst_eq, abs(nB - N * zeta * abs(math.cos(omega * t))))
            ratios[0] = max(ratios[0], oracles.spectral_norm(dB) / (N * zeta * omega))
            ratios[1] = max(ratios[1], nAB / (4 * J * N * zeta * d))
            rep = verify_norm_bounds(FloquetTFIMParams(side, d, J, zeta, omega), [t])
            assert rep.holds
            assert rep.exact_AB == pytest.approx(nAB, rel=1e-9, abs=1e-12)
    record_property(
        "detail", f"|B| equality dev={worst_eq:.1e}, max |B'|/bound={ratios[0]:.3f}, max |[A,B]|/bound={ratios[1]:.3f}"
    )
    assert worst_eq <= 1e-10
    assert ratios[0] <= 1 + 1e-12 and ratios[1] <= 1 + 1e-12


@pytest.mark.criterion(7, "Pauli reconstruction of the Rydberg Hamiltonian")
def test_criterion_7_reconstruction(record_property):
    rng = seeded(7)
    zeta6 = math.pi**6 / 945
    dev, slack = 0.0, math.inf
    for N in range(1, 7):
        for _ in range(5):
            p = RydbergParams(N, tuple(rng.uniform(0, 3, N)), rng.uniform(-2, 2), rng.uniform(0, 3))
            H = terms_to_dense(rydberg_hamiltonian_terms(p), N)
            dev = max(dev, float(np.max(np.abs(H - oracles.rydberg_dense(p.omegas, p.delta, p.c6p)))))
            bound = N * (max(p.omegas) / 2 + abs(p.delta) / 2 + 2 * zeta6 * p.c6p)
            slack = min(slack, bound - rydberg_alpha(p))
    record_property("detail", f"max entry dev={dev:.1e}, min alpha slack={slack:.3f}")
    assert dev <= 1e-12
    assert slack >= 0


def rydberg_diagonal(N, delta, c6p):
    # energies of every basis state straight from the occupation numbers, n = (1 + Z) / 2
    z = 1 - 2 * ((np.arange(1 << N)[:, None] >> np.arange(N)) & 1)
    n = (1 + z) / 2
    E = -delta / 2 * z.sum(axis=1).astype(float)
    for i, j in itertools.combinations(range(N), 2):
        E += c6p / (j - i) ** 6 * n[:, i] * n[:, j]
    return E


@pytest.mark.criterion(8, "interaction cutoff chain (measured on chains up to N=12)")
def test_criterion_8_cutoff_chain(record_property):
    # Measured on the full diagonal of every chain within the dense limit. The
    # printed cutoff is not a guarantee for longer chains; see test_truncation.
    assert np.allclose(rydberg_diagonal(4, 0.3, 1.2), np.diag(oracles.rydberg_dense([0.0] * 4, 0.3, 1.2)).real)
    worst = 0.0
    for N in range(2, 13):
        for t, c6p, eps in itertools.product((0.5, 1.0, 10.0), (0.5, 1.0, 5.0), (1e-2, 1e-3, 1e-4, 1e-6)):
            p = RydbergParams.uniform(N, 0.0, 0.3, c6p)
            diag = rydberg_diagonal(N, p.delta, c6p)
            D0 = pmr_decompose(rydberg_hamiltonian_terms(p)).D0
            assert np.max(np.abs(D0.values() - diag)) <= 1e-12 * max(1.0, np.max(np.abs(diag)))
            n = cutoff_d0(t, c6p, eps).n
            measured = np.max(np.abs(diag - truncate_interaction(D0, n, N).values()))
            worst = max(worst, measured / (eps / t))

    tail_ok = all(mpmath.zeta(6, n + 1) <= mpmath.mpf(1) / (5 * mpmath.mpf(n) ** 5) for n in range(1, 10_001))

    rng = seeded(8)
    slopes, holds = [], True
    for q in (1, 3, 5):
        ns = NodeSet(tuple(rng.uniform(-3, 3, q + 1)), -1j)
        rep = dd_perturbation_check(ns, 1e-3, rng=rng)
        holds &= rep.holds
        slopes.append(rep.slope)
    record_property(
        "detail", f"max measured/(eps/t)={worst:.3f}, tail ok={tail_ok}, slopes=" + ",".join(f"{s:.3f}" for s in slopes)
    )
    assert worst <= 1
    assert tail_ok
    assert holds
    assert all(abs(s - 1) <= 0.05 for s in slopes)


@pytest.mark.criterion(9, "LCU weight window and |beta| <= 1")
def test_criterion_9_lcu_and_beta(record_property):
    hi = 0.0
    for eps_seg in np.logspace(-1, -14, 27):
        Q = truncation_order(LN2, eps_seg).Q
        exact = sum(mpmath.mpf(LN2) ** q / mpmath.factorial(q) for q in range(Q + 1))
        w = lcu_weight(LN2, Q)
        assert abs(w - float(exact)) <= 1e-15
        assert 2 - 2 * eps_seg <= w <= 2
        hi = max(hi, (2 - w) / eps_seg)

    rng = seeded(9)
    worst, count = 0.0, 0
    for N in (1, 2, 3):
        for _ in range(3):
            p = RydbergParams(N, tuple(rng.uniform(0.2, 2, N)), rng.uniform(-2, 2), rng.uniform(0, 3))
            form = pmr_decompose(rydberg_hamiltonian_terms(p))
            dt = select_r(rng.uniform(0.5, 3), form.Gamma).dt
            for q in range(5):
                for path in itertools.product(range(form.M), repeat=q):
                    for z in range(1 << N):
                        worst = max(worst, abs(beta(form, z, path, dt).value))
                        count += 1
    record_property("detail", f"max (2-weight)/eps_seg={hi:.3f}, max |beta|={worst:.12f} over {count} paths")
    assert worst <= 1 + 1e-12


# ---------------------------------------------------------------- criterion 10


def _tail_order(x, budget):
    # smallest Q with sum_{q > Q} x**q / q! <= budget, at 40 digits
    with mpmath.workdps(40):
        x = mpmath.mpf(x)
        partial, term = mpmath.mpf(0), mpmath.mpf(1)
        total = mpmath.exp(x)
        for Q in range(200):
            partial += term
            if total - partial <= budget:
                return Q
            term *= x / (Q + 1)
    raise AssertionError("no order found")


def _clog2(v):
    return 0 if v <= 1 else math.ceil(mpmath.log(v, 2) - mpmath.mpf(10) ** -20)


def _ln0(v):
    return max(mpmath.mpf(0), mpmath.log(v))


def _rederive(row):
    alg = row["algorithm"]
    N, t, eps = int(row["N"]), mpmath.mpf(row["t"]), mpmath.mpf(row["eps"])
    if alg in ("qubitization", "pmr_ti", "pmr_ti_approx"):
        om, delta, c6p = (mpmath.mpf(row[k]) for k in ("omega", "delta", "c6p"))
    if alg == "qubitization":
        pairs = [(i, j) for i in range(N) for j in range(i + 1, N)]
        C = {(i, j): c6p / (j - i) ** 6 for i, j in pairs}
        z = [sum(C[e] for e in pairs if k in e) / 4 - delta / 2 for k in range(N)]
        alpha = N * om / 2 + sum(abs(v) for v in z) + sum(abs(v) / 4 for v in C.values())
        M = 2 * N + len(pairs)
        return (alpha * t + _ln0(1 / eps)) * M * (N + _clog2(M)), _clog2(M) + 2
    if alg in ("pmr_ti", "pmr_ti_approx"):
        G = N * om / 2
        r = int(mpmath.ceil(t * G / mpmath.log(2)))
        Q = _tail_order(G * t / r, eps / (2 * r))
        if alg == "pmr_ti":
            cd0, cdd0 = N * N, N
        else:
            cd0 = N * max(1, int(mpmath.ceil((t * c6p / (5 * eps)) ** (mpmath.mpf(1) / 5))))
            cdd0 = max(1, int(mpmath.ceil((8 * Q * t * c6p / (5 * eps)) ** (mpmath.mpf(1) / 5))))
        gate = r * (cd0 + Q**2 + Q * N * (cdd0 + 1 + _clog2(N)))
        return gate, int(mpmath.ceil(Q * mpmath.log(N, 2))) if N > 1 else 0
    J, zeta, w = (mpmath.mpf(row[k]) for k in ("J", "zeta", "w"))
    d = int(row["d"])
    if alg == "qhop":
        aB, bB, aAB = N * zeta, N * zeta * w, 4 * J * N * zeta * d
        s = aAB + bB
        b1 = aB**2 * t**2 / eps * _ln0(aB * t / eps)
        b2 = aB * t + mpmath.sqrt(aB * s) * t**1.5 / mpmath.sqrt(eps) * _ln0(aB * s * t / eps)
        M = max(1, s / aB**2) if b1 <= b2 else max(1, mpmath.sqrt(2 * s * t / eps))
        return min(b1, b2) * _ln0(s * t / eps) * N * (d + N), _clog2(N) + _clog2(M)
    G = N * zeta
    r = int(mpmath.ceil(t * G / mpmath.log(2)))
    Q = _tail_order(G * t / r, eps / (2 * r))
    gate = r * (Q**2 + Q * N * (_clog2(N) + 1) + Q * N * 2 * (1 + 2 * d + 1)) + d * N * 2
    return gate, _clog2(2 * N)


@pytest.mark.criterion(10, "estimator golden file and formula re-derivation")
def test_criterion_10_golden(tmp_path, record_property):
    golden = (GOLDEN / "estimate_grid.csv").read_bytes()
    out = tmp_path / "grid.csv"
    assert cli.main(["--config", str(GOLDEN / "estimate_grid.yaml"), "--out", str(out)]) == 0
    doc = yaml.safe_load((GOLDEN / "estimate_grid.yaml").read_text())
    direct = to_csv(sweep(doc["grid"])).encode()
    cli_match, sweep_match = out.read_bytes() == golden, direct == golden

    rows = list(csv.DictReader(io.StringIO(golden.decode())))
    worst, qubit_mismatch = 0.0, []
    for row in rows:
        gate, qubits = _rederive(row)
        got = float(row["gate_cost"])
        worst = max(worst, float(abs(got - gate) / gate))
        if int(row["qubit_cost"]) != int(qubits):
            qubit_mismatch.append((row["algorithm"], row["N"]))
    record_property(
        "detail",
        f"{len(rows)} rows, cli bytes match={cli_match}, sweep bytes match={sweep_match}, "
        f"max rel dev={worst:.1e}, qubit mismatches={len(qubit_mismatch)}",
    )
    assert cli_match and sweep_match
    # the CSV keeps 12 significant digits
    assert worst <= 1e-11
    assert not qubit_mismatch
