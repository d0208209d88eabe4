import math

import mpmath
import numpy as np
import pytest

from pmrsim import oracles
from pmrsim.errors import ValidationError
from pmrsim.models import RydbergParams, rydberg_hamiltonian_terms
from pmrsim.pmr import pmr_decompose
from pmrsim.ti_propagator import select_Q, select_r
from pmrsim.truncation import (
    CutoffPlan,
    cutoff_d0,
    cutoff_d0_exact,
    cutoff_delta_d0,
    delta_d0_budget,
    delta_d0_errors,
    diagonal_difference_norm,
    dropped_norm,
    pair_tail,
    tail_bound,
    tail_sum,
    truncate_interaction,
)


def rydberg_form(N, c6p=1.0, delta=0.3):
    p = RydbergParams.uniform(N, 1.0, delta, c6p)
    return p, pmr_decompose(rydberg_hamiltonian_terms(p))


class TestCutoffFormulas:
    def test_d0_example(self):
        # ceil(200 ** 0.2) = ceil(2.885...)
        assert cutoff_d0(1.0, 1.0, 1e-3).n == 3

    def test_d0_floor(self):
        assert cutoff_d0(1.0, 1.0, 0.2).n == 1
        assert cutoff_d0(1.0, 1.0, 10.0).n == 1

    def test_delta_d0_example(self):
        # ceil(1600 ** 0.2) = ceil(4.373...)
        assert cutoff_delta_d0(1, 1.0, 1.0, 1e-3).n == 5

    def test_delta_d0_scaling(self):
        base = (8 * 1 * 2.0 * 0.7 / (5 * 1e-4)) ** 0.2
        scaled = (8 * 8 * 2.0 * 0.7 / (5 * 1e-4)) ** 0.2
        assert scaled / base == pytest.approx(8**0.2)
        assert cutoff_delta_d0(8, 2.0, 0.7, 1e-4).n == math.ceil(scaled)

    def test_delta_d0_floor(self):
        assert cutoff_delta_d0(3, 1.0, 1.0, 1e6).n == 1

    def test_invalid(self):
        with pytest.raises(ValidationError):
            cutoff_d0(1.0, 1.0, 0.0)
        with pytest.raises(ValidationError):
            cutoff_delta_d0(0, 1.0, 1.0, 1e-3)
        with pytest.raises(ValidationError):
            CutoffPlan(0, 1e-3, 1.0)


class TestTruncate:
    def test_no_op_when_n_large(self):
        _, form = rydberg_form(5)
        assert truncate_interaction(form.D0, 4) == form.D0
        assert dropped_norm(form.D0, 4) == 0

    def test_nearest_neighbour_only(self):
        _, form = rydberg_form(4)
        D = truncate_interaction(form.D0, 1, 4)
        pairs = [m for m, _ in D.terms if bin(m).count("1") == 2]
        assert sorted(pairs) == [0b0011, 0b0110, 0b1100]
        # single-site terms untouched
        assert [t for t in D.terms if bin(t[0]).count("1") == 1] == [
            t for t in form.D0.terms if bin(t[0]).count("1") == 1
        ]

    def test_size_mismatch(self):
        _, form = rydberg_form(3)
        with pytest.raises(ValidationError):
            truncate_interaction(form.D0, 1, 4)

    @pytest.mark.parametrize("N,n", [(4, 1), (6, 2), (8, 1), (9, 3)])
    def test_difference_equals_dropped_weight(self, N, n):
        _, form = rydberg_form(N, c6p=2.0)
        D = truncate_interaction(form.D0, n)
        dense = np.max(np.abs(form.D0.values() - D.values()))
        assert diagonal_difference_norm(form.D0, D) == pytest.approx(dense, abs=1e-15)
        # couplings share a sign, so the all-equal state attains the sum
        assert dense == pytest.approx(dropped_norm(form.D0, n), rel=1e-12)
        assert dense == pytest.approx(pair_tail(N, n, 2.0), rel=1e-12)

    def test_truncated_diagonal_against_dense_model(self):
        p, form = rydberg_form(6, c6p=1.5)
        D = truncate_interaction(form.D0, 2)
        full = np.diag(oracles.rydberg_dense([0.0] * 6, p.delta, p.c6p)).real
        assert np.max(np.abs(full - D.values())) == pytest.approx(pair_tail(6, 2, 1.5), rel=1e-12)


class TestTails:
    @pytest.mark.parametrize("n", [1, 2, 3, 10, 100, 9999])
    def test_tail_sum_vs_zeta(self, n):
        assert tail_sum(n) == pytest.approx(float(mpmath.zeta(6, n + 1)), rel=1e-12)

    def test_finite_tail(self):
        assert tail_sum(2, 6) == pytest.approx(3**-6 + 4**-6 + 5**-6)
        assert tail_sum(5, 6) == 0.0

    def test_bound(self):
        for n in (1, 2, 5, 50, 10**4):
            assert tail_sum(n) <= tail_bound(n)


class TestCutoffChain:
    @pytest.mark.parametrize("N", [4, 8, 12])
    @pytest.mark.parametrize("t,c6p,eps", [(1.0, 1.0, 1e-3), (10.0, 0.5, 1e-4), (0.5, 5.0, 1e-2)])
    def test_d0_guarantee_small_chains(self, N, t, c6p, eps):
        _, form = rydberg_form(N, c6p=c6p)
        n = cutoff_d0(t, c6p, eps).n
        assert diagonal_difference_norm(form.D0, truncate_interaction(form.D0, n)) <= eps / t

    def test_d0_guarantee_fails_for_long_chains(self):
        # the single-distance tail argument ignores the N - d pairs at each distance
        N, t, c6p, eps = 14, 1.0, 0.5, 1e-4
        n = cutoff_d0(t, c6p, eps).n
        assert n == 4  # ceil(1000 ** 0.2)
        assert pair_tail(N, n, c6p) > eps / t
        exact = cutoff_d0_exact(N, t, c6p, eps)
        assert exact.n > n and pair_tail(N, exact.n, c6p) <= eps / t

    def test_exact_cutoff_minimal(self):
        for N in (5, 10, 30):
            plan = cutoff_d0_exact(N, 1.0, 1.0, 1e-4)
            assert pair_tail(N, plan.n, 1.0) <= 1e-4
            if plan.n > 1:
                assert pair_tail(N, plan.n - 1, 1.0) > 1e-4

    @pytest.mark.parametrize("N", [5, 8])
    def test_delta_d0_errors_within_budget(self, N):
        t, c6p, eps = 1.0, 1.0, 1e-3
        _, form = rydberg_form(N, c6p=c6p)
        plan = select_r(t, form.Gamma)
        Q = select_Q(plan, form.Gamma, eps).Q
        n = cutoff_delta_d0(Q, t, c6p, eps).n
        errs = delta_d0_errors(form, n)
        assert len(errs) == form.M
        assert max(errs) <= delta_d0_budget(Q, t, eps)

    def test_delta_d0_errors_match_brute_force(self):
        _, form = rydberg_form(6, c6p=3.0)
        n = 2
        D = truncate_interaction(form.D0, n)
        full, trunc = form.D0.values(), D.values()
        zs = np.arange(64)
        for m, err in zip(form.perm_masks, delta_d0_errors(form, n)):
            dE_full = full[zs ^ m] - full
            dE_trunc = trunc[zs ^ m] - trunc
            assert err == pytest.approx(np.max(np.abs(dE_full - dE_trunc)), rel=1e-12)

    def test_budget(self):
        assert delta_d0_budget(4, 2.0, 1e-3) == pytest.approx(1e-3 / 16)
        with pytest.raises(ValidationError):
            delta_d0_budget(0, 1.0, 1.0)
