"""Queueing-analytics unit tests: closed-form values, reduction identities,
Monte-Carlo oracles for the queue recursions, and solver robustness."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from airstream import analytics as an
from airstream.analytics import (
    AnalyticScenario,
    ZoneInputs,
    analyze_grid,
    availability0,
    availabilityX,
    conflict_arrival_estimate,
    correction_factor,
    expected_spread,
    feedbackX,
    forward_congestion,
    mmbp_modulate,
    mmrp_modulate,
    overflow0,
    overflow_split,
    overflowX,
    solve_theta0,
    solve_zone,
    stream0_queue_recursion,
    streamX_beta_recursion,
    streamX_gamma_recursion,
)
from airstream.pgf import Pgf

from conftest import make_grid, mc_gamma_queue, mc_stream0_queue


def coeffs(p, width):
    arr = np.asarray(p.c, dtype=float).reshape(-1)
    out = np.zeros(max(width, len(arr)))
    out[: len(arr)] = arr
    assert np.all(np.abs(out[width:]) < 1e-12)
    return out[:width]


# ---------------------------------------------------------------------------
# closed-form / arithmetic examples
# ---------------------------------------------------------------------------

class TestClosedForms:
    def test_first_queue_pgf_direct(self):
        v = stream0_queue_recursion(Pgf.bernoulli(0.5), 0.4, 1)[0]
        assert coeffs(v, 2) == pytest.approx([0.8, 0.2], abs=1e-12)

    def test_forward_congestion_value(self):
        assert forward_congestion(0.5, 1.0, S=11, M=2) == pytest.approx(
            1.0 - 0.5 ** 10 - 10 * 0.5 ** 10, abs=1e-9)

    def test_forward_congestion_trivials(self):
        assert forward_congestion(1.0, 1.0, S=11, M=2) == pytest.approx(0.0)
        assert forward_congestion(0.0, 1.0, S=11, M=2) == pytest.approx(1.0)

    def test_correction_factor_value(self):
        assert correction_factor(0.2, M=2, eta=0.5, S=11) == pytest.approx(
            0.15 * 0.1 * np.exp(-11 * 0.1 ** 3), abs=1e-9)
        assert correction_factor(0.2, M=2, eta=0.5, S=11) == pytest.approx(
            0.014836, abs=1e-5)

    def test_correction_factor_symmetric_in_branch_bias(self):
        assert correction_factor(0.3, 3, 0.2, 11) == pytest.approx(
            correction_factor(0.3, 3, 0.8, 11))

    def test_clear_to_clear_transition_closed_form(self):
        for S in (7, 11, 15, 21):
            for M in range(2, S):
                th00, _, _ = mmrp_modulate(0.5, 0.5, S, M)
                assert th00 == pytest.approx(max(0.0, (S - M - 1) / (S - 1)))

    def test_clear_to_clear_is_conditional_probability(self):
        # P[oldest slot empty | exactly M entries in S-1 slots]; the entry
        # probability cancels, leaving a ratio of binomial coefficients.
        from math import comb
        S, M = 11, 3
        assert comb(S - 2, M) / comb(S - 1, M) == pytest.approx(
            (S - M - 1) / (S - 1))

    def test_modulation_trivials(self):
        th00, th10, ts = mmrp_modulate(1.0, 0.0, 11, 2)
        assert th10 == 0.0 and ts == pytest.approx(th00)
        _, th10_full, _ = mmrp_modulate(0.0, 1.0, 11, 2)
        assert th10_full == pytest.approx((11 - 2) / 10)

    def test_entry_refinement_value(self):
        w1s = mmbp_modulate(0.5, 0.8, 0.1, 0.6)
        theta01, theta11 = 0.2, 0.9
        assert w1s == pytest.approx(1 - (theta11 * 0.5 + theta01 * 0.5) * 0.6)

    def test_feedbackX_value(self):
        assert feedbackX(0.1, 0.5, 0.6) == pytest.approx(0.63, abs=1e-12)

    def test_feedbackX_trivials(self):
        assert feedbackX(1.0, 0.5, 0.6) == pytest.approx(0.0)
        # no conflicts: identical to the stream-0 feedback
        assert feedbackX(0.0, 0.3, 0.7) == pytest.approx(1 - 0.7 * 0.7)

    def test_availability0_values(self):
        sigma, pi = availability0(0.5, 0.8, 0.9)
        assert sigma == pytest.approx(0.4)
        assert pi == pytest.approx(0.6 + 0.4 * 0.1)
        assert availability0(1.0, 1.0, 1.0) == pytest.approx((1.0, 0.0))
        assert availability0(0.0, 0.7, 0.3) == pytest.approx((0.0, 1.0))

    def test_availabilityX_trivials(self):
        sigma, pi = availabilityX(1, 1, 1, 1, 1, 1, 1)
        assert sigma == pytest.approx(1.0) and pi == pytest.approx(0.0)
        # nodal arrival every slot that never descends: never empty
        sigma, pi = availabilityX(1, 1, 1, 1.0, 0.0, 1, 0.5)
        assert sigma == pytest.approx(0.0) and pi == pytest.approx(1.0)

    def test_overflow_split(self):
        plus, minus = overflow_split(0.4, 0.3)
        assert plus == pytest.approx(0.12) and minus == pytest.approx(0.28)


# ---------------------------------------------------------------------------
# recursion structure and reduction identities
# ---------------------------------------------------------------------------

class TestRecursions:
    def test_stream0_trivials(self):
        a = Pgf.bernoulli(0.5)
        v_clear = stream0_queue_recursion(a, 0.0, 4)
        for v in v_clear:
            assert coeffs(v, 1)[0] == pytest.approx(1.0)
        v_busy = stream0_queue_recursion(a, 1.0, 4)
        for j, v in enumerate(v_busy, start=1):
            expect = a
            for _ in range(j - 1):
                expect = expect * a
            assert coeffs(v, j + 1) == pytest.approx(coeffs(expect, j + 1))

    def test_stream0_normalized_and_degree(self):
        v = stream0_queue_recursion(Pgf.bernoulli(0.7), 0.45, 5)
        for j, p in enumerate(v, start=1):
            arr = np.asarray(p.c, dtype=float).reshape(-1)
            assert len(arr) <= j + 1
            assert arr.sum() == pytest.approx(1.0)

    def test_beta_reduces_to_stream0_without_conflicts(self):
        a_i = Pgf.bernoulli(0.35)
        for th in (0.2, 0.5, 0.8):
            beta = streamX_beta_recursion(a_i, th, 0.0, 5)
            base = stream0_queue_recursion(a_i, th, 4)
            assert len(beta) == len(base)
            for b, s in zip(beta, base):
                assert coeffs(b, 6) == pytest.approx(coeffs(s, 6), abs=1e-12)

    def test_beta_trivials(self):
        unit = Pgf.bernoulli(0.0)
        for v in streamX_beta_recursion(unit, 0.5, 0.2, 5):
            assert coeffs(v, 1)[0] == pytest.approx(1.0)
        a_i = Pgf.bernoulli(0.4)
        for j, v in enumerate(streamX_beta_recursion(a_i, 1.0, 0.0, 5), 1):
            expect = a_i
            for _ in range(j - 1):
                expect = expect * a_i
            assert coeffs(v, j + 1) == pytest.approx(coeffs(expect, j + 1))

    def test_gamma_weights_sum_to_one_and_normalized(self):
        g = streamX_gamma_recursion(
            Pgf.bernoulli(0.4), Pgf.bernoulli(0.1), 0.6, 0.5, 0.1, 0.55, 5)
        for p in g:
            assert np.asarray(p.c, dtype=float).reshape(-1).sum() == (
                pytest.approx(1.0))

    def test_gamma_reduces_to_stream0(self):
        a = Pgf.bernoulli(0.45)
        for th in (0.25, 0.6):
            g = streamX_gamma_recursion(
                a, Pgf.bernoulli(0.0), 1.0, th, 0.0, th, 5)
            base = stream0_queue_recursion(a, th, 5)
            for gp, sp in zip(g, base):
                assert coeffs(gp, 7) == pytest.approx(coeffs(sp, 7), abs=1e-12)

    def test_gamma_empty_arrivals(self):
        g = streamX_gamma_recursion(
            Pgf.bernoulli(0.0), Pgf.bernoulli(0.0), 0.5, 0.5, 0.1, 0.5, 5)
        for p in g:
            assert coeffs(p, 1)[0] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Monte-Carlo oracles of the slot-level count dynamics
# ---------------------------------------------------------------------------

class TestMonteCarloOracles:
    @pytest.mark.parametrize("lam", [0.2, 0.5, 0.8])
    @pytest.mark.parametrize("theta0", [0.2, 0.5, 0.8])
    def test_stream0_matches_count_dynamics(self, lam, theta0):
        L = 5
        hist = mc_stream0_queue(lam, theta0, L,
                                seed=hash((lam, theta0)) % 2 ** 31)
        v = stream0_queue_recursion(Pgf.bernoulli(lam), theta0, L)
        for j, p in enumerate(v):
            assert np.max(np.abs(coeffs(p, L + 1) - hist[j])) <= 0.01

    @pytest.mark.parametrize("params", [
        (0.4, 0.04, 0.6, 0.5, 0.05, 0.55),
        (0.6, 0.03, 0.4, 0.4, 0.08, 0.50),
        (0.3, 0.05, 0.7, 0.6, 0.10, 0.65),
    ])
    def test_gamma_matches_count_dynamics(self, params):
        pa, pc, b0, th, om, rho = params
        L = 5
        hist = mc_gamma_queue(pa, pc, b0, th, om, rho, L,
                              seed=hash(params) % 2 ** 31)
        g = streamX_gamma_recursion(
            Pgf.bernoulli(pa), Pgf.bernoulli(pc), b0, th, om, rho, L)
        for j, p in enumerate(g):
            assert np.max(np.abs(coeffs(p, 2 * L + 2) - hist[j])) <= 0.02


# ---------------------------------------------------------------------------
# overflow, conflict estimate and full-zone solves
# ---------------------------------------------------------------------------

class TestZoneSolves:
    def test_overflow0_zero_when_idle(self):
        a = Pgf.bernoulli(0.0)
        v = stream0_queue_recursion(a, 0.0, 5)
        phi = overflow0(a, v, 0.0, 1.0, M=2, eta=0.5, S=11)
        assert phi == pytest.approx(0.0, abs=1e-9)

    def test_conflict_estimate_zero_without_lateral_feed(self):
        c, omega = conflict_arrival_estimate(
            Pgf.bernoulli(0.5), Pgf.bernoulli(0.0), L=5, M=2, S=11, eta=0.5)
        assert omega == 0.0
        assert float(c.at0()) == pytest.approx(1.0)

    def test_fixed_point_solver_identity_map(self):
        res = solve_theta0(lambda t: t * 0.0 + 0.3)
        assert res.theta0 == pytest.approx(0.3, abs=1e-8)
        assert res.residual <= 1e-8

    def test_source_zone_saturated(self):
        grid = make_grid(M=2)
        out = solve_zone(ZoneInputs(
            stream=0, level=1, S=11, L=5, M=2, eta=0.5,
            a=Pgf.bernoulli(1.0)))
        assert out.theta0_star == pytest.approx((11 - 2) / 11, abs=1e-2)
        assert out.residual <= 1e-8

    @pytest.mark.parametrize("lam,M,eta", list(itertools.product(
        [0.1, 0.5, 0.9], [2, 4, 8], [0.0, 0.5, 1.0])))
    def test_solver_root_in_unit_interval(self, lam, M, eta):
        out = solve_zone(ZoneInputs(
            stream=0, level=1, S=11, L=5, M=M, eta=eta,
            a=Pgf.bernoulli(lam)))
        assert 0.0 <= out.theta0 <= 1.0
        assert out.residual <= 1e-8

    @settings(max_examples=30, deadline=None)
    @given(lam=st.floats(0.05, 1.0), M=st.integers(2, 10),
           eta=st.floats(0.0, 1.0))
    def test_solver_root_property(self, lam, M, eta):
        out = solve_zone(ZoneInputs(
            stream=0, level=1, S=11, L=5, M=M, eta=eta,
            a=Pgf.bernoulli(lam)))
        assert 0.0 <= out.theta0 <= 1.0
        assert out.residual <= 1e-8

    def test_departures_are_bernoulli_of_entry_rate(self):
        out = solve_zone(ZoneInputs(
            stream=0, level=1, S=11, L=5, M=2, eta=0.5,
            a=Pgf.bernoulli(0.6)))
        d = coeffs(out.departures, 2)
        assert d.sum() == pytest.approx(1.0)
        assert d[1] == pytest.approx(1.0 - out.w1_star_0, abs=1e-12)


# ---------------------------------------------------------------------------
# grid-level model
# ---------------------------------------------------------------------------

class TestGridModel:
    def test_analyze_grid_covers_all_zones(self):
        grid = make_grid(M=2)
        res = analyze_grid(AnalyticScenario(grid=grid, lam=0.6))
        assert set(res.zones) == set(grid.zones)
        assert res.max_residual() <= 1e-8

    def test_expected_spread_widens_with_load(self):
        grid = make_grid(M=2)
        lo = expected_spread(AnalyticScenario(grid=grid, lam=0.1))
        hi = expected_spread(AnalyticScenario(grid=grid, lam=0.9))
        width = lambda sp: sum(b - a for a, b in sp.values())
        assert width(hi) >= width(lo)

    def test_expected_spread_level1_balanced(self):
        grid = make_grid(M=2)
        sp = expected_spread(AnalyticScenario(grid=grid, lam=0.8))
        assert sp[1] == (-2, 2)

    def test_spread_drifts_with_branch_bias(self):
        grid = make_grid(M=2, eta=0.1)
        sp = expected_spread(AnalyticScenario(grid=grid, lam=0.8))
        lo, hi = sp[1]
        assert -lo > hi
