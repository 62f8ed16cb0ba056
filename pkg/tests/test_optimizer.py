import csv
import math

import numpy as np
import pytest

from semrelay.errors import EmptyResultError, InvalidParameterError, StateSpaceTooLargeError
from semrelay.optimizer import (
    SearchConfig,
    all_states,
    baseline_assign,
    decode_states,
    detailed_balance_error,
    empirical_stationary_check,
    encode_states,
    estimate_temperature,
    exhaustive_solve,
    gibbs_log_probs,
    log_free_energy,
    mixing_time_bounds,
    mmtsa_solve,
    neighbors,
    state_values,
    stationary_distribution,
    transition_matrix,
    transition_prob,
    tv_mixing_time,
)
from semrelay.repro import BASELINE_DIRECT, BASELINE_RELAY, random_problem
from semrelay.scenario import TARGET, VehicleState, predict_kinematics
from semrelay.semantics import MBIT, SemanticRepresentation, SemanticUnit
from semrelay.strategy import Assignment, ObjectiveWeights, Problem


def sr_of(*betas_mbit, alpha=1.0):
    return SemanticRepresentation(tuple(SemanticUnit(f"u{k}", alpha, b * MBIT) for k, b in enumerate(betas_mbit)))


class TestTransition:
    def test_downhill_always_accepted(self):
        assert transition_prob(2.0, 1.0, 0.3) == 1.0
        assert transition_prob(1.0, 1.0, 0.3) == 1.0

    def test_unit_gap(self):
        assert transition_prob(1.0, 1.7, 0.7) == pytest.approx(math.exp(-1), rel=1e-14)

    def test_log_four_gap(self):
        assert transition_prob(0.0, 0.2 * math.log(4), 0.2) == pytest.approx(0.25, rel=1e-14)

    def test_huge_gap_underflows_cleanly(self):
        assert transition_prob(0.0, 1e6, 1e-3) == 0.0

    def test_rejects_bad_temperature(self):
        with pytest.raises(InvalidParameterError):
            transition_prob(0, 1, 0)


class TestGibbs:
    def test_uniform(self):
        np.testing.assert_allclose(np.exp(gibbs_log_probs(np.full(27, 3.2), 0.5)), 1 / 27, rtol=1e-14)

    def test_two_states(self):
        t = 0.37
        np.testing.assert_allclose(np.exp(gibbs_log_probs([0.0, t * math.log(9)], t)), [0.9, 0.1], rtol=1e-14)

    def test_extreme_values_stay_finite(self):
        p = np.exp(gibbs_log_probs([0.0, 1e5, -1e5], 1e-2))
        assert np.isfinite(p).all() and p[2] == 1.0

    def test_detailed_balance(self, tiny):
        p = tiny(n_relays=2, n_units=5)
        u = state_values(p)
        for temp in (0.05, 0.5, 5.0):
            assert detailed_balance_error(u, 3, 5, temp) <= 1e-12

    def test_kernel_is_stochastic_and_stationary(self, tiny):
        p = tiny(n_relays=2, n_units=3)
        u = state_values(p)
        k = transition_matrix(u, 3, 3, 0.4)
        np.testing.assert_allclose(k.sum(axis=1), 1.0, atol=1e-14)
        pi = stationary_distribution(p, 0.4)
        np.testing.assert_allclose(pi @ k, pi, atol=1e-14)

    def test_free_energy_sandwich(self, rng):
        for _ in range(100):
            p = random_problem(rng, int(rng.integers(1, 3)), int(rng.integers(1, 5)))
            u = state_values(p)
            temp = float(rng.uniform(0.01, 2.0))
            f = log_free_energy(u, temp)
            assert u.min() - temp * math.log(u.size) - 1e-12 <= f <= u.min() + 1e-12

    def test_too_large(self, rng):
        p = random_problem(rng, 3, 11)
        with pytest.raises(StateSpaceTooLargeError):
            stationary_distribution(p, 1.0)


class TestStates:
    def test_codes_round_trip(self):
        rows = all_states(3, 4)
        assert rows.shape == (81, 4)
        np.testing.assert_array_equal(encode_states(rows, 3), np.arange(81))
        np.testing.assert_array_equal(decode_states(encode_states(rows, 3), 3, 4), rows)

    def test_neighbors_change_one_column(self):
        codes = np.arange(27)
        nb = neighbors(codes, 3, 3)
        assert nb.shape == (27, 6)
        diff = (decode_states(nb, 3, 3) != decode_states(codes, 3, 3)[:, None, :]).sum(axis=2)
        assert np.all(diff == 1)


class TestMixingBounds:
    def test_eps_one_gives_zero_lower(self):
        assert mixing_time_bounds(3, 2, 1.0, 0.0, 10.0, 1.0).lower == 0.0

    def test_zero_spread(self):
        b = mixing_time_bounds(4, 3, 0.7, 0.7, 0.5, 0.1)
        # denominator is N + 1/V - (N - 1)
        assert b.status == "ok" and math.isfinite(b.upper) and b.upper > 0
        expect = (4 * 3 / 3) * math.exp(0.7 / 0.5) * math.log(4 / 0.1) / (4 + 1 / 3 - 3)
        assert b.upper == pytest.approx(expect, rel=1e-12)
        assert b.lower == pytest.approx(math.log(10) / (2 * (1 / 12) * 4**4 * 3), rel=1e-12)

    def test_cold_chain_has_no_upper_bound(self):
        b = mixing_time_bounds(3, 2, 5.0, 0.0, 0.1, 0.25)
        assert b.status == "not-applicable" and b.upper == math.inf

    def test_single_unit(self):
        assert mixing_time_bounds(1, 2, 1.0, 0.0, 1.0, 0.25).status == "condition-unverifiable"

    @pytest.mark.parametrize("eps", [0.0, -0.1, 1.5])
    def test_invalid_eps(self, eps):
        with pytest.raises(InvalidParameterError):
            mixing_time_bounds(3, 2, 1.0, 0.0, 1.0, eps)

    def test_brackets_measured_mixing(self, tiny):
        p = tiny(n_relays=2, n_units=3)
        u = state_values(p)
        for temp in (0.5, 20.0, 1e3 * (u.max() - u.min())):
            pi = np.exp(gibbs_log_probs(u, temp))
            t_mix = tv_mixing_time(transition_matrix(u, 3, 3, temp), pi, 0.25)
            b = mixing_time_bounds(3, 2, u.max(), u.min(), temp, 0.25)
            assert b.lower <= t_mix <= b.upper


class TestExhaustive:
    def test_tie_break_is_lexicographic(self, rng):
        p = random_problem(rng, 2, 3)
        a, _ = exhaustive_solve(Problem(p.kinematics, p.channel, sr_of(1, 1, 1), ObjectiveWeights(0.0, 0.0, penalty=1.0), 1e3))
        assert a.rows.tolist() == [0, 0, 0]

    def test_reliability_only_prefers_direct(self, rng):
        p = random_problem(rng, 2, 3)
        prob = Problem(p.kinematics, p.channel, sr_of(0.1, 0.1, 0.1), ObjectiveWeights(0.0, 1.0), 60.0)
        assert state_values(prob).max() < prob.penalty * 0.5
        assert exhaustive_solve(prob)[0].rows.tolist() == [0, 0, 0]

    def test_single_state(self, geo, channel):
        kin = predict_kinematics(geo, VehicleState("v0", 0.0, 10.0, TARGET), [])
        prob = Problem(kin, channel, sr_of(5, 5), ObjectiveWeights(), 40.0)
        a, u_hat = exhaustive_solve(prob)
        assert a.rows.tolist() == [0, 0] and u_hat == prob.u_hat(a)

    def test_never_above_baseline(self, rng):
        for _ in range(30):
            p = random_problem(rng, 2, 4)
            base = baseline_assign(p.sr, p.kinematics, p.rates, p.t_max).assignment
            assert exhaustive_solve(p)[1] <= p.u_hat(base)


class TestBaseline:
    def test_published(self, published):
        cfg, kin, rates, sr = published
        res = baseline_assign(sr, kin, rates, 40.0)
        doc = {kin.names[i]: [sr.ids[j] for j in res.assignment.members(i)] for i in (0, 1)}
        assert doc == {"v0": BASELINE_DIRECT, "v1": BASELINE_RELAY}
        assert res.feasible
        assert set(res.assignment.rows.tolist()) == {0, 1}

    def test_fits_direct(self, published):
        _, kin, rates, _ = published
        res = baseline_assign(sr_of(10, 20, 30), kin, rates, 40.0)
        assert res.assignment.rows.tolist() == [0, 0, 0] and res.feasible

    def test_exact_capacity_no_spill(self, published):
        _, kin, rates, _ = published
        cap = rates.v2i * kin.dwell[0]
        sr = SemanticRepresentation((SemanticUnit("x", 1.0, cap / 2), SemanticUnit("y", 1.0, cap / 2)))
        assert baseline_assign(sr, kin, rates, 40.0).assignment.rows.tolist() == [0, 0]

    def test_overflow_flagged(self, published):
        _, kin, rates, _ = published
        res = baseline_assign(sr_of(*[40] * 30), kin, rates, 40.0)
        assert not res.feasible and res.residual > 0
        assert res.assignment.n_units == 30


class TestSearch:
    def test_degenerate_single_vehicle(self, geo, channel):
        kin = predict_kinematics(geo, VehicleState("v0", 0.0, 10.0, TARGET), [])
        prob = Problem(kin, channel, sr_of(5, 5), ObjectiveWeights(), 40.0)
        best, trace = mmtsa_solve(prob, SearchConfig(iterations=50))
        assert best == trace.initial and trace.n_accepted == 0

    def test_finds_optimum_on_27_states(self, rng):
        p = random_problem(rng, 2, 3)
        u = state_values(p)
        target, _ = exhaustive_solve(p)
        temp = estimate_temperature(p)
        hits = 0
        for seed in range(50):
            best, _ = mmtsa_solve(p, SearchConfig(temperature=temp, iterations=5000, seed=seed), u_table=u)
            hits += best == target
        assert hits >= 48

    def test_best_so_far_monotone(self, tiny):
        p = tiny(n_relays=3, n_units=6)
        for seed in range(5):
            _, trace = mmtsa_solve(p, SearchConfig(iterations=2000, seed=seed))
            assert np.all(np.diff(trace.best) <= 0)
            assert np.all(trace.best <= trace.current)
            assert trace.best_u_hat == p.u_hat(trace.best_assignment)

    def test_table_lookup_matches_evaluation(self, tiny):
        p = tiny(n_relays=2, n_units=4)
        cfg = SearchConfig(iterations=3000, seed=4)
        a, ta = mmtsa_solve(p, cfg)
        b, tb = mmtsa_solve(p, cfg, u_table=state_values(p))
        assert a == b
        np.testing.assert_array_equal(ta.accepted, tb.accepted)
        np.testing.assert_allclose(ta.current, tb.current, rtol=1e-12)

    def test_reproducible(self, published_problem):
        cfg = SearchConfig(iterations=1500, seed=9)
        a, ta = mmtsa_solve(published_problem, cfg)
        b, tb = mmtsa_solve(published_problem, cfg)
        assert a == b
        assert ta.current.tobytes() == tb.current.tobytes()

    def test_published_improves_on_baseline(self, published_plan):
        base = published_plan.problem.u_hat(published_plan.baseline.assignment)
        assert published_plan.problem.u_hat(published_plan.best) <= base
        assert published_plan.trace.best[0] <= base

    def test_init_choices(self, tiny):
        p = tiny(n_relays=2, n_units=3)
        _, tr = mmtsa_solve(p, SearchConfig(iterations=1, init="all-direct"))
        assert tr.initial.rows.tolist() == [0, 0, 0]
        _, tr = mmtsa_solve(p, SearchConfig(iterations=1, init="given", initial_rows=(2, 1, 0)))
        assert tr.initial.rows.tolist() == [2, 1, 0]

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            SearchConfig(iterations=0)
        with pytest.raises(InvalidParameterError):
            SearchConfig(temperature=-1.0)
        with pytest.raises(InvalidParameterError):
            SearchConfig(init="given")

    def test_trace_csv(self, tiny, tmp_path):
        _, tr = mmtsa_solve(tiny(), SearchConfig(iterations=20))
        path = tmp_path / "trace.csv"
        tr.write_csv(path)
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["iteration", "current_U_hat", "best_U_hat", "accepted"]
        assert len(rows) == 21 and float(rows[-1][2]) == tr.best_u_hat


class TestEmpiricalStationary:
    def test_converges(self, tiny):
        p = tiny(n_relays=2, n_units=3)
        u = state_values(p)
        temp = 0.5 * (u[u < p.penalty].max() - u.min()) + 1e-3
        assert empirical_stationary_check(p, temp, 10**6, seed=1, u=u) <= 0.05

    def test_uniform(self, tiny):
        p = tiny(n_relays=2, n_units=3)
        assert empirical_stationary_check(p, 1.0, 10**6, seed=2, u=np.zeros(27)) <= 0.02

    def test_empty_sample(self, tiny):
        p = tiny(n_relays=2, n_units=3)
        with pytest.raises(EmptyResultError):
            empirical_stationary_check(p, 1.0, 10, burn_in=1.0, u=np.zeros(27))
        with pytest.raises(EmptyResultError):
            empirical_stationary_check(p, 1.0, 0, u=np.zeros(27))


def test_assignment_rows_are_valid_states(tiny):
    p = tiny(n_relays=3, n_units=5)
    best, _ = mmtsa_solve(p, SearchConfig(iterations=500))
    assert isinstance(best, Assignment)
    assert best.rows.min() >= 0 and best.rows.max() < p.n_vehicles
