"""Engine tests: ground truth, scheduling, trials, beliefs, aggregation."""

import math

import numpy as np
import pytest

from seqprobe.engine import (
    ComponentSpec,
    SprtTest,
    belief_trajectory,
    belief_update_exclusive,
    belief_update_independent,
    draw_ground_truth,
    exhaustive_search_monte_carlo,
    profile_for_spec,
    profiles_from_monte_carlo,
    run_monte_carlo,
    run_trial,
    schedule_starts,
    substream,
)
from seqprobe.models import CompositeSpace, Family, HypothesisPair, ObservationModel
from seqprobe.ordering import (
    AnomalyModel,
    Ordering,
    PolicyRule,
    analytic_expected_cost,
    order_components,
)
from seqprobe.sequential import (
    CompositeTestConfig,
    SprtConfig,
    run_composite_test,
    run_sprt,
)

PAIR = HypothesisPair(
    ObservationModel(Family.POISSON, 10.0), ObservationModel(Family.POISSON, 15.0)
)
SPACE = CompositeSpace(Family.POISSON, 19.0, 21.0, 0.001, 60.0)


def sprt_specs(thetas=(10.0, 32.5, 55.0), pi=0.8, alpha=0.01, beta=0.01):
    specs = []
    for i, t in enumerate(thetas):
        pair = HypothesisPair(
            ObservationModel(Family.POISSON, t), ObservationModel(Family.POISSON, 1.5 * t)
        )
        specs.append(ComponentSpec(
            id=i + 1, pi=pi, cost=t, test=SprtTest(pair, SprtConfig(alpha, beta))
        ))
    return specs


def exclusive_specs(k=4):
    specs = []
    for i in range(k):
        t = 10.0 + 20.0 * i
        pair = HypothesisPair(
            ObservationModel(Family.POISSON, t), ObservationModel(Family.POISSON, 1.5 * t)
        )
        specs.append(ComponentSpec(
            id=i + 1, pi=1.0 / k, cost=t, test=SprtTest(pair, SprtConfig(0.01, 0.01))
        ))
    return specs


class TestGroundTruth:
    def test_independent_certain_priors(self):
        specs = sprt_specs(pi=1.0)
        gt = draw_ground_truth(specs, AnomalyModel.INDEPENDENT, substream(0, 0))
        assert gt.abnormal == frozenset({1, 2, 3})
        assert gt.normal == frozenset()

    def test_exclusive_degenerate_prior(self):
        specs = sprt_specs()
        specs = [
            ComponentSpec(id=s.id, pi=p, cost=s.cost, test=s.test)
            for s, p in zip(specs, (1.0, 0.0, 0.0))
        ]
        for t in range(50):
            gt = draw_ground_truth(specs, AnomalyModel.EXCLUSIVE, substream(1, t))
            assert gt.abnormal == frozenset({1})

    def test_exclusive_requires_unit_mass(self):
        with pytest.raises(ValueError):
            draw_ground_truth(sprt_specs(pi=0.5), AnomalyModel.EXCLUSIVE, substream(0, 0))

    def test_independent_binomial_mean(self):
        specs = sprt_specs(thetas=tuple(10.0 + i for i in range(20)), pi=0.8)
        total = 0
        draws = 20_000
        for t in range(draws):
            gt = draw_ground_truth(specs, AnomalyModel.INDEPENDENT, substream(2, t))
            total += len(gt.abnormal)
        mean = total / draws
        sigma = math.sqrt(20 * 0.8 * 0.2 / draws)
        assert abs(mean - 16.0) < 3 * sigma

    def test_exclusive_marginals(self):
        specs = exclusive_specs(4)
        counts = np.zeros(4)
        draws = 20_000
        for t in range(draws):
            gt = draw_ground_truth(specs, AnomalyModel.EXCLUSIVE, substream(3, t))
            assert len(gt.abnormal) == 1
            counts[next(iter(gt.abnormal)) - 1] += 1
        for c in counts:
            p = c / draws
            assert abs(p - 0.25) < 3 * math.sqrt(0.25 * 0.75 / draws)


class TestSchedule:
    def test_single_slot_accumulates(self):
        # Order (3, 1, 2) with sizes (N3, N1, N2) stacks stopping times.
        starts, taus, slots = schedule_starts([7, 4, 9], 1)
        assert taus.tolist() == [7, 11, 20]
        assert starts.tolist() == [1, 8, 12]
        assert set(slots.tolist()) == {0}

    def test_two_slots_hand_example(self):
        # Sizes (4, 2, 5): slot B frees at t=2, third test runs t=3..7.
        starts, taus, slots = schedule_starts([4, 2, 5], 2)
        assert starts.tolist() == [1, 1, 3]
        assert taus.tolist() == [4, 2, 7]
        assert slots.tolist() == [0, 1, 1]

    def test_full_parallel(self):
        starts, taus, _ = schedule_starts([3, 8, 5], 3)
        assert starts.tolist() == [1, 1, 1]
        assert taus.tolist() == [3, 8, 5]

    def test_input_validation(self):
        with pytest.raises(ValueError):
            schedule_starts([0], 1)
        with pytest.raises(ValueError):
            schedule_starts([1], 0)


def reconstruct_cost(specs, record):
    """Independent cost reducer: sum c_k * tau_k over truly abnormal components."""
    total = 0.0
    for i, s in enumerate(specs):
        if record.truth_abnormal[i]:
            total += s.cost * float(record.tau[i])
    return total


class TestRunTrial:
    def test_time_conservation_single_slot(self):
        specs = sprt_specs()
        ordering = Ordering((3, 1, 2))
        for t in range(30):
            rec = run_trial(specs, ordering, AnomalyModel.INDEPENDENT, 1, substream(4, t))
            assert rec.tau.max() == rec.n_obs.sum()
            assert rec.realized_cost == pytest.approx(reconstruct_cost(specs, rec))

    def test_stopping_times_stack_in_probing_order(self):
        # Order (3, 1, 2) with one slot: tau_3 = N_3, tau_1 = N_3 + N_1,
        # tau_2 = N_3 + N_1 + N_2.
        specs = sprt_specs()
        rec = run_trial(specs, Ordering((3, 1, 2)), AnomalyModel.INDEPENDENT, 1,
                        substream(4, 99))
        n = {i + 1: rec.n_obs[i] for i in range(3)}
        tau = {i + 1: rec.tau[i] for i in range(3)}
        assert tau[3] == n[3]
        assert tau[1] == n[3] + n[1]
        assert tau[2] == n[3] + n[1] + n[2]

    def test_full_parallel_taus_equal_sizes(self):
        specs = sprt_specs()
        ordering = Ordering((1, 2, 3))
        rec = run_trial(specs, ordering, AnomalyModel.INDEPENDENT, 3, substream(5, 0))
        assert np.array_equal(rec.tau, rec.n_obs)

    def test_slot_occupancy_is_consistent(self):
        # No slot runs two tests at once and no slot idles while a component
        # is still queued.
        specs = sprt_specs(thetas=(10.0, 20.0, 30.0, 40.0, 50.0))
        ordering = Ordering((5, 3, 1, 4, 2))
        for t in range(20):
            rec = run_trial(specs, ordering, AnomalyModel.INDEPENDENT, 2, substream(6, t))
            intervals = {}
            for i in range(len(specs)):
                intervals.setdefault(int(rec.slot[i]), []).append(
                    (int(rec.start[i]), int(rec.tau[i]))
                )
            for slot, ivs in intervals.items():
                ivs.sort()
                for (s1, e1), (s2, e2) in zip(ivs, ivs[1:]):
                    assert s2 == e1 + 1  # busy back-to-back, no idling and no overlap

    def test_determinism_and_collect_equivalence(self):
        specs = sprt_specs()
        ordering = Ordering((2, 3, 1))
        a = run_trial(specs, ordering, AnomalyModel.INDEPENDENT, 1, substream(7, 1))
        b = run_trial(specs, ordering, AnomalyModel.INDEPENDENT, 1, substream(7, 1),
                      collect_observations=True)
        assert np.array_equal(a.verdict, b.verdict)
        assert np.array_equal(a.n_obs, b.n_obs)
        assert a.realized_cost == b.realized_cost
        for i in range(3):
            assert len(b.observations[i]) == b.n_obs[i]

    def test_replay_matches_generic_tests(self):
        # Dual route: feeding the collected observations through the generic
        # stream-based SPRT must reproduce the kernel's verdict and size.
        specs = sprt_specs()
        ordering = Ordering((1, 2, 3))
        for t in range(25):
            rec = run_trial(specs, ordering, AnomalyModel.INDEPENDENT, 1, substream(8, t),
                            collect_observations=True)
            for i, s in enumerate(specs):
                v = run_sprt(s.test.pair, s.test.config, iter(rec.observations[i]))
                assert v.decision == rec.verdict[i]
                assert v.sample_size == rec.n_obs[i]

    def test_replay_matches_generic_composite(self):
        cfg = CompositeTestConfig.sglrt(SPACE, 1e-3, "fixed")
        spec = ComponentSpec(id=1, pi=1.0, cost=1.0, test=cfg, true_theta_h1=23.0)
        ordering = Ordering((1,))
        for t in range(25):
            rec = run_trial([spec], ordering, AnomalyModel.INDEPENDENT, 1, substream(9, t),
                            collect_observations=True)
            v = run_composite_test(cfg, iter(rec.observations[0]))
            assert v.decision == rec.verdict[0]
            assert v.sample_size == rec.n_obs[0]

    def test_early_stop_requires_exclusive(self):
        specs = sprt_specs()
        with pytest.raises(ValueError):
            run_trial(specs, Ordering((1, 2, 3)), AnomalyModel.INDEPENDENT, 1,
                      substream(10, 0), early_stop=True)

    def test_early_stop_freezes_remaining(self):
        specs = exclusive_specs(4)
        ordering = Ordering((1, 2, 3, 4))
        saw_early = 0
        for t in range(40):
            rec = run_trial(specs, ordering, AnomalyModel.EXCLUSIVE, 1, substream(11, t),
                            early_stop=True)
            flagged = rec.verdict == 1
            if flagged.any():
                t_stop = rec.tau[flagged].min()
                untested = rec.verdict == -1
                if untested.any():
                    saw_early += 1
                    assert (rec.tau[untested] == t_stop).all()
                assert (rec.tau[rec.verdict >= 0] <= t_stop).all()
            assert rec.realized_cost == pytest.approx(reconstruct_cost(specs, rec))
        assert saw_early > 0


class TestBeliefs:
    def test_uninformative_batch_leaves_beliefs(self):
        # A batch with likelihood ratio one cannot move any posterior.
        pair = HypothesisPair(
            ObservationModel(Family.GAUSSIAN, 0.0, aux=1.0),
            ObservationModel(Family.GAUSSIAN, 2.0, aux=1.0),
        )
        beliefs = np.array([0.3, 0.7])
        out = belief_update_independent(beliefs, 0, np.array([1.0]), pair)
        assert np.allclose(out, beliefs, atol=1e-12)
        beliefs = np.array([0.4, 0.6])
        out = belief_update_exclusive(beliefs, 0, np.array([1.0]), pair)
        assert np.allclose(out, beliefs, atol=1e-12)

    def test_absorbing_priors(self):
        batch = np.array([14.0, 16.0, 13.0])
        for p in (0.0, 1.0):
            beliefs = np.array([p, 0.5])
            out = belief_update_independent(beliefs, 0, batch, PAIR)
            assert out[0] == p
            assert out[1] == 0.5

    def test_bayes_arithmetic_llr_log3(self):
        # Prior 1/2 and a batch likelihood ratio of 3 give posterior 3/4.
        # Gaussian pair with unit slope: observation y has llr y; use y=log 3.
        pair = HypothesisPair(
            ObservationModel(Family.GAUSSIAN, -0.5, aux=1.0),
            ObservationModel(Family.GAUSSIAN, 0.5, aux=1.0),
        )
        batch = np.array([math.log(3.0)])
        out = belief_update_independent(np.array([0.5, 0.9]), 0, batch, pair)
        assert out[0] == pytest.approx(0.75, rel=1e-12)
        assert out[1] == 0.9

    def test_exclusive_two_component_update(self):
        pair = HypothesisPair(
            ObservationModel(Family.GAUSSIAN, -0.5, aux=1.0),
            ObservationModel(Family.GAUSSIAN, 0.5, aux=1.0),
        )
        batch = np.array([math.log(3.0)])
        out = belief_update_exclusive(np.array([0.5, 0.5]), 0, batch, pair)
        assert out[0] == pytest.approx(0.75, rel=1e-12)
        assert out[1] == pytest.approx(0.25, rel=1e-12)

    def test_unprobed_entries_bit_identical(self):
        rng = np.random.default_rng(12)
        beliefs = rng.uniform(0.05, 0.95, 8)
        before = beliefs.copy()
        batch = rng.poisson(15.0, 6).astype(float)
        out = belief_update_independent(beliefs, 3, batch, PAIR)
        mask = np.arange(8) != 3
        assert np.array_equal(out[mask], before[mask])

    def test_exclusive_sum_preserved_over_many_updates(self):
        rng = np.random.default_rng(13)
        beliefs = rng.dirichlet(np.ones(6))
        for _ in range(1000):
            probed = int(rng.integers(0, 6))
            batch = rng.poisson(12.0, int(rng.integers(1, 8))).astype(float)
            beliefs = belief_update_exclusive(beliefs, probed, batch, PAIR)
            assert abs(beliefs.sum() - 1.0) <= 1e-9

    def test_trajectory_from_collected_trial(self):
        specs = exclusive_specs(3)
        ordering = Ordering((2, 1, 3))
        rec = run_trial(specs, ordering, AnomalyModel.EXCLUSIVE, 1, substream(14, 0),
                        collect_observations=True)
        traj = belief_trajectory(specs, rec, AnomalyModel.EXCLUSIVE)
        assert len(traj) == 4
        for vec in traj:
            assert abs(vec.sum() - 1.0) <= 1e-9

    def test_trajectory_requires_collection(self):
        specs = exclusive_specs(3)
        rec = run_trial(specs, Ordering((1, 2, 3)), AnomalyModel.EXCLUSIVE, 1,
                        substream(15, 0))
        with pytest.raises(ValueError):
            belief_trajectory(specs, rec, AnomalyModel.EXCLUSIVE)


class TestMonteCarlo:
    def test_zero_cost_components(self):
        specs = [
            ComponentSpec(id=s.id, pi=s.pi, cost=0.0, test=s.test) for s in sprt_specs()
        ]
        rep = run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 1, 50, 1)
        assert rep.mean_cost == 0.0

    def test_same_seed_identical_reports(self):
        specs = sprt_specs()
        a = run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 1, 200, 77)
        b = run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 1, 200, 77)
        assert a.mean_cost == b.mean_cost
        assert a.stderr_cost == b.stderr_cost
        for field in ("p_fa", "p_md", "mean_n_h0", "mean_n_h1", "mean_n"):
            x, y = getattr(a, field), getattr(b, field)
            assert np.array_equal(x, y, equal_nan=True)

    def test_error_rates_respect_wald_slack(self):
        specs = sprt_specs(alpha=0.01, beta=0.01)
        rep = run_monte_carlo(specs, PolicyRule.FIXED, AnomalyModel.INDEPENDENT, 1,
                              5000, 21)
        for i in range(len(specs)):
            if rep.n_h0_tested[i] > 0:
                se = math.sqrt(max(rep.p_fa[i] * (1 - rep.p_fa[i]), 1e-12)
                               / rep.n_h0_tested[i])
                assert rep.p_fa[i] <= 0.01 / 0.99 + 3 * se + 1e-12
            if rep.n_h1_tested[i] > 0:
                se = math.sqrt(max(rep.p_md[i] * (1 - rep.p_md[i]), 1e-12)
                               / rep.n_h1_tested[i])
                assert rep.p_md[i] <= 0.01 / 0.99 + 3 * se + 1e-12

    def test_mc_mean_matches_analytic_with_mc_sizes(self):
        # Cross-validation: the closed-form cost evaluated with Monte Carlo
        # sample-size estimates must sit within the Monte Carlo error bars.
        specs = sprt_specs(thetas=(10.0, 25.0, 40.0, 55.0), alpha=0.01, beta=1e-6)
        rep = run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 1,
                              5000, 31)
        profiles = profiles_from_monte_carlo(specs, rep)
        analytic = analytic_expected_cost(profiles, rep.ordering, AnomalyModel.INDEPENDENT)
        assert abs(rep.mean_cost - analytic) <= 3 * rep.stderr_cost

    def test_mc_mean_matches_analytic_exclusive(self):
        # Same cross-validation for the exclusive model, whose closed form
        # charges only H0-conditioned sizes for the preceding components.
        specs = exclusive_specs(4)
        rep = run_monte_carlo(specs, PolicyRule.PICN0, AnomalyModel.EXCLUSIVE, 1,
                              8000, 32)
        profiles = profiles_from_monte_carlo(specs, rep)
        analytic = analytic_expected_cost(profiles, rep.ordering, AnomalyModel.EXCLUSIVE)
        assert abs(rep.mean_cost - analytic) <= 3 * rep.stderr_cost

    def test_random_policy_reshuffles_per_trial(self):
        specs = sprt_specs(thetas=(10.0, 20.0, 30.0, 40.0))
        rep = run_monte_carlo(specs, PolicyRule.RANDOM, AnomalyModel.INDEPENDENT, 1,
                              100, 41)
        assert rep.ordering is None
        orders = set()
        for t in range(100):
            rng = substream(41, 1, t)
            profiles = [profile_for_spec(s) for s in specs]
            orders.add(order_components(profiles, PolicyRule.RANDOM, rng).sequence)
        assert len(orders) > 1

    def test_validation(self):
        specs = sprt_specs()
        with pytest.raises(ValueError):
            run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 0, 10, 1)
        with pytest.raises(ValueError):
            run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 4, 10, 1)
        with pytest.raises(ValueError):
            run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 1, 0, 1)


class TestExhaustiveMonteCarlo:
    def test_common_random_numbers_make_picn_competitive(self):
        specs = sprt_specs(thetas=(10.0, 30.0, 50.0, 70.0))
        ex = exhaustive_search_monte_carlo(specs, AnomalyModel.INDEPENDENT, 1, 2000, 51)
        profiles = [profile_for_spec(s) for s in specs]
        picn = order_components(profiles, PolicyRule.PICN)
        gain = (ex.mean_cost_of(picn) - ex.best_mean_cost) / ex.mean_cost_of(picn)
        assert 0.0 <= gain <= 0.02
        assert len(ex.orders) == math.factorial(4)

    def test_guard(self):
        specs = sprt_specs(thetas=tuple(10.0 + i for i in range(9)))
        with pytest.raises(ValueError, match="refused"):
            exhaustive_search_monte_carlo(specs, AnomalyModel.INDEPENDENT, 1, 10, 1)
