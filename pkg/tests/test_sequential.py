"""Sequential-test behavior: boundaries, statistics algebra, error bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqprobe.engine import SprtTest, run_single_test_monte_carlo
from seqprobe.models import CompositeSpace, Family, HypothesisPair, ObservationModel
from seqprobe.sequential import (
    CompositeTestConfig,
    SprtConfig,
    TestState,
    TruncationError,
    _resolve_crossings,
    alr_statistics_step,
    glr_statistics,
    run_composite_test,
    run_sprt,
    sprt_step,
    wald_boundaries,
)

POISSON_PAIR = HypothesisPair(
    ObservationModel(Family.POISSON, 10.0), ObservationModel(Family.POISSON, 15.0)
)
SPACE = CompositeSpace(Family.POISSON, 19.0, 21.0, 0.001, 60.0)


class TestWaldBoundaries:
    def test_asymmetric_values(self):
        a, b = wald_boundaries(0.01, 1e-6)
        assert b == pytest.approx((1 - 1e-6) / 0.01, rel=1e-14)
        assert a == pytest.approx(0.99 / 1e-6, rel=1e-14)
        assert b > 1.0 / a

    def test_symmetric_setting(self):
        a, b = wald_boundaries(0.01, 0.01)
        assert a == pytest.approx(99.0, rel=1e-14)
        assert b == pytest.approx(99.0, rel=1e-14)

    def test_degenerate_half_errors_flagged(self):
        with pytest.warns(UserWarning, match="degenerate"):
            a, b = wald_boundaries(0.5, 0.5)
        assert (a, b) == (1.0, 1.0)

    def test_domain_errors(self):
        for bad in (0.0, 1.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                wald_boundaries(bad, 0.1)
            with pytest.raises(ValueError):
                wald_boundaries(0.1, bad)


class TestSprt:
    def test_boundary_inclusion_at_equality(self):
        # B = A = 1 collapses the continuation region to the single point 0;
        # the first observation must decide, with the abnormal branch first.
        with pytest.warns(UserWarning):
            config = SprtConfig(0.5, 0.5)
        state = TestState()
        pair = HypothesisPair(
            ObservationModel(Family.GAUSSIAN, 0.0, aux=1.0),
            ObservationModel(Family.GAUSSIAN, 2.0, aux=1.0),
        )
        verdict = sprt_step(state, pair, config, 1.0)  # llr increment exactly 0
        assert verdict is not None
        assert verdict.decision == 1
        assert verdict.sample_size == 1

    def test_decides_on_crossing(self):
        config = SprtConfig(0.01, 0.01)
        state = TestState()
        pair = POISSON_PAIR
        verdicts = []
        for y in [30, 30, 30, 30]:
            v = sprt_step(state, pair, config, y)
            verdicts.append(v)
            if v:
                break
        assert verdicts[-1].decision == 1
        assert verdicts[-1].terminal_statistic >= config.log_upper

    def test_run_sprt_deterministic(self):
        config = SprtConfig(0.01, 0.01)

        def stream(seed):
            rng = np.random.default_rng(seed)
            while True:
                yield float(rng.poisson(15.0))

        v1 = run_sprt(POISSON_PAIR, config, stream(3))
        v2 = run_sprt(POISSON_PAIR, config, stream(3))
        assert (v1.decision, v1.sample_size, v1.terminal_statistic) == (
            v2.decision, v2.sample_size, v2.terminal_statistic
        )

    def test_h1_typical_stream_declares_abnormal(self):
        config = SprtConfig(0.01, 0.01)
        rng = np.random.default_rng(42)
        hits = 0
        for _ in range(200):
            v = run_sprt(
                POISSON_PAIR, config, (float(y) for y in rng.poisson(15.0, 10_000))
            )
            hits += v.decision
        assert hits >= 0.99 * 200 - 3 * math.sqrt(200 * 0.01 * 0.99)

    def test_truncation(self):
        config = SprtConfig(1e-6, 1e-6)
        with pytest.raises(TruncationError):
            run_sprt(POISSON_PAIR, config, iter([10.0, 10.0]), max_samples=2)
        with pytest.raises(TruncationError):
            run_sprt(POISSON_PAIR, config, iter([10.0]))


class TestSprtErrorBehavior:
    def test_wald_error_bound_under_h0(self):
        # Classical guarantee: realized false-alarm rate <= alpha / (1 - beta).
        alpha = beta = 0.01
        test = SprtTest(POISSON_PAIR, SprtConfig(alpha, beta))
        rep = run_single_test_monte_carlo(test, 10.0, 20_000, seed=7, stream_key=(91,))
        assert rep.frac_abnormal <= alpha / (1 - beta) + 3 * rep.stderr_frac

    def test_mean_n_close_to_approximation_h0(self):
        # alpha=0.01, beta=1e-6 under H0: Monte Carlo mean within 15% of the
        # Wald sample-size approximation.
        from seqprobe.ordering import expected_sample_sizes_simple

        test = SprtTest(POISSON_PAIR, SprtConfig(0.01, 1e-6))
        en_h0, _, _ = expected_sample_sizes_simple(POISSON_PAIR, 0.01, 1e-6)
        rep = run_single_test_monte_carlo(test, 10.0, 20_000, seed=8, stream_key=(92,))
        assert abs(rep.mean_n - en_h0) / en_h0 <= 0.15

    def test_monotonicity_in_error_targets(self):
        # Tightening a target never significantly shrinks the mean sample size
        # (overlapping-CI rejection: fail only on a significant decrease).
        trials = 20_000
        loose = SprtTest(POISSON_PAIR, SprtConfig(0.05, 0.01))
        tight = SprtTest(POISSON_PAIR, SprtConfig(0.001, 0.01))
        r_loose = run_single_test_monte_carlo(loose, 10.0, trials, 9, stream_key=(93,))
        r_tight = run_single_test_monte_carlo(tight, 10.0, trials, 9, stream_key=(93,))
        assert r_tight.mean_n >= r_loose.mean_n - 3 * (r_tight.stderr_n + r_loose.stderr_n)

        loose_b = SprtTest(POISSON_PAIR, SprtConfig(0.01, 0.05))
        tight_b = SprtTest(POISSON_PAIR, SprtConfig(0.01, 0.001))
        r_loose_b = run_single_test_monte_carlo(loose_b, 15.0, trials, 9, stream_key=(94,))
        r_tight_b = run_single_test_monte_carlo(tight_b, 15.0, trials, 9, stream_key=(94,))
        assert r_tight_b.mean_n >= r_loose_b.mean_n - 3 * (
            r_tight_b.stderr_n + r_loose_b.stderr_n
        )


class TestGlrStatistics:
    def test_zero_at_h0_boundary_mean(self):
        l0, l1 = glr_statistics([19.0, 19.0], SPACE)
        assert l0 == pytest.approx(0.0, abs=1e-12)
        assert l1 > 0.0

    def test_closed_form_poisson(self):
        # Two observations of 25: L1 = 2 * (25 log(25/21) - (25 - 21)).
        expected = 2.0 * (25.0 * math.log(25.0 / 21.0) - 4.0)
        _, l1 = glr_statistics([25.0, 25.0], SPACE)
        assert l1 == pytest.approx(expected, rel=1e-12)

    def test_matches_log_density_definition(self):
        # Oracle: evaluate the plain likelihood-ratio definition with full log
        # densities; the sufficient-statistic form must agree.
        history = [22.0, 18.0, 25.0, 20.0, 19.0]
        est = SPACE.clamp(sum(history) / len(history))
        for theta_i, got in zip((19.0, 21.0), glr_statistics(history, SPACE)):
            expected = sum(
                SPACE.model(est).log_density(y) - SPACE.model(theta_i).log_density(y)
                for y in history
            )
            assert got == pytest.approx(expected, rel=1e-10, abs=1e-10)

    def test_clamping_handles_zero_mean(self):
        l0, l1 = glr_statistics([0.0, 0.0], SPACE)
        assert math.isfinite(l0) and math.isfinite(l1)

    @given(st.lists(st.integers(min_value=0, max_value=80), min_size=1, max_size=40))
    @settings(max_examples=150)
    def test_nonnegative(self, history):
        l0, l1 = glr_statistics([float(y) for y in history], SPACE)
        assert l0 >= -1e-12
        assert l1 >= -1e-12

    def test_empty_history_rejected(self):
        with pytest.raises(ValueError):
            glr_statistics([], SPACE)


class TestAlrStatistics:
    def test_first_step_uses_midpoint_estimate(self):
        state = TestState()
        y = 25.0
        l0, l1 = alr_statistics_step(state, SPACE, y)
        mid = SPACE.midpoint
        num = SPACE.model(mid).log_density(y)
        exp_l0 = num - SPACE.model(19.0).log_density(y)
        exp_l1 = num - SPACE.model(21.0).log_density(y)
        assert l0 == pytest.approx(exp_l0, rel=1e-10)
        assert l1 == pytest.approx(exp_l1, rel=1e-10)
        assert state.estimate == pytest.approx(25.0)

    @given(st.lists(st.integers(min_value=0, max_value=80), min_size=1, max_size=30))
    @settings(max_examples=150)
    def test_adaptive_never_exceeds_glr(self, history):
        # The re-maximized estimate dominates any delayed estimate, so the
        # adaptive statistics sit at or below the GLR statistics pointwise.
        history = [float(y) for y in history]
        state = TestState()
        for y in history:
            al0, al1 = alr_statistics_step(state, SPACE, y)
        gl0, gl1 = glr_statistics(history, SPACE)
        assert al0 <= gl0 + 1e-9
        assert al1 <= gl1 + 1e-9


class TestCompositeRun:
    def test_tie_resolution(self):
        # Larger boundary excess wins; exact tie declares abnormal.
        assert _resolve_crossings(5.0, 5.0, 3.0, 3.0, 4).decision == 1
        assert _resolve_crossings(5.0, 6.0, 3.0, 3.0, 4).decision == 0
        assert _resolve_crossings(6.0, 5.0, 3.0, 3.0, 4).decision == 1
        assert _resolve_crossings(2.0, 5.0, 3.0, 3.0, 4).decision == 0
        assert _resolve_crossings(2.0, 2.0, 3.0, 3.0, 4) is None

    def test_boundary_schedules(self):
        fixed = CompositeTestConfig.sglrt(SPACE, 1e-3, "fixed")
        assert fixed.boundaries_at(1) == fixed.boundaries_at(1000)
        assert fixed.b0 == pytest.approx(math.log(1000.0), rel=1e-14)
        tv = CompositeTestConfig.sglrt(SPACE, 1e-3, "time-varying")
        b1, _ = tv.boundaries_at(1)
        b10, _ = tv.boundaries_at(10)
        assert b1 == pytest.approx(math.log(1000.0), rel=1e-14)
        assert b10 == pytest.approx(math.log(100.0), rel=1e-14)
        # Schedule floors at zero once n exceeds 1/c.
        assert tv.boundaries_at(2000) == (0.0, 0.0)

    def test_salrt_boundaries(self):
        cfg = CompositeTestConfig.salrt(SPACE, 0.026, 0.03)
        assert cfg.b0 == pytest.approx(math.log(1 / 0.026), rel=1e-14)
        assert cfg.b1 == pytest.approx(math.log(1 / 0.03), rel=1e-14)

    def test_run_matches_stepwise_statistics(self):
        # Replaying the stream through the public statistics operations must
        # reproduce the verdict of run_composite_test.
        rng = np.random.default_rng(17)
        ys = [float(y) for y in rng.poisson(25.0, 500)]
        cfg = CompositeTestConfig.sglrt(SPACE, 1e-3, "fixed")
        verdict = run_composite_test(cfg, iter(ys))
        state = TestState()
        for n, y in enumerate(ys, start=1):
            l0, l1 = glr_statistics(ys[:n], SPACE)
            v = _resolve_crossings(l0, l1, cfg.b0, cfg.b1, n)
            if v is not None:
                break
        assert (v.decision, v.sample_size) == (verdict.decision, verdict.sample_size)
        assert v.terminal_statistic == pytest.approx(verdict.terminal_statistic, rel=1e-9)

    def test_far_theta_detected_quickly(self):
        cfg = CompositeTestConfig.sglrt(SPACE, 1e-3, "fixed")
        rep = run_single_test_monte_carlo(cfg, 30.0, 2000, seed=3, stream_key=(95,))
        rep_near = run_single_test_monte_carlo(cfg, 22.0, 2000, seed=3, stream_key=(96,))
        assert rep.frac_abnormal > 0.999
        assert rep.mean_n < rep_near.mean_n

    def test_truncation(self):
        cfg = CompositeTestConfig.sglrt(SPACE, 1e-3, "fixed")
        with pytest.raises(TruncationError):
            run_composite_test(cfg, iter([20.0, 20.0, 20.0]), max_samples=3)


class TestCompositeErrorRates:
    def test_salrt_error_guarantee_under_h0(self):
        # Boundary log(1/alpha) caps the abnormal-declaration rate at alpha.
        alpha = 0.026
        cfg = CompositeTestConfig.salrt(SPACE, alpha, 0.03)
        rep = run_single_test_monte_carlo(cfg, 19.0, 100_000, seed=5, stream_key=(97,))
        assert rep.frac_abnormal <= alpha + 3 * rep.stderr_frac

    def test_sglrt_fixed_error_rates(self):
        # Fixed boundary at log(1/c), c=1e-3, keeps both error rates well
        # inside these bounds (the time-varying schedule measurably does not).
        cfg = CompositeTestConfig.sglrt(SPACE, 1e-3, "fixed")
        at_h0 = run_single_test_monte_carlo(cfg, 19.0, 20_000, seed=6, stream_key=(98,))
        at_h1 = run_single_test_monte_carlo(cfg, 21.0, 20_000, seed=6, stream_key=(99,))
        assert at_h0.frac_abnormal <= 0.026 + 3 * at_h0.stderr_frac
        assert 1.0 - at_h1.frac_abnormal <= 0.03 + 3 * at_h1.stderr_frac
