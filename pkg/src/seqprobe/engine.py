"""Monte Carlo engine for multi-component probing experiments.

Draws ground truth, runs each component's sequential test, schedules the
tests over a fixed number of simultaneous probe slots in discrete lockstep
time (switching only at declarations), accounts the realized cost and
aggregates trials into a report. Per-trial substreams are derived from a
single seed, so every experiment is reproducible and trials are independent.

Belief-update recursions for both anomaly models are provided as
diagnostics; the probing policies themselves are open loop and never read
the beliefs.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels as kernels
from .models import Family, HypothesisPair, batch_llr
from .ordering import (
    AnomalyModel,
    ComponentProfile,
    Ordering,
    PolicyRule,
    expected_sample_sizes_composite,
    expected_sample_sizes_simple,
    order_components,
)
from .sequential import CompositeTestConfig, SprtConfig, TruncationError

__all__ = [
    "SprtTest",
    "ComponentSpec",
    "GroundTruth",
    "TrialRecord",
    "AggregateReport",
    "SingleTestReport",
    "ExhaustiveMcReport",
    "draw_ground_truth",
    "schedule_starts",
    "run_trial",
    "belief_update_independent",
    "belief_update_exclusive",
    "belief_trajectory",
    "profile_for_spec",
    "run_monte_carlo",
    "run_single_test_monte_carlo",
    "exhaustive_search_monte_carlo",
]

UNTESTED = -1

_FAMILY_CODE = {
    Family.POISSON: kernels.POISSON,
    Family.GAUSSIAN: kernels.GAUSSIAN,
    Family.BERNOULLI: kernels.BERNOULLI,
}

EXHAUSTIVE_MC_MAX_K = 8


def substream(seed: int, *key: int) -> np.random.Generator:
    """Counter-based substream: same (seed, key) always yields the same stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class SprtTest:
    """A simple-hypothesis test assignment: known pair plus SPRT boundaries."""

    pair: HypothesisPair
    config: SprtConfig


@dataclass(frozen=True)
class ComponentSpec:
    """One component of the system under test.

    ``true_theta_h0``/``true_theta_h1`` are the sampling parameters used when
    the component is normal/abnormal; they default to the test's own
    hypothesis parameters (boundary points for composite tests).
    """

    id: int
    pi: float
    cost: float
    test: Union[SprtTest, CompositeTestConfig]
    true_theta_h0: Optional[float] = None
    true_theta_h1: Optional[float] = None
    max_samples: Optional[int] = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi must be in [0, 1], got {self.pi}")
        if self.cost < 0.0:
            raise ValueError(f"cost must be nonnegative, got {self.cost}")

    @property
    def family(self) -> Family:
        if isinstance(self.test, SprtTest):
            return self.test.pair.family
        return self.test.space.family

    @property
    def aux(self) -> float:
        if isinstance(self.test, SprtTest):
            return self.test.pair.h0.aux
        return self.test.space.aux

    def sampling_theta(self, abnormal: bool) -> float:
        if abnormal:
            if self.true_theta_h1 is not None:
                return self.true_theta_h1
            if isinstance(self.test, SprtTest):
                return self.test.pair.h1.theta
            return self.test.space.theta1
        if self.true_theta_h0 is not None:
            return self.true_theta_h0
        if isinstance(self.test, SprtTest):
            return self.test.pair.h0.theta
        return self.test.space.theta0

    @property
    def pair(self) -> HypothesisPair:
        if not isinstance(self.test, SprtTest):
            raise ValueError(f"component {self.id} has no simple hypothesis pair")
        return self.test.pair


@dataclass(frozen=True)
class GroundTruth:
    """Partition of component ids into normal and abnormal sets."""

    abnormal: frozenset[int]
    normal: frozenset[int]


def _validate_specs(specs: Sequence[ComponentSpec]) -> None:
    if not specs:
        raise ValueError("need at least one component spec")
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate component ids")


def _check_exclusive(specs: Sequence[ComponentSpec]) -> None:
    total = sum(s.pi for s in specs)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"exclusive model requires priors summing to 1, got {total}")


def draw_ground_truth(
    specs: Sequence[ComponentSpec], model: AnomalyModel, rng: np.random.Generator
) -> GroundTruth:
    """Sample which components are abnormal under the anomaly model."""
    _validate_specs(specs)
    ids = [s.id for s in specs]
    if model is AnomalyModel.INDEPENDENT:
        pis = np.array([s.pi for s in specs])
        flags = rng.random(len(specs)) < pis
        abnormal = frozenset(i for i, f in zip(ids, flags) if f)
    else:
        _check_exclusive(specs)
        u = rng.random()
        cum = np.cumsum([s.pi for s in specs])
        idx = int(np.searchsorted(cum, u, side="right"))
        idx = min(idx, len(specs) - 1)
        abnormal = frozenset([ids[idx]])
    return GroundTruth(abnormal=abnormal, normal=frozenset(ids) - abnormal)


def _run_component_test(
    spec: ComponentSpec, abnormal: bool, gen: np.random.Generator, collect: bool
) -> tuple[int, int, float, Optional[list[float]]]:
    theta_true = spec.sampling_theta(abnormal)
    max_n = spec.max_samples or 0
    if isinstance(spec.test, SprtTest):
        pair, cfg = spec.test.pair, spec.test.config
        dec, n, stat, obs = kernels.run_sprt_trial(
            gen, _FAMILY_CODE[pair.family], theta_true, pair.h0.aux,
            pair.h0.theta, pair.h1.theta, cfg.log_lower, cfg.log_upper,
            max_n, collect,
        )
    else:
        cfg = spec.test
        sp = cfg.space
        dec, n, stat, obs = kernels.run_composite_trial(
            gen, _FAMILY_CODE[sp.family], theta_true, sp.aux,
            sp.theta0, sp.theta1, sp.theta_min, sp.theta_max,
            cfg.variant == "salrt", sp.midpoint,
            cfg.b0, cfg.b1, cfg.schedule == "time-varying",
            cfg.cost_per_obs or 0.0, max_n, collect,
        )
    if dec < 0:
        raise TruncationError(
            f"component {spec.id} undecided after {n} observations (cap hit)"
        )
    return dec, n, stat, obs


def schedule_starts(sample_sizes: Sequence[int], num_probes: int) -> tuple[
    np.ndarray, np.ndarray, np.ndarray
]:
    """Slot schedule for tests run in the given probing order.

    Observations are consumed one per time unit per slot starting at t=1; a
    freed slot starts the next queued test on the following time unit.
    Returns (start, tau, slot) arrays aligned with ``sample_sizes``.
    """
    if num_probes < 1:
        raise ValueError("num_probes must be >= 1")
    k = len(sample_sizes)
    starts = np.zeros(k, dtype=np.int64)
    taus = np.zeros(k, dtype=np.int64)
    slots = np.zeros(k, dtype=np.int16)
    slot_free = [1] * num_probes
    for j, n in enumerate(sample_sizes):
        if n < 1:
            raise ValueError("sample sizes must be >= 1")
        slot = min(range(num_probes), key=lambda i: slot_free[i])
        starts[j] = slot_free[slot]
        taus[j] = starts[j] + n - 1
        slots[j] = slot
        slot_free[slot] = taus[j] + 1
    return starts, taus, slots


@dataclass(frozen=True, eq=False)
class TrialRecord:
    """Everything observed in one trial, indexed by spec position."""

    ids: tuple[int, ...]
    order_used: Ordering
    truth_abnormal: np.ndarray
    verdict: np.ndarray        # 1 abnormal, 0 normal, -1 untested
    n_obs: np.ndarray
    start: np.ndarray          # 0 when the test never started
    tau: np.ndarray
    slot: np.ndarray           # -1 when the test never started
    realized_cost: float
    observations: Optional[tuple[np.ndarray, ...]] = None


def run_trial(
    specs: Sequence[ComponentSpec],
    ordering: Ordering,
    model: AnomalyModel,
    num_probes: int,
    rng: np.random.Generator,
    early_stop: bool = False,
    collect_observations: bool = False,
) -> TrialRecord:
    """Simulate one full probing pass over all components.

    Tests run in the given order over ``num_probes`` lockstep slots. With
    ``early_stop`` (exclusive model only) the pass ends at the first abnormal
    declaration; components not declared by then are recorded as untested
    with their stopping time frozen at that moment. The realized cost sums
    cost-rate times stopping time over the truly abnormal components.
    """
    _validate_specs(specs)
    if early_stop and model is not AnomalyModel.EXCLUSIVE:
        raise ValueError("early_stop is only meaningful under the exclusive model")
    pos_by_id = {s.id: i for i, s in enumerate(specs)}
    if set(ordering.sequence) != set(pos_by_id) or len(ordering) != len(specs):
        raise ValueError("ordering must be a permutation of the component ids")
    truth = draw_ground_truth(specs, model, rng)

    k = len(specs)
    verdict = np.full(k, UNTESTED, dtype=np.int8)
    n_obs = np.zeros(k, dtype=np.int64)
    start = np.zeros(k, dtype=np.int64)
    tau = np.zeros(k, dtype=np.int64)
    slot = np.full(k, -1, dtype=np.int16)
    batches: list[Optional[np.ndarray]] = [None] * k

    order_pos = [pos_by_id[i] for i in ordering]
    sizes = []
    for p in order_pos:
        spec = specs[p]
        dec, n, _stat, obs = _run_component_test(
            spec, spec.id in truth.abnormal, rng, collect_observations
        )
        verdict[p] = dec
        n_obs[p] = n
        sizes.append(n)
        if collect_observations:
            batches[p] = np.asarray(obs, dtype=np.float64)
    starts_o, taus_o, slots_o = schedule_starts(sizes, num_probes)
    for j, p in enumerate(order_pos):
        start[p], tau[p], slot[p] = starts_o[j], taus_o[j], slots_o[j]

    if early_stop:
        flagged = (verdict == 1)
        if flagged.any():
            t_stop = int(tau[flagged].min())
            for p in range(k):
                if tau[p] > t_stop:
                    verdict[p] = UNTESTED
                    if start[p] > t_stop:
                        # never started in-world
                        n_obs[p] = 0
                        start[p] = 0
                        slot[p] = -1
                    else:
                        # abandoned mid-test; count observations actually taken
                        n_obs[p] = t_stop - start[p] + 1
                    tau[p] = t_stop
                    batches[p] = None

    cost = 0.0
    for i, s in enumerate(specs):
        if s.id in truth.abnormal:
            cost += s.cost * float(tau[i])

    truth_flags = np.array([s.id in truth.abnormal for s in specs])
    return TrialRecord(
        ids=tuple(s.id for s in specs),
        order_used=ordering,
        truth_abnormal=truth_flags,
        verdict=verdict,
        n_obs=n_obs,
        start=start,
        tau=tau,
        slot=slot,
        realized_cost=cost,
        observations=tuple(batches) if collect_observations else None,
    )


# --- belief diagnostics -----------------------------------------------------


def _posterior_log_parts(pi: float, llr: float) -> tuple[float, float]:
    """(log numerator, log denominator) of the Bayes update, overflow-safe."""
    with np.errstate(divide="ignore"):
        log_num = np.log(pi) + llr
        log_den = np.logaddexp(log_num, np.log1p(-pi))
    return float(log_num), float(log_den)


def belief_update_independent(
    beliefs: np.ndarray, probed: int, batch: np.ndarray, pair: HypothesisPair
) -> np.ndarray:
    """Posterior update after one completed test under the independent model.

    Only the probed entry changes; the batch enters through its joint
    likelihood ratio, computed in the log domain.
    """
    beliefs = np.asarray(beliefs, dtype=np.float64)
    out = beliefs.copy()
    pi = float(beliefs[probed])
    if pi <= 0.0 or pi >= 1.0:
        return out
    llr = batch_llr(pair, batch)
    log_num, log_den = _posterior_log_parts(pi, llr)
    out[probed] = math.exp(log_num - log_den)
    return out


def belief_update_exclusive(
    beliefs: np.ndarray, probed: int, batch: np.ndarray, pair: HypothesisPair
) -> np.ndarray:
    """Posterior update under the exclusive model (all entries change).

    The probed entry takes the Bayes posterior; every other entry is scaled
    by the probability that the probed component is normal. The denominator
    uses the summed mass of the unprobed entries (equal to 1 - pi under the
    exclusive invariant but numerically robust when pi rounds to 1). The
    result sums to one by construction and is verified to 1e-9.
    """
    beliefs = np.asarray(beliefs, dtype=np.float64)
    pi = float(beliefs[probed])
    mask = np.arange(beliefs.size) != probed
    rest = float(beliefs[mask].sum())
    llr = batch_llr(pair, batch)
    with np.errstate(divide="ignore"):
        log_den = np.logaddexp(np.log(pi) + llr, np.log(rest))
        out = np.exp(np.log(beliefs) - log_den)
        out[probed] = np.exp(np.log(pi) + llr - log_den)
    total = float(out.sum())
    if abs(total - 1.0) > 1e-9:
        raise RuntimeError(
            f"exclusive belief update lost normalization (sum={total!r}); "
            "this indicates an implementation bug"
        )
    return out


def belief_trajectory(
    specs: Sequence[ComponentSpec], record: TrialRecord, model: AnomalyModel
) -> list[np.ndarray]:
    """Belief vector after each completed test of a trial (diagnostic only).

    Requires the trial to have been run with ``collect_observations=True``
    and simple-hypothesis components.
    """
    if record.observations is None:
        raise ValueError("trial was run without collect_observations")
    pos_by_id = {s.id: i for i, s in enumerate(specs)}
    beliefs = np.array([s.pi for s in specs], dtype=np.float64)
    out = [beliefs]
    update = (
        belief_update_independent
        if model is AnomalyModel.INDEPENDENT
        else belief_update_exclusive
    )
    for comp_id in record.order_used:
        p = pos_by_id[comp_id]
        if record.verdict[p] == UNTESTED:
            break
        batch = record.observations[p]
        beliefs = update(beliefs, p, batch, specs[p].pair)
        out.append(beliefs)
    return out


# --- aggregation ------------------------------------------------------------


def profile_for_spec(spec: ComponentSpec) -> ComponentProfile:
    """Index ingredients from the closed-form sample-size approximations."""
    if isinstance(spec.test, SprtTest):
        en_h0, en_h1, _ = expected_sample_sizes_simple(
            spec.test.pair, spec.test.config.alpha, spec.test.config.beta
        )
    else:
        cfg = spec.test
        if cfg.schedule == "time-varying":
            b = math.log(1.0 / cfg.cost_per_obs)
            b0, b1 = b, b
        else:
            b0, b1 = cfg.b0, cfg.b1
        en_h0, en_h1 = expected_sample_sizes_composite(
            cfg.space, b0, b1, (cfg.space.theta0, cfg.space.theta1)
        )
    return ComponentProfile.from_conditional(spec.id, spec.pi, spec.cost, en_h0, en_h1)


def profiles_from_monte_carlo(
    specs: Sequence[ComponentSpec], report: "AggregateReport"
) -> list[ComponentProfile]:
    """Profiles whose sample sizes are the empirical means of a report.

    The offline-simulation alternative to the closed-form approximation for
    computing indices.
    """
    out = []
    for i, s in enumerate(specs):
        en_h0 = report.mean_n_h0[i]
        en_h1 = report.mean_n_h1[i]
        if math.isnan(en_h0) or math.isnan(en_h1):
            raise ValueError(
                f"component {s.id} lacks trials under one hypothesis; "
                "increase the trial count"
            )
        out.append(ComponentProfile.from_conditional(s.id, s.pi, s.cost, en_h0, en_h1))
    return out


@dataclass(frozen=True, eq=False)
class AggregateReport:
    """Monte Carlo summary across trials (arrays indexed by spec position)."""

    ids: tuple[int, ...]
    trials: int
    mean_cost: float
    stderr_cost: float
    p_fa: np.ndarray
    p_md: np.ndarray
    n_h0_tested: np.ndarray
    n_h1_tested: np.ndarray
    mean_n_h0: np.ndarray
    mean_n_h1: np.ndarray
    mean_n: np.ndarray
    mean_total_obs: float
    ordering: Optional[Ordering]
    rule: PolicyRule
    model: AnomalyModel
    seed: int


def run_monte_carlo(
    specs: Sequence[ComponentSpec],
    rule: PolicyRule,
    model: AnomalyModel,
    num_probes: int,
    trials: int,
    seed: int,
    early_stop: bool = False,
) -> AggregateReport:
    """Run ``trials`` independent probing passes and aggregate them.

    Index-rule and fixed orderings are computed once up front (the policies
    are open loop); the random baseline redraws its order every trial, which
    is what a random-order probing strategy means operationally.
    """
    _validate_specs(specs)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 1 <= num_probes <= len(specs):
        raise ValueError("num_probes must be in [1, K]")
    if model is AnomalyModel.EXCLUSIVE:
        _check_exclusive(specs)
    profiles = [profile_for_spec(s) for s in specs]
    fixed_order: Optional[Ordering] = None
    if rule is not PolicyRule.RANDOM:
        fixed_order = order_components(profiles, rule)

    k = len(specs)
    costs = np.zeros(trials)
    total_obs = np.zeros(trials)
    fa_count = np.zeros(k)
    h0_tested = np.zeros(k)
    md_count = np.zeros(k)
    h1_tested = np.zeros(k)
    n_sum_h0 = np.zeros(k)
    n_sum_h1 = np.zeros(k)
    n_sum = np.zeros(k)
    tested_cnt = np.zeros(k)

    for t in range(trials):
        rng = substream(seed, 1, t)
        if fixed_order is None:
            ordering = order_components(profiles, PolicyRule.RANDOM, rng)
        else:
            ordering = fixed_order
        rec = run_trial(specs, ordering, model, num_probes, rng, early_stop)
        costs[t] = rec.realized_cost
        total_obs[t] = rec.n_obs.sum()
        tested = rec.verdict != UNTESTED
        h0 = tested & ~rec.truth_abnormal
        h1 = tested & rec.truth_abnormal
        fa_count += h0 & (rec.verdict == 1)
        md_count += h1 & (rec.verdict == 0)
        h0_tested += h0
        h1_tested += h1
        n_sum_h0 += np.where(h0, rec.n_obs, 0)
        n_sum_h1 += np.where(h1, rec.n_obs, 0)
        n_sum += np.where(tested, rec.n_obs, 0)
        tested_cnt += tested

    with np.errstate(invalid="ignore", divide="ignore"):
        p_fa = fa_count / h0_tested
        p_md = md_count / h1_tested
        mean_n_h0 = n_sum_h0 / h0_tested
        mean_n_h1 = n_sum_h1 / h1_tested
        mean_n = n_sum / tested_cnt
    stderr = float(np.std(costs, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return AggregateReport(
        ids=tuple(s.id for s in specs),
        trials=trials,
        mean_cost=float(costs.mean()),
        stderr_cost=stderr,
        p_fa=p_fa,
        p_md=p_md,
        n_h0_tested=h0_tested,
        n_h1_tested=h1_tested,
        mean_n_h0=mean_n_h0,
        mean_n_h1=mean_n_h1,
        mean_n=mean_n,
        mean_total_obs=float(total_obs.mean()),
        ordering=fixed_order,
        rule=rule,
        model=model,
        seed=seed,
    )


@dataclass(frozen=True)
class SingleTestReport:
    """Mean sample size and decision rates of one test at a fixed true theta."""

    theta_true: float
    trials: int
    mean_n: float
    stderr_n: float
    frac_abnormal: float
    stderr_frac: float


def run_single_test_monte_carlo(
    test: Union[SprtTest, CompositeTestConfig],
    theta_true: float,
    trials: int,
    seed: int,
    max_samples: Optional[int] = None,
    stream_key: tuple[int, ...] = (3,),
) -> SingleTestReport:
    """Repeatedly run one test on data from ``theta_true`` (one component).

    ``stream_key`` namespaces the per-trial substreams; runs sharing a key
    (and theta) see the same observations, which gives paired comparisons
    across test variants.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    spec = ComponentSpec(
        id=0, pi=1.0, cost=0.0, test=test,
        true_theta_h0=theta_true, true_theta_h1=theta_true,
        max_samples=max_samples,
    )
    ns = np.zeros(trials)
    dec1 = np.zeros(trials, dtype=bool)
    for t in range(trials):
        rng = substream(seed, *stream_key, t)
        dec, n, _stat, _obs = _run_component_test(spec, abnormal=True, gen=rng,
                                                  collect=False)
        ns[t] = n
        dec1[t] = dec == 1
    frac = float(dec1.mean())
    stderr_n = float(np.std(ns, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    stderr_f = math.sqrt(frac * (1.0 - frac) / trials)
    return SingleTestReport(
        theta_true=theta_true,
        trials=trials,
        mean_n=float(ns.mean()),
        stderr_n=stderr_n,
        frac_abnormal=frac,
        stderr_frac=stderr_f,
    )


@dataclass(frozen=True, eq=False)
class ExhaustiveMcReport:
    """Per-order Monte Carlo mean costs over all K! probing orders."""

    orders: tuple[tuple[int, ...], ...]
    mean_costs: np.ndarray
    stderr_costs: np.ndarray
    best_order: Ordering
    best_mean_cost: float
    trials: int
    mean_total_obs: float

    def mean_cost_of(self, ordering: Ordering) -> float:
        return float(self.mean_costs[self.orders.index(tuple(ordering.sequence))])


def exhaustive_search_monte_carlo(
    specs: Sequence[ComponentSpec],
    model: AnomalyModel,
    num_probes: int,
    trials: int,
    seed: int,
) -> ExhaustiveMcReport:
    """Monte Carlo benchmark over every probing order.

    All orders are evaluated on the same simulated trials (common random
    numbers): ground truth and per-component sample sizes are drawn once per
    trial, then every order is costed by rescheduling those sample sizes.
    Ties in the minimum resolve to the lexicographically smallest order.
    """
    _validate_specs(specs)
    k = len(specs)
    if k > EXHAUSTIVE_MC_MAX_K:
        raise ValueError(
            f"exhaustive Monte Carlo over {k}! orders refused (max K={EXHAUSTIVE_MC_MAX_K})"
        )
    if not 1 <= num_probes <= k:
        raise ValueError("num_probes must be in [1, K]")
    if model is AnomalyModel.EXCLUSIVE:
        _check_exclusive(specs)

    truth = np.zeros((trials, k), dtype=bool)
    nmat = np.zeros((trials, k), dtype=np.int64)
    for t in range(trials):
        rng = substream(seed, 2, t)
        gt = draw_ground_truth(specs, model, rng)
        for i, s in enumerate(specs):
            truth[t, i] = s.id in gt.abnormal
            _dec, n, _stat, _obs = _run_component_test(
                s, s.id in gt.abnormal, rng, collect=False
            )
            nmat[t, i] = n

    cvec = np.array([s.cost for s in specs])
    weighted = truth * cvec
    rows = np.arange(trials)
    ids = tuple(sorted(s.id for s in specs))
    pos_by_id = {s.id: i for i, s in enumerate(specs)}

    orders: list[tuple[int, ...]] = []
    means = []
    stderrs = []
    for perm in itertools.permutations(ids):
        slot_free = np.ones((trials, num_probes))
        tau = np.zeros((trials, k))
        for comp_id in perm:
            p = pos_by_id[comp_id]
            j = np.argmin(slot_free, axis=1)
            start = slot_free[rows, j]
            end = start + nmat[:, p] - 1
            tau[:, p] = end
            slot_free[rows, j] = end + 1
        cost = (weighted * tau).sum(axis=1)
        orders.append(perm)
        means.append(float(cost.mean()))
        stderrs.append(float(np.std(cost, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0)

    means_arr = np.array(means)
    best_idx = int(np.argmin(means_arr))
    return ExhaustiveMcReport(
        orders=tuple(orders),
        mean_costs=means_arr,
        stderr_costs=np.array(stderrs),
        best_order=Ordering(orders[best_idx]),
        best_mean_cost=float(means_arr[best_idx]),
        trials=trials,
        mean_total_obs=float(nmat.sum(axis=1).mean()),
    )
