"""Single-component sequential tests.

Binary SPRT for fully specified simple hypotheses, plus two composite tests
for one-sided hypotheses with an indifference region: a generalized
likelihood-ratio test (statistics re-maximized over the full parameter space
at every stage) and an adaptive likelihood-ratio test (numerator uses the
one-step-delayed estimate, which buys exact error-probability boundaries).

Each test consumes an observation stream and produces a verdict (0 normal /
1 abnormal) together with the number of observations it used.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional

from .models import CompositeSpace, Family, HypothesisPair

__all__ = [
    "TruncationError",
    "wald_boundaries",
    "SprtConfig",
    "TestVerdict",
    "TestState",
    "sprt_step",
    "run_sprt",
    "CompositeTestConfig",
    "glr_statistics",
    "alr_statistics_step",
    "run_composite_test",
]

DECISION_NORMAL = 0
DECISION_ABNORMAL = 1


class TruncationError(RuntimeError):
    """A sequential test hit its sample cap before reaching a decision."""


def wald_boundaries(alpha: float, beta: float) -> tuple[float, float]:
    """Wald's boundary approximation (A, B) for error targets (alpha, beta).

    B = (1 - beta) / alpha is the upper (reject-normal) boundary and
    A = (1 - alpha) / beta the reciprocal lower boundary, i.e. the test
    continues while the likelihood ratio stays inside (1/A, B). A warning is
    issued when alpha + beta >= 1, where the continuation region collapses.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must be in (0, 1), got {beta}")
    b = (1.0 - beta) / alpha
    a = (1.0 - alpha) / beta
    if b * a <= 1.0:
        warnings.warn(
            f"degenerate boundaries for alpha={alpha}, beta={beta}: "
            "continuation region is empty",
            stacklevel=2,
        )
    return a, b


@dataclass(frozen=True)
class SprtConfig:
    """SPRT error targets and stopping boundaries.

    Boundaries default to Wald's approximation; pass explicit values to
    override (both are linear-domain, the test itself compares in logs).
    """

    alpha: float
    beta: float
    upper_boundary: float = 0.0
    lower_boundary: float = 0.0

    def __post_init__(self) -> None:
        if self.upper_boundary == 0.0 or self.lower_boundary == 0.0:
            a, b = wald_boundaries(self.alpha, self.beta)
            if self.upper_boundary == 0.0:
                object.__setattr__(self, "upper_boundary", b)
            if self.lower_boundary == 0.0:
                object.__setattr__(self, "lower_boundary", a)
        if self.upper_boundary <= 0.0 or self.lower_boundary <= 0.0:
            raise ValueError("boundaries must be positive")

    @property
    def log_upper(self) -> float:
        return math.log(self.upper_boundary)

    @property
    def log_lower(self) -> float:
        """Log of the lower threshold 1/A."""
        return -math.log(self.lower_boundary)


@dataclass(frozen=True)
class TestVerdict:
    """Outcome of one sequential test."""

    __test__ = False  # not a pytest class despite the name

    decision: int
    sample_size: int
    terminal_statistic: float

    def __post_init__(self) -> None:
        if self.decision not in (DECISION_NORMAL, DECISION_ABNORMAL):
            raise ValueError(f"decision must be 0 or 1, got {self.decision}")
        if self.sample_size < 1:
            raise ValueError(f"sample_size must be >= 1, got {self.sample_size}")


@dataclass
class TestState:
    """Mutable per-test accumulator.

    ``history`` is retained only for composite tests; ``adaptive_numerator``
    and ``estimate`` carry the adaptive statistic's running sum and the
    one-step-delayed parameter estimate.
    """

    __test__ = False  # not a pytest class despite the name

    n: int = 0
    llr: float = 0.0
    history: list[float] = field(default_factory=list)
    sum_y: float = 0.0
    sum_y_sq: float = 0.0
    adaptive_numerator: float = 0.0
    estimate: Optional[float] = None


def sprt_step(
    state: TestState, pair: HypothesisPair, config: SprtConfig, y: float
) -> Optional[TestVerdict]:
    """Consume one observation; return a verdict or None to continue.

    Boundaries are inclusive: the test decides abnormal at llr >= log B and
    normal at llr <= -log A, with the abnormal branch checked first.
    """
    state.n += 1
    state.llr += pair.h1.log_density(y) - pair.h0.log_density(y)
    if state.llr >= config.log_upper:
        return TestVerdict(DECISION_ABNORMAL, state.n, state.llr)
    if state.llr <= config.log_lower:
        return TestVerdict(DECISION_NORMAL, state.n, state.llr)
    return None


def run_sprt(
    pair: HypothesisPair,
    config: SprtConfig,
    stream: Iterable[float],
    max_samples: Optional[int] = None,
) -> TestVerdict:
    """Run the SPRT over an observation stream until it decides."""
    state = TestState()
    for y in stream:
        verdict = sprt_step(state, pair, config, y)
        if verdict is not None:
            return verdict
        if max_samples is not None and state.n >= max_samples:
            raise TruncationError(f"SPRT undecided after {max_samples} observations")
    raise TruncationError(f"observation stream exhausted after {state.n} observations")


# --- composite tests -------------------------------------------------------
#
# The statistics only depend on the observations through (n, sum y, sum y^2),
# so the steppers below track sufficient statistics instead of re-scanning
# the history. Normalization constants common to numerator and denominator
# are dropped throughout; they cancel in every reported statistic.


def _core_logpdf(family: Family, y: float, theta: float, aux: float) -> float:
    """log f(y | theta) without the theta-independent normalization term."""
    if family is Family.POISSON:
        return y * math.log(theta) - theta
    if family is Family.GAUSSIAN:
        d = y - theta
        return -(d * d) / (2.0 * aux)
    return math.log(theta) if y == 1.0 else math.log(1.0 - theta)


def _core_logpdf_sum(
    family: Family, n: int, s: float, ss: float, theta: float, aux: float
) -> float:
    """Sum of _core_logpdf over a batch with count n, sum s, sum-of-squares ss."""
    if family is Family.POISSON:
        return s * math.log(theta) - n * theta
    if family is Family.GAUSSIAN:
        return -(ss - 2.0 * theta * s + n * theta * theta) / (2.0 * aux)
    return s * math.log(theta) + (n - s) * math.log(1.0 - theta)


@dataclass(frozen=True)
class CompositeTestConfig:
    """Composite test variant, boundaries and boundary schedule.

    With the fixed schedule the statistics are compared against b0/b1; with
    the time-varying schedule both boundaries follow max(log(1/(n c)), 0)
    where c is the per-observation cost.
    """

    space: CompositeSpace
    variant: Literal["sglrt", "salrt"]
    b0: float
    b1: float
    schedule: Literal["fixed", "time-varying"] = "fixed"
    cost_per_obs: Optional[float] = None

    def __post_init__(self) -> None:
        if self.variant not in ("sglrt", "salrt"):
            raise ValueError(f"variant must be 'sglrt' or 'salrt', got {self.variant!r}")
        if self.schedule not in ("fixed", "time-varying"):
            raise ValueError(f"unknown boundary schedule {self.schedule!r}")
        if self.b0 <= 0.0 or self.b1 <= 0.0:
            raise ValueError("boundaries b0, b1 must be positive")
        if self.schedule == "time-varying":
            if self.cost_per_obs is None or self.cost_per_obs <= 0.0:
                raise ValueError("time-varying schedule requires cost_per_obs > 0")

    @classmethod
    def salrt(cls, space: CompositeSpace, alpha: float, beta: float) -> "CompositeTestConfig":
        """Adaptive test with boundaries log(1/alpha), log(1/beta).

        This setting makes the realized error probabilities provably at most
        alpha and beta.
        """
        if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
            raise ValueError("alpha and beta must be in (0, 1)")
        return cls(space, "salrt", b0=math.log(1.0 / alpha), b1=math.log(1.0 / beta))

    @classmethod
    def sglrt(
        cls,
        space: CompositeSpace,
        cost_per_obs: float,
        schedule: Literal["fixed", "time-varying"] = "fixed",
    ) -> "CompositeTestConfig":
        """GLR test with boundaries derived from the per-observation cost."""
        if cost_per_obs <= 0.0:
            raise ValueError("cost_per_obs must be positive")
        b = math.log(1.0 / cost_per_obs)
        return cls(space, "sglrt", b0=b, b1=b, schedule=schedule, cost_per_obs=cost_per_obs)

    def boundaries_at(self, n: int) -> tuple[float, float]:
        if self.schedule == "fixed":
            return self.b0, self.b1
        b = math.log(1.0 / (n * self.cost_per_obs))
        if b < 0.0:
            b = 0.0
        return b, b


def glr_statistics(history: list[float], space: CompositeSpace) -> tuple[float, float]:
    """Generalized likelihood-ratio rejection statistics (L0, L1).

    L_i compares the likelihood at the clamped sample-mean estimate against
    the boundary point of the i-side hypothesis space; both are nonnegative.
    """
    n = len(history)
    if n == 0:
        raise ValueError("history must be nonempty")
    s = math.fsum(history)
    ss = math.fsum(y * y for y in history)
    est = space.clamp(s / n)
    num = _core_logpdf_sum(space.family, n, s, ss, est, space.aux)
    l0 = num - _core_logpdf_sum(space.family, n, s, ss, space.theta0, space.aux)
    l1 = num - _core_logpdf_sum(space.family, n, s, ss, space.theta1, space.aux)
    return l0, l1


def alr_statistics_step(
    state: TestState, space: CompositeSpace, y: float
) -> tuple[float, float]:
    """Advance the adaptive statistics by one observation and return (L0, L1).

    The numerator scores the new observation with the estimate from the
    previous stage (the indifference-region midpoint before any data), then
    the estimate is refreshed; denominators use the boundary parameters.
    """
    if state.estimate is None:
        state.estimate = space.midpoint
    state.adaptive_numerator += _core_logpdf(space.family, y, state.estimate, space.aux)
    state.n += 1
    state.history.append(y)
    state.sum_y += y
    state.sum_y_sq += y * y
    state.estimate = space.clamp(state.sum_y / state.n)
    l0 = state.adaptive_numerator - _core_logpdf_sum(
        space.family, state.n, state.sum_y, state.sum_y_sq, space.theta0, space.aux
    )
    l1 = state.adaptive_numerator - _core_logpdf_sum(
        space.family, state.n, state.sum_y, state.sum_y_sq, space.theta1, space.aux
    )
    return l0, l1


def _resolve_crossings(
    l0: float, l1: float, b0: float, b1: float, n: int
) -> Optional[TestVerdict]:
    """Apply the min-stopping rule with the conservative tie break.

    If both statistics cross at the same stage the larger boundary excess
    wins and an exact tie declares abnormal.
    """
    cross0 = l0 >= b0
    cross1 = l1 >= b1
    if cross0 and cross1:
        if l0 - b0 >= l1 - b1:
            return TestVerdict(DECISION_ABNORMAL, n, l0)
        return TestVerdict(DECISION_NORMAL, n, l1)
    if cross0:
        return TestVerdict(DECISION_ABNORMAL, n, l0)
    if cross1:
        return TestVerdict(DECISION_NORMAL, n, l1)
    return None


def run_composite_test(
    config: CompositeTestConfig,
    stream: Iterable[float],
    max_samples: Optional[int] = None,
) -> TestVerdict:
    """Run an SGLRT or SALRT over an observation stream until it decides.

    Crossing the 0-side boundary rejects H0 (abnormal); crossing the 1-side
    boundary rejects H1 (normal).
    """
    space = config.space
    state = TestState()
    for y in stream:
        if config.variant == "salrt":
            l0, l1 = alr_statistics_step(state, space, y)
        else:
            state.n += 1
            state.history.append(y)
            state.sum_y += y
            state.sum_y_sq += y * y
            est = space.clamp(state.sum_y / state.n)
            num = _core_logpdf_sum(
                space.family, state.n, state.sum_y, state.sum_y_sq, est, space.aux
            )
            l0 = num - _core_logpdf_sum(
                space.family, state.n, state.sum_y, state.sum_y_sq, space.theta0, space.aux
            )
            l1 = num - _core_logpdf_sum(
                space.family, state.n, state.sum_y, state.sum_y_sq, space.theta1, space.aux
            )
        b0, b1 = config.boundaries_at(state.n)
        verdict = _resolve_crossings(l0, l1, b0, b1, state.n)
        if verdict is not None:
            return verdict
        if max_samples is not None and state.n >= max_samples:
            raise TruncationError(
                f"composite test undecided after {max_samples} observations"
            )
    raise TruncationError(f"observation stream exhausted after {state.n} observations")
