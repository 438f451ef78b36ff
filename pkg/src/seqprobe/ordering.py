"""Probing-order policies and closed-form cost evaluation.

Builds per-component profiles (prior, cost, expected sample sizes), computes
scheduling indices, produces probing orders and evaluates the exact expected
total cost of any order under both anomaly models. An exhaustive search over
all permutations is provided as an optimality benchmark for small K.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .models import CompositeSpace, HypothesisPair, kl_divergence, kl_to_boundary

__all__ = [
    "AnomalyModel",
    "PolicyRule",
    "ComponentProfile",
    "Ordering",
    "expected_sample_sizes_simple",
    "expected_sample_sizes_composite",
    "compute_index",
    "order_components",
    "analytic_expected_cost",
    "mean_cost_over_random_orders",
    "exhaustive_best_order",
]

EXHAUSTIVE_MAX_K = 10


class AnomalyModel(str, Enum):
    """How component states are jointly distributed.

    INDEPENDENT: each component is abnormal with its own prior, independently.
    EXCLUSIVE: exactly one component is abnormal; priors sum to one.
    """

    INDEPENDENT = "independent"
    EXCLUSIVE = "exclusive"


class PolicyRule(str, Enum):
    PICN = "picn"      # decreasing pi*c / E(N)
    PICN0 = "picn0"    # decreasing pi*c / E(N | H0)
    RANDOM = "random"
    FIXED = "fixed"


@dataclass(frozen=True)
class ComponentProfile:
    """Index ingredients for one component."""

    id: int
    pi: float
    cost: float
    en_h0: float
    en_h1: float
    en: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi must be in [0, 1], got {self.pi}")
        if self.cost < 0.0:
            raise ValueError(f"cost must be nonnegative, got {self.cost}")
        if self.en_h0 < 1.0 or self.en_h1 < 1.0:
            raise ValueError("expected sample sizes must be >= 1")
        mixture = self.pi * self.en_h1 + (1.0 - self.pi) * self.en_h0
        if abs(self.en - mixture) > 1e-9:
            raise ValueError(
                f"en={self.en} is not the prior mixture of en_h0/en_h1 ({mixture})"
            )

    @classmethod
    def from_conditional(
        cls, id: int, pi: float, cost: float, en_h0: float, en_h1: float
    ) -> "ComponentProfile":
        """Build a profile, flooring sample sizes at one observation."""
        en_h0 = max(1.0, en_h0)
        en_h1 = max(1.0, en_h1)
        en = pi * en_h1 + (1.0 - pi) * en_h0
        return cls(id=id, pi=pi, cost=cost, en_h0=en_h0, en_h1=en_h1, en=en)


@dataclass(frozen=True)
class Ordering:
    """A probing order: component ids, first-tested first."""

    sequence: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(set(self.sequence)) != len(self.sequence):
            raise ValueError("ordering contains duplicate component ids")

    def __iter__(self):
        return iter(self.sequence)

    def __len__(self) -> int:
        return len(self.sequence)


def expected_sample_sizes_simple(
    pair: HypothesisPair, alpha: float, beta: float, pi: Optional[float] = None
) -> tuple[float, float, Optional[float]]:
    """Wald's expected-sample-size approximation for an SPRT.

    Returns (E(N|H0), E(N|H1), E(N)); the mixture is None unless a prior is
    given. Values are floored at one observation.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("alpha and beta must be in (0, 1)")
    log_a = math.log((1.0 - alpha) / beta)
    log_b = math.log((1.0 - beta) / alpha)
    d01 = kl_divergence(pair, "0||1")
    d10 = kl_divergence(pair, "1||0")
    en_h0 = max(1.0, ((1.0 - alpha) * log_a - alpha * log_b) / d01)
    en_h1 = max(1.0, ((1.0 - beta) * log_b - beta * log_a) / d10)
    en = None if pi is None else pi * en_h1 + (1.0 - pi) * en_h0
    return en_h0, en_h1, en


def expected_sample_sizes_composite(
    space: CompositeSpace,
    b0: float,
    b1: float,
    design_thetas: tuple[float, float],
) -> tuple[float, float]:
    """Asymptotic expected sample sizes of a composite test.

    Point priors are placed at design_thetas = (theta_lo, theta_hi): under H0
    the test ends by rejecting H1 at rate D(theta_lo || theta1), under H1 by
    rejecting H0 at rate D(theta_hi || theta0).
    """
    theta_lo, theta_hi = design_thetas
    if theta_lo > space.theta0 or theta_hi < space.theta1:
        raise ValueError(
            "design thetas must lie outside the indifference region: need "
            f"theta_lo <= {space.theta0} and theta_hi >= {space.theta1}, "
            f"got ({theta_lo}, {theta_hi})"
        )
    if b0 < 0.0 or b1 < 0.0:
        raise ValueError("boundaries must be nonnegative")
    if b0 == 0.0 or b1 == 0.0:
        warnings.warn("zero boundary gives a degenerate expected sample size of 0",
                      stacklevel=2)
    en_h0 = b1 / kl_to_boundary(space.family, theta_lo, space.theta1, space.aux)
    en_h1 = b0 / kl_to_boundary(space.family, theta_hi, space.theta0, space.aux)
    return en_h0, en_h1


def compute_index(profile: ComponentProfile, rule: PolicyRule) -> float:
    """Scheduling index of one component under an index rule."""
    if rule is PolicyRule.PICN:
        denom = profile.en
    elif rule is PolicyRule.PICN0:
        denom = profile.en_h0
    else:
        raise ValueError(f"no index is defined for rule {rule!r}")
    if denom <= 0.0:
        raise ValueError(f"nonpositive expected sample size {denom} for id={profile.id}")
    return profile.pi * profile.cost / denom


def order_components(
    profiles: Sequence[ComponentProfile],
    rule: PolicyRule,
    rng: Optional[np.random.Generator] = None,
) -> Ordering:
    """Produce a probing order under a policy rule.

    Index rules sort by decreasing index with ties broken by ascending
    component id; FIXED keeps the given sequence; RANDOM draws a uniform
    permutation from the supplied generator.
    """
    if not profiles:
        raise ValueError("profiles must be nonempty")
    ids = [p.id for p in profiles]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate component ids in profiles")
    if rule is PolicyRule.FIXED:
        return Ordering(tuple(ids))
    if rule is PolicyRule.RANDOM:
        if rng is None:
            raise ValueError("RANDOM rule requires a random generator")
        return Ordering(tuple(ids[i] for i in rng.permutation(len(ids))))
    ranked = sorted(profiles, key=lambda p: (-compute_index(p, rule), p.id))
    return Ordering(tuple(p.id for p in ranked))


def _check_ordering(
    profiles: Sequence[ComponentProfile], ordering: Ordering
) -> list[ComponentProfile]:
    by_id = {p.id: p for p in profiles}
    if set(ordering.sequence) != set(by_id) or len(ordering) != len(profiles):
        raise ValueError("ordering is not a permutation of the profile ids")
    return [by_id[i] for i in ordering]


def _check_exclusive_priors(profiles: Sequence[ComponentProfile]) -> None:
    total = sum(p.pi for p in profiles)
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"exclusive model requires priors summing to 1, got {total}")


def analytic_expected_cost(
    profiles: Sequence[ComponentProfile],
    ordering: Ordering,
    model: AnomalyModel,
) -> float:
    """Exact expected total cost of probing in the given order (one probe slot).

    Every component contributes its prior-weighted cost rate times the
    expected time until its own test ends: the expected sample sizes of all
    components probed before it plus its own abnormal-conditioned sample
    size. Under the exclusive model the preceding components are necessarily
    normal, so their H0-conditioned sizes apply.
    """
    seq = _check_ordering(profiles, ordering)
    if model is AnomalyModel.EXCLUSIVE:
        _check_exclusive_priors(profiles)
    total = 0.0
    prefix = 0.0
    for p in seq:
        total += p.pi * p.cost * (prefix + p.en_h1)
        prefix += p.en_h0 if model is AnomalyModel.EXCLUSIVE else p.en
    return total


def mean_cost_over_random_orders(
    profiles: Sequence[ComponentProfile], model: AnomalyModel
) -> float:
    """Exact expected cost of a uniformly random probing order.

    By linearity each other component precedes a given one with probability
    one half, so the pairwise prefix terms average accordingly.
    """
    if model is AnomalyModel.EXCLUSIVE:
        _check_exclusive_priors(profiles)
    total = 0.0
    for k, p in enumerate(profiles):
        total += p.pi * p.cost * p.en_h1
        for j, q in enumerate(profiles):
            if j == k:
                continue
            en_before = q.en_h0 if model is AnomalyModel.EXCLUSIVE else q.en
            total += 0.5 * p.pi * p.cost * en_before
    return total


def exhaustive_best_order(
    profiles: Sequence[ComponentProfile], model: AnomalyModel
) -> tuple[Ordering, float]:
    """Brute-force minimum of the analytic cost over all K! orders.

    Ties resolve to the lexicographically smallest id sequence. Refuses
    K > 10 where the enumeration is no longer sensible.
    """
    k = len(profiles)
    if k == 0:
        raise ValueError("profiles must be nonempty")
    if k > EXHAUSTIVE_MAX_K:
        raise ValueError(
            f"exhaustive search over {k}! orders refused (max K={EXHAUSTIVE_MAX_K}); "
            "use an index rule instead"
        )
    if model is AnomalyModel.EXCLUSIVE:
        _check_exclusive_priors(profiles)
    by_id = {p.id: p for p in profiles}
    ids = sorted(by_id)
    exclusive = model is AnomalyModel.EXCLUSIVE
    best_seq: tuple[int, ...] = ()
    best_cost = math.inf
    for perm in itertools.permutations(ids):
        total = 0.0
        prefix = 0.0
        for i in perm:
            p = by_id[i]
            total += p.pi * p.cost * (prefix + p.en_h1)
            prefix += p.en_h0 if exclusive else p.en
        if total < best_cost:
            best_cost = total
            best_seq = perm
    return Ordering(best_seq), best_cost
