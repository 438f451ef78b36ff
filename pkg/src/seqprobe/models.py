"""Observation distributions for sequential anomaly tests.

Three scalar one-parameter families are supported: Poisson (rate), Gaussian
with known variance (mean) and Bernoulli (success probability). Each model
exposes an exact log density, sampling, log-likelihood-ratio increments and
closed-form KL divergences; these are the raw ingredients of every
sequential test in this package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Literal

import numpy as np

__all__ = [
    "Family",
    "ObservationModel",
    "HypothesisPair",
    "CompositeSpace",
    "llr_increment",
    "batch_llr",
    "kl_divergence",
    "kl_to_boundary",
]


class Family(str, Enum):
    POISSON = "poisson"
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


def _validate_theta(family: Family, theta: float, aux: float) -> None:
    if family is Family.POISSON:
        if theta <= 0.0:
            raise ValueError(f"Poisson rate must be positive, got {theta}")
    elif family is Family.BERNOULLI:
        if not 0.0 < theta < 1.0:
            raise ValueError(f"Bernoulli probability must be in (0, 1), got {theta}")
    elif family is Family.GAUSSIAN:
        if aux <= 0.0:
            raise ValueError(f"Gaussian variance must be positive, got {aux}")
    else:  # pragma: no cover - exhaustive enum
        raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class ObservationModel:
    """A sampling distribution f(y | theta).

    ``aux`` carries the known variance for the Gaussian family and is unused
    otherwise.
    """

    family: Family
    theta: float
    aux: float = 0.0

    def __post_init__(self) -> None:
        _validate_theta(self.family, self.theta, self.aux)

    def log_density(self, y: float) -> float:
        """Exact log f(y | theta); raises ValueError for y outside support."""
        if self.family is Family.POISSON:
            if y < 0 or y != math.floor(y):
                raise ValueError(f"Poisson support is the nonnegative integers, got {y}")
            return -self.theta + y * math.log(self.theta) - math.lgamma(y + 1.0)
        if self.family is Family.GAUSSIAN:
            d = y - self.theta
            return -0.5 * math.log(2.0 * math.pi * self.aux) - d * d / (2.0 * self.aux)
        # Bernoulli
        if y == 1:
            return math.log(self.theta)
        if y == 0:
            return math.log(1.0 - self.theta)
        raise ValueError(f"Bernoulli support is {{0, 1}}, got {y}")

    def sample(self, rng: np.random.Generator) -> float:
        """One i.i.d. draw; deterministic given the generator state."""
        if self.family is Family.POISSON:
            return float(rng.poisson(self.theta))
        if self.family is Family.GAUSSIAN:
            return float(rng.normal(self.theta, math.sqrt(self.aux)))
        return 1.0 if rng.random() < self.theta else 0.0

    def sample_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """``size`` i.i.d. draws as a float64 array."""
        if self.family is Family.POISSON:
            return rng.poisson(self.theta, size).astype(np.float64)
        if self.family is Family.GAUSSIAN:
            return rng.normal(self.theta, math.sqrt(self.aux), size)
        return (rng.random(size) < self.theta).astype(np.float64)


@dataclass(frozen=True)
class HypothesisPair:
    """A simple binary hypothesis: h0 (normal) versus h1 (abnormal)."""

    h0: ObservationModel
    h1: ObservationModel

    def __post_init__(self) -> None:
        if self.h0.family is not self.h1.family:
            raise ValueError("both hypotheses must use the same family")
        if self.h0.aux != self.h1.aux:
            raise ValueError("both hypotheses must share the same aux parameter")
        if self.h0.theta == self.h1.theta:
            raise ValueError("degenerate pair: h0 and h1 have identical parameters")

    @property
    def family(self) -> Family:
        return self.h0.family

    def swapped(self) -> "HypothesisPair":
        return HypothesisPair(h0=self.h1, h1=self.h0)


@dataclass(frozen=True)
class CompositeSpace:
    """One-sided composite hypotheses with an indifference region.

    The parameter space is [theta_min, theta_max]; values at or below theta0
    are normal, values at or above theta1 are abnormal, and the open interval
    (theta0, theta1) carries no error constraint.
    """

    family: Family
    theta0: float
    theta1: float
    theta_min: float
    theta_max: float
    aux: float = 0.0

    def __post_init__(self) -> None:
        if not self.theta_min < self.theta0 < self.theta1 < self.theta_max:
            raise ValueError(
                "need theta_min < theta0 < theta1 < theta_max, got "
                f"({self.theta_min}, {self.theta0}, {self.theta1}, {self.theta_max})"
            )
        _validate_theta(self.family, self.theta_min, self.aux)
        _validate_theta(self.family, self.theta_max, self.aux)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.theta0 + self.theta1)

    def clamp(self, theta: float) -> float:
        """Restrict an estimate to the parameter space."""
        return min(max(theta, self.theta_min), self.theta_max)

    def model(self, theta: float) -> ObservationModel:
        return ObservationModel(self.family, theta, self.aux)


def llr_increment(pair: HypothesisPair, y: float) -> float:
    """log f1(y) - log f0(y): one term of the running log-likelihood ratio."""
    return pair.h1.log_density(y) - pair.h0.log_density(y)


def batch_llr(pair: HypothesisPair, ys: np.ndarray) -> float:
    """Log-likelihood ratio of an observation batch.

    Uses the per-family sufficient statistics; the data-dependent
    normalization constants are common to both hypotheses and cancel.
    """
    ys = np.asarray(ys, dtype=np.float64)
    n = ys.size
    s = float(ys.sum())
    t0, t1 = pair.h0.theta, pair.h1.theta
    if pair.family is Family.POISSON:
        return -n * (t1 - t0) + math.log(t1 / t0) * s
    if pair.family is Family.GAUSSIAN:
        v = pair.h0.aux
        ss = float((ys * ys).sum())
        def neg_quad(theta: float) -> float:
            return -(ss - 2.0 * theta * s + n * theta * theta) / (2.0 * v)
        return neg_quad(t1) - neg_quad(t0)
    # Bernoulli
    return s * math.log(t1 / t0) + (n - s) * math.log((1.0 - t1) / (1.0 - t0))


Direction = Literal["0||1", "1||0"]


def kl_divergence(pair: HypothesisPair, direction: Direction = "0||1") -> float:
    """KL divergence D(i || j) between the two hypotheses of a pair."""
    if direction == "0||1":
        ti, tj = pair.h0.theta, pair.h1.theta
    elif direction == "1||0":
        ti, tj = pair.h1.theta, pair.h0.theta
    else:
        raise ValueError(f"direction must be '0||1' or '1||0', got {direction!r}")
    return _kl(pair.family, ti, tj, pair.h0.aux)


def _kl(family: Family, ti: float, tj: float, aux: float) -> float:
    if family is Family.POISSON:
        return tj - ti + ti * math.log(ti / tj)
    if family is Family.GAUSSIAN:
        d = ti - tj
        return d * d / (2.0 * aux)
    return ti * math.log(ti / tj) + (1.0 - ti) * math.log((1.0 - ti) / (1.0 - tj))


def kl_to_boundary(
    family: Family, theta_true: float, theta_boundary: float, aux: float = 0.0
) -> float:
    """KL divergence from the true parameter to a one-sided space boundary.

    For scalar exponential families the divergence to a one-sided set is
    attained at the boundary point, so this is D(theta_true || theta_boundary).
    """
    if theta_true == theta_boundary:
        raise ValueError("theta_true must differ from theta_boundary")
    _validate_theta(family, theta_true, aux)
    _validate_theta(family, theta_boundary, aux)
    return _kl(family, theta_true, theta_boundary, aux)
