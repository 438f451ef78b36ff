"""Pure-Python trial kernels.

Each kernel runs one sequential test to completion, drawing observations
from the supplied generator in fixed-size blocks. The compiled extension
mirrors these loops operation for operation (and shares ``draw_block``), so
both backends consume the random stream identically and return bit-identical
results; see tests/test_kernel_parity.py.

Family codes: 0 Poisson, 1 Gaussian (known variance), 2 Bernoulli.
Decisions: 1 abnormal, 0 normal, -1 truncated by the sample cap.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

POISSON = 0
GAUSSIAN = 1
BERNOULLI = 2

_BLOCK_SIZES = (16, 32, 64, 128, 256)


def block_size(refill: int) -> int:
    """Observation block size for the given refill count (grows, then caps)."""
    if refill < len(_BLOCK_SIZES):
        return _BLOCK_SIZES[refill]
    return _BLOCK_SIZES[-1]


def draw_block(gen: np.random.Generator, family: int, theta: float, aux: float,
               size: int) -> np.ndarray:
    """Draw ``size`` i.i.d. observations as float64 (shared by both backends)."""
    if family == POISSON:
        return gen.poisson(theta, size).astype(np.float64)
    if family == GAUSSIAN:
        return gen.normal(theta, math.sqrt(aux), size)
    if family == BERNOULLI:
        return (gen.random(size) < theta).astype(np.float64)
    raise ValueError(f"unknown family code {family}")


def run_sprt_trial(gen, family, true_theta, aux, theta0, theta1,
                   log_lower, log_upper, max_n=0, collect=False):
    """One SPRT on observations from ``true_theta``; returns (dec, n, llr, obs)."""
    log = math.log
    if family == POISSON:
        log_ratio = log(theta1 / theta0)
        delta = theta1 - theta0
    elif family == GAUSSIAN:
        slope = (theta1 - theta0) / aux
        mid = 0.5 * (theta0 + theta1)
    elif family == BERNOULLI:
        inc1 = log(theta1 / theta0)
        inc0 = log((1.0 - theta1) / (1.0 - theta0))
    else:
        raise ValueError(f"unknown family code {family}")
    llr = 0.0
    n = 0
    refill = 0
    obs = [] if collect else None
    while True:
        block = draw_block(gen, family, true_theta, aux, block_size(refill))
        refill += 1
        for y in block:
            yd = float(y)
            n += 1
            if collect:
                obs.append(yd)
            if family == POISSON:
                llr += yd * log_ratio - delta
            elif family == GAUSSIAN:
                llr += slope * (yd - mid)
            else:
                llr += inc1 if yd == 1.0 else inc0
            if llr >= log_upper:
                return 1, n, llr, obs
            if llr <= log_lower:
                return 0, n, llr, obs
            if max_n and n >= max_n:
                return -1, n, llr, obs


def _core_sum(family, n, s, ss, theta, log_theta, log_comp, aux):
    # Sum of normalization-free log densities over a batch with sufficient
    # statistics (n, s, ss); log_theta/log_comp are precomputed logs.
    if family == POISSON:
        return s * log_theta - n * theta
    if family == GAUSSIAN:
        return -(ss - 2.0 * theta * s + n * theta * theta) / (2.0 * aux)
    return s * log_theta + (n - s) * log_comp


def run_composite_trial(gen, family, true_theta, aux, theta0, theta1,
                        theta_min, theta_max, adaptive, theta_init,
                        b0, b1, time_varying, cost_c, max_n=0, collect=False):
    """One SGLRT (adaptive=0) or SALRT (adaptive=1) trial.

    Returns (dec, n, stat, obs) where stat is the statistic that crossed.
    """
    log = math.log
    if family not in (POISSON, GAUSSIAN, BERNOULLI):
        raise ValueError(f"unknown family code {family}")
    # Gaussian thetas may be nonpositive; its cores never use these logs.
    log_t0 = log(theta0) if family != GAUSSIAN else 0.0
    log_t1 = log(theta1) if family != GAUSSIAN else 0.0
    if family == BERNOULLI:
        log_c0 = log(1.0 - theta0)
        log_c1 = log(1.0 - theta1)
    else:
        log_c0 = 0.0
        log_c1 = 0.0
    n = 0
    s = 0.0
    ss = 0.0
    u = 0.0
    est = theta_init
    refill = 0
    obs = [] if collect else None
    while True:
        block = draw_block(gen, family, true_theta, aux, block_size(refill))
        refill += 1
        for y in block:
            yd = float(y)
            n += 1
            if collect:
                obs.append(yd)
            if adaptive:
                # Score the new observation with the one-step-delayed estimate.
                if family == POISSON:
                    u += yd * log(est) - est
                elif family == GAUSSIAN:
                    d = yd - est
                    u += -(d * d) / (2.0 * aux)
                else:
                    u += log(est) if yd == 1.0 else log(1.0 - est)
            s += yd
            if family == GAUSSIAN:
                ss += yd * yd
            mean = s / n
            est = theta_min if mean < theta_min else (theta_max if mean > theta_max else mean)
            if adaptive:
                num = u
            else:
                num = _core_sum(family, n, s, ss, est,
                                log(est) if family != GAUSSIAN else 0.0,
                                log(1.0 - est) if family == BERNOULLI else 0.0, aux)
            l0 = num - _core_sum(family, n, s, ss, theta0, log_t0, log_c0, aux)
            l1 = num - _core_sum(family, n, s, ss, theta1, log_t1, log_c1, aux)
            if time_varying:
                b = log(1.0 / (n * cost_c))
                if b < 0.0:
                    b = 0.0
                b0n = b
                b1n = b
            else:
                b0n = b0
                b1n = b1
            cross0 = l0 >= b0n
            cross1 = l1 >= b1n
            if cross0 and cross1:
                if l0 - b0n >= l1 - b1n:
                    return 1, n, l0, obs
                return 0, n, l1, obs
            if cross0:
                return 1, n, l0, obs
            if cross1:
                return 0, n, l1, obs
            if max_n and n >= max_n:
                return -1, n, 0.0, obs
