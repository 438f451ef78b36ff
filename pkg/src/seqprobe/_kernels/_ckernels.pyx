# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled trial kernels.

Operation-for-operation mirror of _pykernels (same block-draw discipline,
same expression order), compiled with -ffp-contract=off so results are
bit-identical to the pure-Python backend.
"""

from libc.math cimport log

from ._pykernels import block_size, draw_block

BACKEND = "c"

cdef int POISSON = 0
cdef int GAUSSIAN = 1
cdef int BERNOULLI = 2


def run_sprt_trial(object gen, int family, double true_theta, double aux,
                   double theta0, double theta1,
                   double log_lower, double log_upper,
                   long max_n=0, bint collect=False):
    """One SPRT on observations from ``true_theta``; returns (dec, n, llr, obs)."""
    cdef double log_ratio = 0.0, delta = 0.0, slope = 0.0, mid = 0.0
    cdef double inc1 = 0.0, inc0 = 0.0
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
    cdef double llr = 0.0
    cdef double yd
    cdef long n = 0
    cdef int refill = 0
    cdef Py_ssize_t i, m
    cdef double[::1] buf
    obs = [] if collect else None
    while True:
        block = draw_block(gen, family, true_theta, aux, block_size(refill))
        refill += 1
        buf = block
        m = buf.shape[0]
        for i in range(m):
            yd = buf[i]
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


cdef inline double _core_sum(int family, long n, double s, double ss, double theta,
                             double log_theta, double log_comp, double aux):
    if family == POISSON:
        return s * log_theta - n * theta
    if family == GAUSSIAN:
        return -(ss - 2.0 * theta * s + n * theta * theta) / (2.0 * aux)
    return s * log_theta + (n - s) * log_comp


def run_composite_trial(object gen, int family, double true_theta, double aux,
                        double theta0, double theta1,
                        double theta_min, double theta_max,
                        bint adaptive, double theta_init,
                        double b0, double b1, bint time_varying, double cost_c,
                        long max_n=0, bint collect=False):
    """One SGLRT (adaptive=0) or SALRT (adaptive=1) trial.

    Returns (dec, n, stat, obs) where stat is the statistic that crossed.
    """
    if family != POISSON and family != GAUSSIAN and family != BERNOULLI:
        raise ValueError(f"unknown family code {family}")
    # Gaussian thetas may be nonpositive; its cores never use these logs.
    cdef double log_t0 = log(theta0) if family != GAUSSIAN else 0.0
    cdef double log_t1 = log(theta1) if family != GAUSSIAN else 0.0
    cdef double log_c0 = 0.0, log_c1 = 0.0
    if family == BERNOULLI:
        log_c0 = log(1.0 - theta0)
        log_c1 = log(1.0 - theta1)
    cdef long n = 0
    cdef double s = 0.0, ss = 0.0, u = 0.0
    cdef double est = theta_init
    cdef int refill = 0
    cdef double yd, d, mean, num, l0, l1, b, b0n, b1n
    cdef bint cross0, cross1
    cdef Py_ssize_t i, m
    cdef double[::1] buf
    obs = [] if collect else None
    while True:
        block = draw_block(gen, family, true_theta, aux, block_size(refill))
        refill += 1
        buf = block
        m = buf.shape[0]
        for i in range(m):
            yd = buf[i]
            n += 1
            if collect:
                obs.append(yd)
            if adaptive:
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
