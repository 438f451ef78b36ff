#!/usr/bin/env python3
"""Benchmark the compiled trial kernels against the pure-Python fallback.

Times three representative workloads on both backends and prints the
speedups. Both backends produce bit-identical results (asserted here on a
sample), so the comparison is purely about throughput.

Usage: python benchmarks/bench_kernels.py [--trials N]
"""

import argparse
import math
import time

import numpy as np

from seqprobe._kernels import _pykernels as pk

try:
    from seqprobe._kernels import _ckernels as ck
except ImportError:
    ck = None


def gen(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def bench_sprt(kernel, trials):
    lo, up = math.log(1e-2 / 0.99), math.log(0.99 / 1e-2)
    start = time.perf_counter()
    total_obs = 0
    for t in range(trials):
        _dec, n, _llr, _obs = kernel.run_sprt_trial(
            gen(t), pk.POISSON, 10.0, 0.0, 10.0, 15.0, lo, up
        )
        total_obs += n
    return time.perf_counter() - start, total_obs


def bench_composite(kernel, trials, adaptive):
    start = time.perf_counter()
    total_obs = 0
    for t in range(trials):
        _dec, n, _stat, _obs = kernel.run_composite_trial(
            gen(t), pk.POISSON, 20.0, 0.0, 19.0, 21.0, 0.001, 60.0,
            adaptive, 20.0, math.log(1e3), math.log(1e3), 0, 1e-3,
        )
        total_obs += n
    return time.perf_counter() - start, total_obs


def bench_engine(trials):
    from seqprobe.engine import ComponentSpec, SprtTest, run_monte_carlo
    from seqprobe.models import Family, HypothesisPair, ObservationModel
    from seqprobe.ordering import AnomalyModel, PolicyRule
    from seqprobe.sequential import SprtConfig

    specs = []
    for i in range(20):
        theta = 10.0 + i * (90.0 / 19.0)
        pair = HypothesisPair(
            ObservationModel(Family.POISSON, theta),
            ObservationModel(Family.POISSON, 1.5 * theta),
        )
        specs.append(ComponentSpec(
            id=i + 1, pi=0.8, cost=theta, test=SprtTest(pair, SprtConfig(0.01, 1e-6))
        ))
    start = time.perf_counter()
    run_monte_carlo(specs, PolicyRule.PICN, AnomalyModel.INDEPENDENT, 1, trials, 42)
    return time.perf_counter() - start


def check_parity(trials=200):
    lo, up = math.log(1e-2 / 0.99), math.log(0.99 / 1e-2)
    for t in range(trials):
        a = pk.run_sprt_trial(gen(t), pk.POISSON, 12.0, 0.0, 10.0, 15.0, lo, up)
        b = ck.run_sprt_trial(gen(t), pk.POISSON, 12.0, 0.0, 10.0, 15.0, lo, up)
        assert a == b, f"backend mismatch at seed {t}: {a} vs {b}"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20000)
    args = parser.parse_args()

    if ck is None:
        print("compiled backend not built; showing pure-Python timings only")
    else:
        check_parity()
        print("parity check passed (200 trials bit-identical)\n")

    rows = []
    workloads = [
        ("sprt trials (Poisson 10 vs 15)", lambda k: bench_sprt(k, args.trials)),
        ("glr trials (theta=20 in [19,21])", lambda k: bench_composite(k, args.trials, 0)),
        ("adaptive trials (same setting)", lambda k: bench_composite(k, args.trials, 1)),
    ]
    for name, fn in workloads:
        t_py, obs = fn(pk)
        if ck is not None:
            t_c, _ = fn(ck)
            rows.append((name, obs, t_py, t_c, t_py / t_c))
        else:
            rows.append((name, obs, t_py, float("nan"), float("nan")))

    print(f"{'workload':<36} {'obs':>10} {'python':>9} {'compiled':>9} {'speedup':>8}")
    for name, obs, t_py, t_c, speedup in rows:
        print(f"{name:<36} {obs:>10} {t_py:>8.2f}s {t_c:>8.2f}s {speedup:>7.1f}x")

    import os

    print(f"\nend-to-end engine (K=20, {args.trials // 2} trials), current backend "
          f"(SEQPROBE_PURE_PYTHON={os.environ.get('SEQPROBE_PURE_PYTHON', '')!r}):")
    print(f"  {bench_engine(args.trials // 2):.2f}s")


if __name__ == "__main__":
    main()
