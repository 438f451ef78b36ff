"""Fast self-check suites behind the ``verify`` CLI subcommand.

These are cheap spot checks (analytic permutation oracles plus small Monte
Carlo error-bound runs), not the full acceptance suite in tests/.
"""

from __future__ import annotations

import sys
from typing import TextIO

import numpy as np

from .engine import SprtTest, run_single_test_monte_carlo
from .models import Family, HypothesisPair, ObservationModel
from .ordering import (
    AnomalyModel,
    ComponentProfile,
    PolicyRule,
    analytic_expected_cost,
    exhaustive_best_order,
    order_components,
)
from .sequential import SprtConfig


def random_profiles(rng: np.random.Generator, k: int, exclusive: bool) -> list[ComponentProfile]:
    pis = rng.dirichlet(np.ones(k)) if exclusive else rng.uniform(0.05, 0.95, k)
    costs = rng.uniform(0.1, 10.0, k)
    en_h0 = rng.uniform(1.0, 50.0, k)
    en_h1 = rng.uniform(1.0, 50.0, k)
    return [
        ComponentProfile.from_conditional(i + 1, float(pis[i]), float(costs[i]),
                                          float(en_h0[i]), float(en_h1[i]))
        for i in range(k)
    ]


def check_permutation_oracle(model: AnomalyModel, sets: int, seed: int) -> tuple[bool, str]:
    """Index-rule cost must equal the brute-force minimum on random profiles."""
    rng = np.random.default_rng(seed)
    rule = PolicyRule.PICN if model is AnomalyModel.INDEPENDENT else PolicyRule.PICN0
    worst = 0.0
    for i in range(sets):
        k = 2 + i % 5
        profiles = random_profiles(rng, k, model is AnomalyModel.EXCLUSIVE)
        ordering = order_components(profiles, rule)
        cost = analytic_expected_cost(profiles, ordering, model)
        _best, best_cost = exhaustive_best_order(profiles, model)
        worst = max(worst, abs(cost - best_cost))
    ok = worst <= 1e-12
    return ok, f"{sets} profile sets, max |index cost - exhaustive min| = {worst:.3e}"


def check_sprt_error_bounds(trials: int, seed: int) -> tuple[bool, str]:
    """Empirical SPRT error rates must respect the boundary guarantees."""
    alpha = beta = 1e-2
    pair = HypothesisPair(ObservationModel(Family.POISSON, 10.0),
                          ObservationModel(Family.POISSON, 15.0))
    test = SprtTest(pair, SprtConfig(alpha, beta))
    under_h0 = run_single_test_monte_carlo(test, 10.0, trials, seed, stream_key=(9, 0))
    under_h1 = run_single_test_monte_carlo(test, 15.0, trials, seed, stream_key=(9, 1))
    p_fa = under_h0.frac_abnormal
    p_md = 1.0 - under_h1.frac_abnormal
    fa_bound = alpha / (1.0 - beta) + 3.0 * under_h0.stderr_frac
    md_bound = beta / (1.0 - alpha) + 3.0 * under_h1.stderr_frac
    ok = p_fa <= fa_bound and p_md <= md_bound
    return ok, (f"P_FA={p_fa:.5f} (bound {fa_bound:.5f}), "
                f"P_MD={p_md:.5f} (bound {md_bound:.5f}), {trials} trials/hyp")


def run_verification(seed: int, trials: int, out: TextIO = sys.stdout) -> bool:
    checks = [
        ("ordering-oracle-independent",
         lambda: check_permutation_oracle(AnomalyModel.INDEPENDENT, 60, seed)),
        ("ordering-oracle-exclusive",
         lambda: check_permutation_oracle(AnomalyModel.EXCLUSIVE, 60, seed + 1)),
        ("sprt-error-bounds", lambda: check_sprt_error_bounds(trials, seed)),
    ]
    all_ok = True
    for name, fn in checks:
        ok, detail = fn()
        all_ok &= ok
        out.write(f"{'PASS' if ok else 'FAIL'} {name}: {detail}\n")
    return all_ok
