"""seqprobe: index-policy scheduling of sequential hypothesis tests.

A library plus CLI for localizing anomalous components in a resource
constrained system: each component gets a sequential test (SPRT for known
simple hypotheses, GLR/adaptive tests for composite ones), and components
are probed in the order given by closed-form priority indices. A Monte
Carlo engine with analytic cost oracles reproduces the cost and sample-size
experiments.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .models import (
    CompositeSpace,
    Family,
    HypothesisPair,
    ObservationModel,
    batch_llr,
    kl_divergence,
    kl_to_boundary,
    llr_increment,
)
from .ordering import (
    AnomalyModel,
    ComponentProfile,
    Ordering,
    PolicyRule,
    analytic_expected_cost,
    compute_index,
    exhaustive_best_order,
    expected_sample_sizes_composite,
    expected_sample_sizes_simple,
    mean_cost_over_random_orders,
    order_components,
)
from .sequential import (
    CompositeTestConfig,
    SprtConfig,
    TestState,
    TestVerdict,
    TruncationError,
    alr_statistics_step,
    glr_statistics,
    run_composite_test,
    run_sprt,
    sprt_step,
    wald_boundaries,
)
from .engine import (
    AggregateReport,
    ComponentSpec,
    GroundTruth,
    SprtTest,
    TrialRecord,
    belief_update_exclusive,
    belief_update_independent,
    draw_ground_truth,
    exhaustive_search_monte_carlo,
    run_monte_carlo,
    run_single_test_monte_carlo,
    run_trial,
)
from .experiments import (
    ConfigError,
    emit_csv,
    parse_config,
    run_experiment,
    write_sidecar,
)

__all__ = [
    "__version__",
    "BACKEND",
    # models
    "Family", "ObservationModel", "HypothesisPair", "CompositeSpace",
    "llr_increment", "batch_llr", "kl_divergence", "kl_to_boundary",
    # sequential tests
    "SprtConfig", "CompositeTestConfig", "TestState", "TestVerdict",
    "TruncationError", "wald_boundaries", "sprt_step", "run_sprt",
    "glr_statistics", "alr_statistics_step", "run_composite_test",
    # ordering
    "AnomalyModel", "PolicyRule", "ComponentProfile", "Ordering",
    "expected_sample_sizes_simple", "expected_sample_sizes_composite",
    "compute_index", "order_components", "analytic_expected_cost",
    "mean_cost_over_random_orders", "exhaustive_best_order",
    # engine
    "ComponentSpec", "SprtTest", "GroundTruth", "TrialRecord",
    "AggregateReport", "draw_ground_truth", "run_trial",
    "belief_update_independent", "belief_update_exclusive",
    "run_monte_carlo", "run_single_test_monte_carlo",
    "exhaustive_search_monte_carlo",
    # experiments
    "ConfigError", "parse_config", "run_experiment", "emit_csv",
    "write_sidecar",
]
