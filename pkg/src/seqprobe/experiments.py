"""Configuration-driven experiments and machine-readable results.

A config file (JSON) describes either a multi-component cost experiment
(anomaly model, component generator, probing policies, error targets, probe
slots) or a single-component sweep of mean sample size against the true
parameter. Experiments expand an optional sweep, run the Monte Carlo engine
per (sweep point, policy) and emit one CSV per experiment plus a JSON
sidecar carrying the config hash, seed and library version.

All randomness flows from the config seed; reruns produce byte-identical
CSV files.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Union

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .engine import (
    ComponentSpec,
    SprtTest,
    exhaustive_search_monte_carlo,
    profile_for_spec,
    run_monte_carlo,
    run_single_test_monte_carlo,
)
from .models import CompositeSpace, Family, HypothesisPair, ObservationModel
from .ordering import (
    AnomalyModel,
    Ordering,
    PolicyRule,
    analytic_expected_cost,
    compute_index,
    mean_cost_over_random_orders,
    order_components,
)
from .sequential import CompositeTestConfig, SprtConfig

__all__ = [
    "ConfigError",
    "CostExperiment",
    "ThetaSweepExperiment",
    "ExperimentConfig",
    "parse_config",
    "parse_config_data",
    "build_specs",
    "run_experiment",
    "ResultTable",
    "emit_csv",
    "write_sidecar",
    "config_hash",
]

MAX_EXHAUSTIVE_K = 10


class ConfigError(ValueError):
    """A config file failed validation; the message names the bad field."""


def _require(data: dict, key: str, kind, source: str):
    if key not in data:
        raise ConfigError(f"{source}: missing required field '{key}'")
    value = data[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigError(
            f"{source}: field '{key}' must be {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _reject_unknown(data: dict, allowed: set[str], source: str) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{source}: unknown field(s) {sorted(unknown)}")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple[Any, ...]


@dataclass(frozen=True)
class ComponentGenerator:
    """Either an equally-spaced-cost Poisson bank or an explicit item list."""

    generator: str
    c_min: float = 0.0
    c_max: float = 0.0
    pi: Union[float, str] = 0.0
    theta1_factor: float = 0.0
    items: tuple[dict, ...] = ()


@dataclass(frozen=True)
class CostExperiment:
    name: str
    kind: str
    model: AnomalyModel
    K: int
    num_probes: int
    policies: tuple[PolicyRule, ...]
    test: str
    components: ComponentGenerator
    trials: int
    seed: int
    early_stop: bool
    alpha: float = 0.0
    beta: float = 0.0
    cost_per_obs: float = 0.0
    sglrt_schedule: str = "fixed"
    sweep: Optional[SweepSpec] = None


@dataclass(frozen=True)
class ThetaSweepExperiment:
    name: str
    kind: str
    family: Family
    theta0: float
    theta1: float
    theta_min: float
    theta_max: float
    aux: float
    tests: tuple[str, ...]
    alpha: float
    beta: float
    cost_per_obs: float
    sglrt_schedule: str
    trials: int
    seed: int
    theta_true: Optional[float] = None
    sweep: Optional[SweepSpec] = None


ExperimentConfig = Union[CostExperiment, ThetaSweepExperiment]

_COST_KEYS = {
    "name", "kind", "model", "K", "num_probes", "policies", "test", "components",
    "alpha", "beta", "cost_per_obs", "sglrt_schedule", "trials", "seed",
    "early_stop", "sweep",
}
_THETA_KEYS = {
    "name", "kind", "family", "theta0", "theta1", "theta_min", "theta_max", "aux",
    "tests", "alpha", "beta", "cost_per_obs", "sglrt_schedule", "trials", "seed",
    "theta_true", "sweep",
}
_GENERATOR_KEYS = {"generator", "c_min", "c_max", "pi", "theta1_factor", "items"}
_COST_SWEEP_VARS = {"K", "c_min"}


def parse_config(path: str) -> ExperimentConfig:
    """Load and validate an experiment config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config_data(data, source=path)


def parse_config_data(data: Any, source: str = "<config>") -> ExperimentConfig:
    """Validate an already-loaded config dictionary."""
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: config must be a JSON object")
    kind = _require(data, "kind", str, source)
    if "seed" not in data:
        raise ConfigError(
            f"{source}: missing required field 'seed' (experiments never use "
            "wall-clock entropy; pick one explicitly)"
        )
    if kind == "cost":
        return _parse_cost(data, source)
    if kind == "theta-sweep":
        return _parse_theta(data, source)
    raise ConfigError(f"{source}: field 'kind' must be 'cost' or 'theta-sweep', got {kind!r}")


def _parse_sweep(data: dict, source: str, allowed_vars: set[str]) -> Optional[SweepSpec]:
    raw = data.get("sweep")
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: field 'sweep' must be an object")
    _reject_unknown(raw, {"variable", "values"}, f"{source}: sweep")
    variable = _require(raw, "variable", str, f"{source}: sweep")
    values = _require(raw, "values", list, f"{source}: sweep")
    if variable not in allowed_vars:
        raise ConfigError(
            f"{source}: sweep variable must be one of {sorted(allowed_vars)}, got {variable!r}"
        )
    if not values:
        return SweepSpec(variable, ())
    return SweepSpec(variable, tuple(values))


def _parse_cost(data: dict, source: str) -> CostExperiment:
    _reject_unknown(data, _COST_KEYS, source)
    model = _require(data, "model", str, source)
    if model not in ("independent", "exclusive"):
        raise ConfigError(f"{source}: model must be 'independent' or 'exclusive'")
    k = _require(data, "K", int, source)
    if k < 1:
        raise ConfigError(f"{source}: K must be >= 1, got {k}")
    num_probes = data.get("num_probes", 1)
    if not isinstance(num_probes, int) or num_probes < 1:
        raise ConfigError(f"{source}: num_probes must be an integer >= 1")
    if num_probes > k:
        raise ConfigError(f"{source}: num_probes={num_probes} exceeds K={k}")
    raw_policies = _require(data, "policies", list, source)
    policies = []
    for p in raw_policies:
        if p == "exhaustive":
            policies.append(p)
            continue
        try:
            policies.append(PolicyRule(p))
        except ValueError:
            raise ConfigError(
                f"{source}: unknown policy {p!r} (expected picn, picn0, random, "
                "fixed or exhaustive)"
            ) from None
    if not policies:
        raise ConfigError(f"{source}: policies must be nonempty")
    if "exhaustive" in raw_policies and k > MAX_EXHAUSTIVE_K:
        raise ConfigError(
            f"{source}: exhaustive policy needs K <= {MAX_EXHAUSTIVE_K}, got {k}"
        )
    test = data.get("test", "sprt")
    if test not in ("sprt", "sglrt", "salrt"):
        raise ConfigError(f"{source}: test must be sprt, sglrt or salrt")
    comp_raw = _require(data, "components", dict, source)
    _reject_unknown(comp_raw, _GENERATOR_KEYS, f"{source}: components")
    gen_kind = _require(comp_raw, "generator", str, f"{source}: components")
    if gen_kind == "equally-spaced-costs":
        if test != "sprt":
            raise ConfigError(
                f"{source}: the equally-spaced-costs generator only supports "
                "test='sprt'; use explicit components for composite tests"
            )
        c_min = _require(comp_raw, "c_min", float, f"{source}: components")
        c_max = _require(comp_raw, "c_max", float, f"{source}: components")
        if not 0.0 < c_min <= c_max:
            raise ConfigError(f"{source}: need 0 < c_min <= c_max")
        pi = comp_raw.get("pi", "uniform")
        if isinstance(pi, str):
            if pi != "uniform":
                raise ConfigError(f"{source}: pi must be a number or 'uniform'")
        elif not isinstance(pi, (int, float)) or not 0.0 <= pi <= 1.0:
            raise ConfigError(f"{source}: pi must lie in [0, 1]")
        factor = comp_raw.get("theta1_factor", 1.5)
        if not isinstance(factor, (int, float)) or factor <= 0 or factor == 1.0:
            raise ConfigError(f"{source}: theta1_factor must be positive and != 1")
        generator = ComponentGenerator(
            "equally-spaced-costs", c_min=float(c_min), c_max=float(c_max),
            pi=pi, theta1_factor=float(factor),
        )
    elif gen_kind == "explicit":
        items = _require(comp_raw, "items", list, f"{source}: components")
        if len(items) != k:
            raise ConfigError(
                f"{source}: components.items has {len(items)} entries but K={k}"
            )
        generator = ComponentGenerator("explicit", items=tuple(items))
    else:
        raise ConfigError(
            f"{source}: components.generator must be 'equally-spaced-costs' or 'explicit'"
        )
    alpha = float(data.get("alpha", 0.0))
    beta = float(data.get("beta", 0.0))
    cost_per_obs = float(data.get("cost_per_obs", 0.0))
    if test in ("sprt", "salrt"):
        if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
            raise ConfigError(f"{source}: test '{test}' requires alpha, beta in (0, 1)")
    if test == "sglrt" and cost_per_obs <= 0.0:
        raise ConfigError(f"{source}: test 'sglrt' requires cost_per_obs > 0")
    schedule = data.get("sglrt_schedule", "fixed")
    if schedule not in ("fixed", "time-varying"):
        raise ConfigError(f"{source}: sglrt_schedule must be 'fixed' or 'time-varying'")
    trials = _require(data, "trials", int, source)
    if trials < 1:
        raise ConfigError(f"{source}: trials must be >= 1")
    seed = _require(data, "seed", int, source)
    early_stop = data.get("early_stop", False)
    if not isinstance(early_stop, bool):
        raise ConfigError(f"{source}: early_stop must be a boolean")
    if early_stop and model != "exclusive":
        raise ConfigError(f"{source}: early_stop requires the exclusive model")
    sweep = _parse_sweep(data, source, _COST_SWEEP_VARS)
    if sweep is not None and sweep.variable == "c_min" and generator.generator != "equally-spaced-costs":
        raise ConfigError(f"{source}: sweeping c_min requires the equally-spaced-costs generator")
    if sweep is not None and sweep.variable == "K":
        for v in sweep.values:
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{source}: sweep over K needs positive integers")
            if num_probes > v:
                raise ConfigError(f"{source}: num_probes={num_probes} exceeds swept K={v}")
            if "exhaustive" in raw_policies and v > MAX_EXHAUSTIVE_K:
                raise ConfigError(f"{source}: exhaustive policy needs K <= {MAX_EXHAUSTIVE_K}")
    return CostExperiment(
        name=data.get("name", "experiment"),
        kind="cost",
        model=AnomalyModel(model),
        K=k,
        num_probes=num_probes,
        policies=tuple(policies),
        test=test,
        components=generator,
        trials=trials,
        seed=seed,
        early_stop=early_stop,
        alpha=alpha,
        beta=beta,
        cost_per_obs=cost_per_obs,
        sglrt_schedule=schedule,
        sweep=sweep,
    )


def _parse_theta(data: dict, source: str) -> ThetaSweepExperiment:
    _reject_unknown(data, _THETA_KEYS, source)
    family = _require(data, "family", str, source)
    try:
        fam = Family(family)
    except ValueError:
        raise ConfigError(f"{source}: unknown family {family!r}") from None
    theta0 = _require(data, "theta0", float, source)
    theta1 = _require(data, "theta1", float, source)
    theta_min = _require(data, "theta_min", float, source)
    theta_max = _require(data, "theta_max", float, source)
    aux = float(data.get("aux", 0.0))
    raw_tests = _require(data, "tests", list, source)
    for t in raw_tests:
        if t not in ("sprt", "sglrt", "salrt"):
            raise ConfigError(f"{source}: unknown test {t!r}")
    if not raw_tests:
        raise ConfigError(f"{source}: tests must be nonempty")
    alpha = float(data.get("alpha", 0.0))
    beta = float(data.get("beta", 0.0))
    if ("sprt" in raw_tests or "salrt" in raw_tests) and not (
        0.0 < alpha < 1.0 and 0.0 < beta < 1.0
    ):
        raise ConfigError(f"{source}: sprt/salrt tests require alpha, beta in (0, 1)")
    cost_per_obs = float(data.get("cost_per_obs", 0.0))
    if "sglrt" in raw_tests and cost_per_obs <= 0.0:
        raise ConfigError(f"{source}: sglrt requires cost_per_obs > 0")
    schedule = data.get("sglrt_schedule", "fixed")
    if schedule not in ("fixed", "time-varying"):
        raise ConfigError(f"{source}: sglrt_schedule must be 'fixed' or 'time-varying'")
    trials = _require(data, "trials", int, source)
    if trials < 1:
        raise ConfigError(f"{source}: trials must be >= 1")
    seed = _require(data, "seed", int, source)
    sweep = _parse_sweep(data, source, {"theta_true"})
    theta_true = data.get("theta_true")
    if sweep is None and theta_true is None:
        raise ConfigError(
            f"{source}: theta-sweep config needs either a sweep over theta_true "
            "or a single top-level theta_true"
        )
    # Constructing the space validates the parameter ordering.
    try:
        CompositeSpace(fam, theta0, theta1, theta_min, theta_max, aux)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return ThetaSweepExperiment(
        name=data.get("name", "experiment"),
        kind="theta-sweep",
        family=fam,
        theta0=theta0,
        theta1=theta1,
        theta_min=theta_min,
        theta_max=theta_max,
        aux=aux,
        tests=tuple(raw_tests),
        alpha=alpha,
        beta=beta,
        cost_per_obs=cost_per_obs,
        sglrt_schedule=schedule,
        trials=trials,
        seed=seed,
        theta_true=theta_true,
        sweep=sweep,
    )


# --- component construction -------------------------------------------------


def build_specs(cfg: CostExperiment, k: int, c_min: Optional[float] = None) -> list[ComponentSpec]:
    """Materialize component specs for one sweep point."""
    gen = cfg.components
    if gen.generator == "explicit":
        return [_spec_from_item(cfg, item, i) for i, item in enumerate(gen.items)]
    lo = gen.c_min if c_min is None else c_min
    hi = gen.c_max
    if not 0.0 < lo <= hi:
        raise ConfigError(f"need 0 < c_min <= c_max, got ({lo}, {hi})")
    specs = []
    for i in range(k):
        cost = lo + (hi - lo) * i / (k - 1) if k > 1 else lo
        pi = 1.0 / k if gen.pi == "uniform" else float(gen.pi)
        theta0 = cost
        theta1 = gen.theta1_factor * theta0
        pair = HypothesisPair(
            ObservationModel(Family.POISSON, theta0),
            ObservationModel(Family.POISSON, theta1),
        )
        test = SprtTest(pair, SprtConfig(cfg.alpha, cfg.beta))
        specs.append(ComponentSpec(id=i + 1, pi=pi, cost=cost, test=test))
    return specs


_ITEM_KEYS = {
    "id", "pi", "cost", "family", "theta0", "theta1", "theta_min", "theta_max",
    "aux", "true_theta_h0", "true_theta_h1",
}


def _spec_from_item(cfg: CostExperiment, item: dict, idx: int) -> ComponentSpec:
    source = f"components.items[{idx}]"
    if not isinstance(item, dict):
        raise ConfigError(f"{source}: must be an object")
    _reject_unknown(item, _ITEM_KEYS, source)
    comp_id = _require(item, "id", int, source)
    pi = _require(item, "pi", float, source)
    cost = _require(item, "cost", float, source)
    fam = Family(_require(item, "family", str, source))
    theta0 = _require(item, "theta0", float, source)
    theta1 = _require(item, "theta1", float, source)
    aux = float(item.get("aux", 0.0))
    test: Union[SprtTest, CompositeTestConfig]
    if cfg.test == "sprt":
        pair = HypothesisPair(
            ObservationModel(fam, theta0, aux), ObservationModel(fam, theta1, aux)
        )
        test = SprtTest(pair, SprtConfig(cfg.alpha, cfg.beta))
    else:
        theta_min = _require(item, "theta_min", float, source)
        theta_max = _require(item, "theta_max", float, source)
        space = CompositeSpace(fam, theta0, theta1, theta_min, theta_max, aux)
        if cfg.test == "salrt":
            test = CompositeTestConfig.salrt(space, cfg.alpha, cfg.beta)
        else:
            test = CompositeTestConfig.sglrt(space, cfg.cost_per_obs, cfg.sglrt_schedule)
    return ComponentSpec(
        id=comp_id,
        pi=pi,
        cost=cost,
        test=test,
        true_theta_h0=item.get("true_theta_h0"),
        true_theta_h1=item.get("true_theta_h1"),
    )


# --- running ----------------------------------------------------------------


@dataclass(frozen=True)
class CostRow:
    sweep_value: Any
    policy: str
    mean_cost: float
    stderr: float
    analytic_cost: Optional[float]
    trials: int
    p_fa_max: Optional[float]
    p_md_max: Optional[float]
    mean_total_obs: Optional[float]
    wall_clock_s: float


@dataclass(frozen=True)
class ThetaRow:
    theta_true: float
    test: str
    mean_n: float
    stderr_n: float
    frac_abnormal: float
    region: str
    p_fa: Optional[float]
    p_md: Optional[float]
    trials: int
    wall_clock_s: float


@dataclass(frozen=True)
class ResultTable:
    kind: str
    sweep_var: str
    rows: tuple[Any, ...]
    config_digest: str
    seed: int
    duration_s: float = 0.0

    def columns(self) -> list[str]:
        if self.kind == "cost":
            return [self.sweep_var, "policy", "mean_cost", "stderr", "analytic_cost",
                    "trials", "p_fa_max", "p_md_max", "mean_total_obs"]
        return ["theta_true", "test", "mean_n", "stderr_n", "frac_abnormal",
                "region", "p_fa", "p_md", "trials"]

    def values(self, row: Any) -> list[Any]:
        if self.kind == "cost":
            return [row.sweep_value, row.policy, row.mean_cost, row.stderr,
                    row.analytic_cost, row.trials, row.p_fa_max, row.p_md_max,
                    row.mean_total_obs]
        return [row.theta_true, row.test, row.mean_n, row.stderr_n,
                row.frac_abnormal, row.region, row.p_fa, row.p_md, row.trials]


def config_hash(cfg: ExperimentConfig) -> str:
    """Digest of every semantically meaningful field (the name is cosmetic)."""
    payload = _canonical_dict(cfg)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _canonical_dict(cfg: ExperimentConfig) -> dict:
    def convert(value: Any) -> Any:
        if isinstance(value, tuple):
            return [convert(v) for v in value]
        if isinstance(value, (PolicyRule, AnomalyModel, Family)):
            return value.value
        if isinstance(value, (SweepSpec, ComponentGenerator)):
            return {k: convert(v) for k, v in vars(value).items()}
        if isinstance(value, dict):
            return {k: convert(v) for k, v in value.items()}
        return value

    out = {}
    for key, value in vars(cfg).items():
        if key == "name":
            continue
        out[key] = convert(value)
    return out


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    """Execute all (sweep point, policy) cells of an experiment."""
    started = time.perf_counter()
    if isinstance(cfg, CostExperiment):
        table = _run_cost(cfg)
    else:
        table = _run_theta(cfg)
    duration = time.perf_counter() - started
    return ResultTable(
        kind=table.kind,
        sweep_var=table.sweep_var,
        rows=table.rows,
        config_digest=table.config_digest,
        seed=table.seed,
        duration_s=duration,
    )


def _analytic_for_policy(
    cfg: CostExperiment, specs: Sequence[ComponentSpec], policy: str,
    ordering: Optional[Ordering],
) -> Optional[float]:
    # The closed-form cost models a single probe slot only.
    if cfg.test != "sprt" or cfg.num_probes != 1:
        return None
    profiles = [profile_for_spec(s) for s in specs]
    if policy == "random":
        return mean_cost_over_random_orders(profiles, cfg.model)
    if ordering is None:
        return None
    return analytic_expected_cost(profiles, ordering, cfg.model)


def _run_cost(cfg: CostExperiment) -> ResultTable:
    sweep_var = cfg.sweep.variable if cfg.sweep is not None else "K"
    points = cfg.sweep.values if cfg.sweep is not None else (
        cfg.K if sweep_var == "K" else None,
    )
    rows: list[CostRow] = []
    for value in points:
        if sweep_var == "K":
            specs = build_specs(cfg, int(value))
        else:
            specs = build_specs(cfg, cfg.K, c_min=float(value))
        for policy in cfg.policies:
            t0 = time.perf_counter()
            if policy == "exhaustive":
                report = exhaustive_search_monte_carlo(
                    specs, cfg.model, cfg.num_probes, cfg.trials, cfg.seed
                )
                ordering = report.best_order
                rows.append(CostRow(
                    sweep_value=value,
                    policy="exhaustive",
                    mean_cost=report.best_mean_cost,
                    stderr=float(report.stderr_costs[
                        report.orders.index(tuple(ordering.sequence))]),
                    analytic_cost=_analytic_for_policy(cfg, specs, "exhaustive", ordering),
                    trials=cfg.trials,
                    p_fa_max=None,
                    p_md_max=None,
                    mean_total_obs=report.mean_total_obs,
                    wall_clock_s=time.perf_counter() - t0,
                ))
                continue
            rule = policy if isinstance(policy, PolicyRule) else PolicyRule(policy)
            report = run_monte_carlo(
                specs, rule, cfg.model, cfg.num_probes, cfg.trials, cfg.seed,
                cfg.early_stop,
            )
            p_fa_max = float(np.nanmax(report.p_fa)) if not np.isnan(report.p_fa).all() else None
            p_md_max = float(np.nanmax(report.p_md)) if not np.isnan(report.p_md).all() else None
            rows.append(CostRow(
                sweep_value=value,
                policy=rule.value,
                mean_cost=report.mean_cost,
                stderr=report.stderr_cost,
                analytic_cost=_analytic_for_policy(cfg, specs, rule.value, report.ordering),
                trials=cfg.trials,
                p_fa_max=p_fa_max,
                p_md_max=p_md_max,
                mean_total_obs=report.mean_total_obs,
                wall_clock_s=time.perf_counter() - t0,
            ))
    return ResultTable(
        kind="cost",
        sweep_var=sweep_var,
        rows=tuple(rows),
        config_digest=config_hash(cfg),
        seed=cfg.seed,
    )


def theta_sweep_tests(cfg: ThetaSweepExperiment) -> dict[str, Union[SprtTest, CompositeTestConfig]]:
    """The test objects a theta-sweep experiment compares."""
    space = CompositeSpace(cfg.family, cfg.theta0, cfg.theta1, cfg.theta_min,
                           cfg.theta_max, cfg.aux)
    out: dict[str, Union[SprtTest, CompositeTestConfig]] = {}
    for name in cfg.tests:
        if name == "sprt":
            pair = HypothesisPair(
                ObservationModel(cfg.family, cfg.theta0, cfg.aux),
                ObservationModel(cfg.family, cfg.theta1, cfg.aux),
            )
            out[name] = SprtTest(pair, SprtConfig(cfg.alpha, cfg.beta))
        elif name == "salrt":
            out[name] = CompositeTestConfig.salrt(space, cfg.alpha, cfg.beta)
        else:
            out[name] = CompositeTestConfig.sglrt(space, cfg.cost_per_obs,
                                                  cfg.sglrt_schedule)
    return out


def _run_theta(cfg: ThetaSweepExperiment) -> ResultTable:
    tests = theta_sweep_tests(cfg)
    points = cfg.sweep.values if cfg.sweep is not None else (cfg.theta_true,)
    rows: list[ThetaRow] = []
    for point_idx, theta in enumerate(points):
        theta = float(theta)
        if theta <= cfg.theta0:
            region = "h0"
        elif theta >= cfg.theta1:
            region = "h1"
        else:
            region = "indifference"
        for name in cfg.tests:
            t0 = time.perf_counter()
            report = run_single_test_monte_carlo(
                tests[name], theta, cfg.trials, cfg.seed,
                stream_key=(3, point_idx),
            )
            p_fa = report.frac_abnormal if region == "h0" else None
            p_md = (1.0 - report.frac_abnormal) if region == "h1" else None
            rows.append(ThetaRow(
                theta_true=theta,
                test=name,
                mean_n=report.mean_n,
                stderr_n=report.stderr_n,
                frac_abnormal=report.frac_abnormal,
                region=region,
                p_fa=p_fa,
                p_md=p_md,
                trials=cfg.trials,
                wall_clock_s=time.perf_counter() - t0,
            ))
    return ResultTable(
        kind="theta-sweep",
        sweep_var="theta_true",
        rows=tuple(rows),
        config_digest=config_hash(cfg),
        seed=cfg.seed,
    )


# --- output -----------------------------------------------------------------


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(float(value))  # plain shortest round-trip form, never np.float64(...)
    return str(value)


def emit_csv(table: ResultTable, path: str) -> None:
    """Write the result table as UTF-8 CSV with round-trip float precision.

    Volatile fields (wall clock) are deliberately left out of the CSV so a
    rerun with the same config and seed is byte-identical; they live in the
    sidecar instead.
    """
    lines = [",".join(table.columns())]
    for row in table.rows:
        lines.append(",".join(_format_cell(v) for v in table.values(row)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_sidecar(table: ResultTable, path: str) -> str:
    """Write the metadata sidecar next to a CSV; returns the sidecar path."""
    meta = {
        "config_hash": table.config_digest,
        "seed": table.seed,
        "kind": table.kind,
        "rows": len(table.rows),
        "version": __version__,
        "backend": BACKEND,
        "duration_s": table.duration_s,
    }
    sidecar = path + ".meta.json"
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return sidecar


def order_table(cfg: CostExperiment) -> tuple[list[dict], dict[str, Ordering]]:
    """Index ingredients and the resulting order per deterministic policy."""
    specs = build_specs(cfg, cfg.K)
    profiles = [profile_for_spec(s) for s in specs]
    rows = []
    for p in profiles:
        rows.append({
            "id": p.id,
            "pi": p.pi,
            "cost": p.cost,
            "en_h0": p.en_h0,
            "en_h1": p.en_h1,
            "en": p.en,
            "index_picn": compute_index(p, PolicyRule.PICN),
            "index_picn0": compute_index(p, PolicyRule.PICN0),
        })
    orders = {}
    for policy in cfg.policies:
        if isinstance(policy, PolicyRule) and policy in (PolicyRule.PICN, PolicyRule.PICN0, PolicyRule.FIXED):
            orders[policy.value] = order_components(profiles, policy)
    return rows, orders
