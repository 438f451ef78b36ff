"""Command-line front end.

Subcommands:
  order     print index ingredients and probing orders (no simulation)
  simulate  run a config without a sweep, write CSV + sidecar
  sweep     run a config with a sweep, write CSV + sidecar
  verify    run the fast analytic and error-bound self-checks

Configs are JSON files; if the --config value is not an existing path it is
resolved against the presets bundled with the package. Exit code is 0 iff
the command completed; failures print a single-line error to stderr.
"""

from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path
from typing import Optional

from .experiments import (
    ConfigError,
    CostExperiment,
    emit_csv,
    order_table,
    parse_config,
    run_experiment,
    write_sidecar,
)


def _available_presets() -> list[str]:
    pkg = resources.files("seqprobe") / "presets"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".json"))


def resolve_config_path(value: str) -> str:
    """An existing path wins; otherwise look up a bundled preset by name."""
    if Path(value).exists():
        return value
    name = value if value.endswith(".json") else value + ".json"
    candidate = resources.files("seqprobe") / "presets" / name
    if candidate.is_file():
        return str(candidate)
    raise ConfigError(
        f"{value}: no such config file or preset "
        f"(presets: {', '.join(_available_presets())})"
    )


def _load(args: argparse.Namespace):
    cfg = parse_config(resolve_config_path(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("--trials must be >= 1")
        overrides["trials"] = args.trials
    if overrides:
        import dataclasses

        cfg = dataclasses.replace(cfg, **overrides)
    return cfg


def _cmd_order(args: argparse.Namespace) -> int:
    cfg = _load(args)
    if not isinstance(cfg, CostExperiment):
        raise ConfigError("the order subcommand needs a cost-kind config")
    rows, orders = order_table(cfg)
    header = ["id", "pi", "cost", "en_h0", "en_h1", "en", "index_picn", "index_picn0"]
    print(",".join(header))
    for row in rows:
        print(",".join(repr(row[h]) if isinstance(row[h], float) else str(row[h])
                       for h in header))
    for policy, ordering in orders.items():
        print(f"order[{policy}]: {' '.join(str(i) for i in ordering)}")
    if args.out:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(
                repr(row[h]) if isinstance(row[h], float) else str(row[h])
                for h in header))
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def _cmd_run(args: argparse.Namespace, want_sweep: bool) -> int:
    cfg = _load(args)
    if want_sweep and cfg.sweep is None:
        raise ConfigError("this config has no sweep; use the simulate subcommand")
    if not want_sweep and cfg.sweep is not None:
        raise ConfigError("this config declares a sweep; use the sweep subcommand")
    table = run_experiment(cfg)
    emit_csv(table, args.out)
    sidecar = write_sidecar(table, args.out)
    print(f"wrote {args.out} ({len(table.rows)} rows) and {sidecar}")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    from .verify import run_verification

    seed = args.seed if args.seed is not None else 20130601
    trials = args.trials if args.trials is not None else 20000
    ok = run_verification(seed=seed, trials=trials, out=sys.stdout)
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqprobe",
        description="Index-policy scheduling of sequential anomaly tests",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
        if config_required:
            p.add_argument("--config", required=True,
                           help="config file path or bundled preset name")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--trials", type=int, default=None,
                       help="override the config trial count")

    p_order = sub.add_parser("order", help="print indices and probing orders")
    add_common(p_order)
    p_order.add_argument("--out", default=None, help="optional CSV path for the table")

    p_sim = sub.add_parser("simulate", help="run a single (no-sweep) experiment")
    add_common(p_sim)
    p_sim.add_argument("--out", required=True, help="output CSV path")

    p_sweep = sub.add_parser("sweep", help="run a swept experiment")
    add_common(p_sweep)
    p_sweep.add_argument("--out", required=True, help="output CSV path")

    p_verify = sub.add_parser("verify", help="run the fast self-check suites")
    add_common(p_verify, config_required=False)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "order":
            return _cmd_order(args)
        if args.command == "simulate":
            return _cmd_run(args, want_sweep=False)
        if args.command == "sweep":
            return _cmd_run(args, want_sweep=True)
        return _cmd_verify(args)
    except ConfigError as exc:
        print(f"error: config: {_one_line(exc)}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
