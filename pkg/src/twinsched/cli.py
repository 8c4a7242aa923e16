"""Command line entry point: ``run``, ``oracle`` and ``sweep``."""

from __future__ import annotations

import argparse
import logging
import sys

from .core import brute_force_optimal, generate_instance
from .errors import ConfigError, ContractViolation, OracleInfeasible
from .harness import (
    ALGOS,
    ExperimentConfig,
    build_config,
    fmt,
    read_config_file,
    run_experiment,
    run_sweep,
    write_reports,
)

_DIST_FLAGS = ["rate", "cpu-freq", "penalty", "data-low", "data-high", "complexity-low",
               "complexity-high", "deadline-low", "deadline-high"]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--n-tasks", type=int)
    p.add_argument("--seed", type=int)
    for flag in _DIST_FLAGS:
        p.add_argument(f"--{flag}", type=float)


def _add_training(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=int, help="DTAQL sync period in episodes")
    p.add_argument("--episodes", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--out", help="directory for summary.csv and trace files")
    p.add_argument("--no-normalize", action="store_true", default=None,
                   help="skip the brute-force oracle (required above 10 tasks)")
    p.add_argument("--eval-interval", type=int)
    p.add_argument("--window", type=int, help="convergence window in evaluations")
    p.add_argument("--tolerance", type=float, help="convergence tolerance")
    p.add_argument("--lr", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--eps-min", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--parallel", action="store_true", default=None,
                   help="run DTAQL twin agents on a thread pool")
    p.add_argument("--jobs", type=int, help="worker processes across instances")
    p.add_argument("--backend", choices=["compiled", "python"])


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twinsched", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one algorithm over a batch of instances")
    run.add_argument("--algo", choices=ALGOS)
    run.add_argument("--phi", type=int, help="twin capacity")
    _add_common(run)
    _add_training(run)

    oracle = sub.add_parser("oracle", help="print the optimal schedule of one instance")
    _add_common(oracle)

    sweep = sub.add_parser("sweep", help="grid over algo and phi lists from a config file")
    sweep.add_argument("--algo", help="comma-separated algorithms")
    sweep.add_argument("--phi", help="comma-separated twin capacities")
    _add_common(sweep)
    _add_training(sweep)
    return parser


def _settings(args: argparse.Namespace, skip=()) -> dict:
    settings = read_config_file(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in ("command", "config", "verbose", *skip) or value is None:
            continue
        settings[key] = value
    return settings


def _print_row(row) -> None:
    print(
        f"{row.algo:6s} phi={row.phi:<4d} norm_reward={fmt(row.normalized_reward)} "
        f"miss_ratio={fmt(row.miss_ratio)} avg_delay={fmt(row.avg_delay)} "
        f"convergence={fmt(row.convergence_episodes)}"
    )


def cmd_run(args) -> int:
    cfg = build_config(_settings(args))
    row, results = run_experiment(cfg)
    _print_row(row)
    if cfg.out:
        write_reports([row], [(cfg.algo, cfg.phi_label, r) for r in results], cfg.out)
        print(f"reports written to {cfg.out}")
    return 0


def cmd_oracle(args) -> int:
    settings = _settings(args)
    cfg = build_config({k: v for k, v in settings.items() if k not in ("algo", "phi")})
    cfg.dist.validate()
    inst = generate_instance(cfg.n_tasks, cfg.dist, cfg.base_seed)
    order, report = brute_force_optimal(inst)
    print("order:", " ".join(map(str, order)))
    print("total_cost:", fmt(report.total_cost))
    print("misses:", report.misses)
    print("avg_delay:", fmt(report.avg_delay))
    return 0


def _split(value, cast):
    if value is None:
        return None
    items = value if isinstance(value, (list, tuple)) else str(value).split(",")
    try:
        return [cast(str(v).strip()) for v in items if str(v).strip()]
    except ValueError:
        raise ConfigError(f"cannot parse list {value!r}") from None


def cmd_sweep(args) -> int:
    settings = _settings(args)
    algos = _split(settings.pop("algo", None), str) or list(ALGOS)
    phis = _split(settings.pop("phi", None), int) or [ExperimentConfig().phi]
    for a in algos:
        if a not in ALGOS:
            raise ConfigError(f"unknown algo {a!r}")
    base = build_config(settings, ExperimentConfig(phi=phis[0]))
    rows, _ = run_sweep(base, algos, phis, base.out)
    for row in rows:
        _print_row(row)
    if base.out:
        print(f"reports written to {base.out}")
    return 0


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": cmd_run, "oracle": cmd_oracle, "sweep": cmd_sweep}[args.command]
    try:
        return handler(args)
    except (ConfigError, OracleInfeasible, ContractViolation, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
