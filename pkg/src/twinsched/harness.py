"""Experiment runner: seeded instance batches, oracle normalisation,
convergence detection and CSV reports."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .algorithms import TrainingTrace, evaluate_policy, train_dtaql, train_dteql, train_ql
from .core import DistParams, Instance, ScheduleReport, brute_force_optimal, generate_instance
from .env import SchedulingEnv
from .errors import ConfigError, ContractViolation, OracleInfeasible
from .qtable import HyperParams

log = logging.getLogger(__name__)

ALGOS = ("ql", "dtaql", "dteql")
SUMMARY_HEADER = [
    "algo", "phi", "delta", "n_tasks", "seeds", "normalized_reward",
    "miss_ratio", "avg_delay", "convergence_episodes",
]
TRACE_HEADER = ["episode", "epsilon", "total_cost", "normalized_reward", "misses", "avg_delay"]
NOT_CONVERGED = "not converged"


@dataclass(frozen=True)
class ExperimentConfig:
    algo: str = "dteql"
    n_tasks: int = 6
    phi: int = 20
    delta: int = 512
    episodes: int = 25600
    num_instances: int = 20
    base_seed: int = 0
    dist: DistParams = field(default_factory=DistParams)
    eval_interval: int = 8
    window: int = 10
    tolerance: float = 0.01
    lr: float = 0.1
    gamma: float = 1.0
    eps_min: float = 0.1
    beta: float = 5000.0
    normalize: bool = True
    parallel: bool = False
    jobs: int = 1
    out: str | None = None
    backend: str | None = None

    def validate(self) -> None:
        if self.algo not in ALGOS:
            raise ConfigError(f"unknown algo {self.algo!r}; choose from {', '.join(ALGOS)}")
        counts = dict(n_tasks=self.n_tasks, delta=self.delta, episodes=self.episodes,
                      instances=self.num_instances, eval_interval=self.eval_interval,
                      window=self.window, jobs=self.jobs)
        for name, v in counts.items():
            if v < 1:
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.algo != "ql" and self.phi < 1:
            raise ConfigError(f"phi must be positive for {self.algo}, got {self.phi}")
        if not 0 < self.tolerance < 1:
            raise ConfigError(f"tolerance must be in (0, 1), got {self.tolerance}")
        if self.n_tasks > 15:
            raise ConfigError("at most 15 tasks are supported")
        self.dist.validate()
        try:
            self.hyperparams().validate()
        except ContractViolation as exc:
            raise ConfigError(str(exc)) from None

    @property
    def phi_label(self) -> int:
        return 0 if self.algo == "ql" else self.phi

    def hyperparams(self) -> HyperParams:
        return HyperParams(
            lr=self.lr, gamma=self.gamma, eps_min=self.eps_min, beta=self.beta,
            phi=self.phi_label, delta=self.delta, episodes=self.episodes,
            eval_interval=self.eval_interval,
        )


@dataclass(frozen=True)
class SummaryRow:
    algo: str
    phi: int
    delta: int
    n_tasks: int
    seeds: int
    normalized_reward: float
    miss_ratio: float
    avg_delay: float
    convergence_episodes: int | None


@dataclass
class RunResult:
    seed: int
    instance: Instance
    trace: TrainingTrace
    final: ScheduleReport
    oracle: ScheduleReport | None
    convergence: int | None
    real_steps: int
    twin_steps: int


def normalized_reward(achieved_cost: float, oracle_cost: float) -> float:
    """Oracle cost over achieved cost: 1 for an optimal schedule, lower otherwise."""
    if not (achieved_cost > 0 and oracle_cost > 0):
        raise ContractViolation(
            f"costs must be positive (achieved={achieved_cost}, oracle={oracle_cost})"
        )
    if achieved_cost < oracle_cost:
        raise ContractViolation(
            f"achieved cost {achieved_cost!r} beats the oracle {oracle_cost!r}; "
            "the oracle or the simulator is wrong"
        )
    return oracle_cost / achieved_cost


def convergence_time(trace: TrainingTrace, window: int = 10, tolerance: float = 0.01) -> int | None:
    """First evaluated episode from which every later evaluation stays within
    ``1 + tolerance`` of the best cost among the last ``window`` evaluations.

    The stable suffix must span at least ``window`` evaluations, otherwise the
    run has not converged and ``None`` is returned.
    """
    costs = trace.total_cost
    if not costs:
        raise ValueError("empty trace")
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    bound = (1.0 + tolerance) * min(costs[-window:])
    start = len(costs)
    while start > 0 and costs[start - 1] <= bound:
        start -= 1
    if len(costs) - start < window:
        return None
    return trace.episode[start]


_TRAINERS = {"ql": train_ql, "dteql": train_dteql}


def run_single(config: ExperimentConfig, index: int) -> RunResult:
    seed = config.base_seed + index
    instance = generate_instance(config.n_tasks, config.dist, seed)
    oracle = brute_force_optimal(instance, backend=config.backend)[1] if config.normalize else None
    env = SchedulingEnv(instance)
    hp = config.hyperparams()
    if config.algo == "dtaql":
        policy, trace = train_dtaql(env, hp, seed, backend=config.backend,
                                    parallel=config.parallel)
    else:
        policy, trace = _TRAINERS[config.algo](env, hp, seed, backend=config.backend)
    if env.steps != config.episodes * config.n_tasks:
        raise RuntimeError(
            f"real step budget broken: {env.steps} != {config.episodes} x {config.n_tasks}"
        )
    final = evaluate_policy(policy, env)
    if oracle is not None:
        normalized_reward(final.total_cost, oracle.total_cost)  # sanity: never beats the oracle
    return RunResult(
        seed=seed, instance=instance, trace=trace, final=final, oracle=oracle,
        convergence=convergence_time(trace, config.window, config.tolerance),
        real_steps=env.steps, twin_steps=sum(t.steps for t in policy.twin_envs),
    )


def _run_index(args):
    return run_single(*args)


def run_experiment(config: ExperimentConfig) -> tuple[SummaryRow, list[RunResult]]:
    """Train on ``num_instances`` seeded instances and aggregate the metrics.

    Instances use seeds ``base_seed .. base_seed + num_instances - 1`` for both
    generation and training; aggregation runs in ascending seed order.
    """
    config.validate()
    if config.normalize and config.n_tasks > 10:
        raise OracleInfeasible(
            f"oracle infeasible for {config.n_tasks} tasks; rerun with --no-normalize"
        )
    jobs = [(config, k) for k in range(config.num_instances)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            results = list(pool.map(_run_index, jobs))
    else:
        results = [_run_index(j) for j in jobs]
    log.info("%s phi=%s: %d runs done", config.algo, config.phi_label, len(results))
    return summarize(config, results), results


def summarize(config: ExperimentConfig, results: Sequence[RunResult]) -> SummaryRow:
    if config.normalize:
        norm = sum(
            normalized_reward(r.final.total_cost, r.oracle.total_cost) for r in results
        ) / len(results)
    else:
        norm = math.nan
    total_tasks = sum(r.instance.n for r in results)
    # median_low keeps the value an observed episode count; None sorts last
    conv = statistics.median_low(
        [math.inf if r.convergence is None else r.convergence for r in results]
    )
    return SummaryRow(
        algo=config.algo,
        phi=config.phi_label,
        delta=config.delta if config.algo == "dtaql" else 0,
        n_tasks=config.n_tasks,
        seeds=len(results),
        normalized_reward=norm,
        miss_ratio=sum(r.final.misses for r in results) / total_tasks,
        avg_delay=sum(r.final.avg_delay for r in results) / len(results),
        convergence_episodes=None if conv == math.inf else int(conv),
    )


def fmt(value) -> str:
    if value is None:
        return NOT_CONVERGED
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def trace_rows(result: RunResult) -> list[list[str]]:
    tr = result.trace
    rows = []
    for i in range(len(tr)):
        cost = tr.total_cost[i]
        norm = (
            normalized_reward(cost, result.oracle.total_cost) if result.oracle else math.nan
        )
        rows.append([fmt(tr.episode[i]), fmt(tr.epsilon[i]), fmt(cost), fmt(norm),
                     fmt(tr.misses[i]), fmt(tr.avg_delay[i])])
    return rows


def write_reports(
    rows: Sequence[SummaryRow],
    traces: Sequence[tuple[str, int, RunResult]],
    path: str | Path,
) -> list[Path]:
    """Write ``summary.csv`` and one ``trace_<algo>_<phi>_<seed>.csv`` per run.

    ``traces`` holds ``(algo, phi, result)`` triples.
    """
    out = Path(path)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        summary = out / "summary.csv"
        with summary.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUMMARY_HEADER)
            for r in rows:
                w.writerow([fmt(getattr(r, f.name)) for f in dataclasses.fields(r)])
        written.append(summary)
        for algo, phi, result in traces:
            p = out / f"trace_{algo}_{phi}_{result.seed}.csv"
            with p.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(TRACE_HEADER)
                w.writerows(trace_rows(result))
            written.append(p)
    except OSError as exc:
        raise OSError(f"could not write reports under {out}: {exc}") from exc
    return written


def sweep_configs(base: ExperimentConfig, algos: Sequence[str], phis: Sequence[int]):
    """Expand a grid over algorithms and twin capacities; QL runs once."""
    for algo in algos:
        for phi in ([base.phi] if algo == "ql" else phis):
            yield dataclasses.replace(base, algo=algo, phi=phi)


def run_sweep(base: ExperimentConfig, algos: Sequence[str], phis: Sequence[int], out=None):
    rows, traces = [], []
    for cfg in sweep_configs(base, algos, phis):
        row, results = run_experiment(cfg)
        rows.append(row)
        traces.extend((cfg.algo, cfg.phi_label, r) for r in results)
    if out is not None:
        write_reports(rows, traces, out)
    return rows, traces


# -- config files -----------------------------------------------------------

_DIST_KEYS = {f.name for f in dataclasses.fields(DistParams)}
_INT_KEYS = {"n_tasks", "phi", "delta", "episodes", "num_instances", "base_seed",
             "eval_interval", "window", "jobs"}
_FLOAT_KEYS = {"tolerance", "lr", "gamma", "eps_min", "beta"}
_BOOL_KEYS = {"normalize", "parallel"}
_ALIASES = {"instances": "num_instances", "seed": "base_seed"}


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _parse_bool(key: str, value) -> bool:
    if isinstance(value, bool):
        return value
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def build_config(settings: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Apply ``settings`` (flag-style keys, string or typed values) onto ``base``."""
    base = base or ExperimentConfig()
    top: dict = {}
    dist: dict = {}
    for raw_key, value in settings.items():
        if value is None:
            continue
        key = raw_key.replace("-", "_")
        if key == "no_normalize":
            top["normalize"] = not _parse_bool(raw_key, value)
            continue
        key = _ALIASES.get(key, key)
        try:
            if key in _DIST_KEYS:
                dist[key] = float(value)
            elif key in _INT_KEYS:
                top[key] = int(value)
            elif key in _FLOAT_KEYS:
                top[key] = float(value)
            elif key in _BOOL_KEYS:
                top[key] = _parse_bool(raw_key, value)
            elif key in ("algo", "out", "backend"):
                top[key] = str(value)
            else:
                raise ConfigError(f"unknown config key {raw_key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{raw_key}: cannot parse {value!r}") from None
    if dist:
        top["dist"] = dataclasses.replace(base.dist, **dist)
    return dataclasses.replace(base, **top)
