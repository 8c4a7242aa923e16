"""Training loops: plain Q-learning, twin-assisted asynchronous Q-learning
(DTAQL) and twin-assisted exploring Q-learning (DTEQL).

One training "epoch" is one full episode of ``n`` real steps; the exploration
rate decays per episode. Every ``eval_interval`` episodes the greedy policy of
the real agent is rolled out and scored.

Random numbers are pre-drawn per block as a ``(episodes, n, n + 2)`` array so
the compiled and pure-Python kernels consume identical streams.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Instance, ScheduleReport, objective
from .env import SchedulingEnv
from .qtable import HyperParams, QTable, average_tables, epsilon_schedule


@dataclass
class TrainingTrace:
    episode: list[int] = field(default_factory=list)
    epsilon: list[float] = field(default_factory=list)
    total_cost: list[float] = field(default_factory=list)
    misses: list[int] = field(default_factory=list)
    avg_delay: list[float] = field(default_factory=list)
    table_size: list[int] = field(default_factory=list)
    sync_episodes: list[int] = field(default_factory=list)

    def record(self, episode: int, epsilon: float, report: ScheduleReport, table_size: int):
        if self.episode and episode <= self.episode[-1]:
            raise ValueError(f"trace episodes must increase: {episode} after {self.episode[-1]}")
        self.episode.append(episode)
        self.epsilon.append(epsilon)
        self.total_cost.append(report.total_cost)
        self.misses.append(report.misses)
        self.avg_delay.append(report.avg_delay)
        self.table_size.append(table_size)

    def __len__(self) -> int:
        return len(self.episode)


@dataclass
class TrainedPolicy:
    table: QTable
    instance: Instance
    hyperparams: HyperParams
    twin_envs: list[SchedulingEnv] = field(default_factory=list)


def greedy_schedule(table: QTable, n: int) -> tuple[int, ...]:
    return tuple(table.kernels.greedy_order(table.store, n))


def evaluate_policy(policy: TrainedPolicy, env: SchedulingEnv | None = None) -> ScheduleReport:
    """Score the exploration-free rollout of ``policy``.

    The rollout is computed from the model, so it never touches the real
    environment's step counter.
    """
    instance = env.instance if env is not None else policy.instance
    return objective(instance, greedy_schedule(policy.table, instance.n))


class _Agent:
    """One learner: a table, a private RNG stream and the environment it acts on."""

    def __init__(self, env: SchedulingEnv, hp: HyperParams, rng, backend, phi=0, twin=None):
        inst = env.instance
        self.env = env
        self.twin = twin
        self.hp = hp
        self.phi = phi
        self.rng = rng
        self.n = inst.n
        self.table = QTable(inst.n, backend)
        self.consts = (
            np.ascontiguousarray(inst.transmit_times),
            np.ascontiguousarray(inst.exec_times),
            np.ascontiguousarray(inst.deadlines),
        )
        self.penalty = float(inst.penalty)

    def play(self, start: int, stop: int) -> float:
        """Run episodes ``start .. stop - 1``; return the last epsilon used."""
        hp = self.hp
        count = stop - start
        eps = np.array([epsilon_schedule(i, hp.eps_min, hp.beta) for i in range(start, stop)])
        uniforms = self.rng.random((count, self.n, self.n + 2))
        orders = np.zeros((count, self.n), dtype=np.int64)
        returns = np.zeros(count)
        real, twin = self.table.kernels.run_episodes(
            self.table.store, *self.consts, self.penalty, float(hp.lr), float(hp.gamma),
            eps, uniforms, int(self.phi), orders, returns,
        )
        self.env.record_steps(real)
        if self.twin is not None:
            self.twin.record_steps(twin)
        return float(eps[-1])


def _boundaries(episodes: int, *periods: int) -> list[int]:
    marks = {episodes}
    for p in periods:
        marks.update(range(p, episodes, p))
    return sorted(marks)


def _train_single(env, hp, seed, phi, backend):
    hp.validate()
    twin = env.clone_twin() if phi > 0 else None
    agent = _Agent(env, hp, np.random.default_rng(seed), backend, phi=phi, twin=twin)
    trace = TrainingTrace()
    start = 0
    for stop in _boundaries(hp.episodes, hp.eval_interval):
        eps = agent.play(start, stop)
        start = stop
        trace.record(stop, eps, objective(env.instance, greedy_schedule(agent.table, env.n)),
                     len(agent.table))
    return TrainedPolicy(agent.table, env.instance, hp, [twin] if twin else []), trace


def train_ql(env: SchedulingEnv, hp: HyperParams, seed: int = 0, backend: str | None = None):
    """Baseline epsilon-greedy Q-learning on the real environment only."""
    return _train_single(env, hp, seed, 0, backend)


def train_dteql(env: SchedulingEnv, hp: HyperParams, seed: int = 0, backend: str | None = None):
    """Single table; each real step also simulates up to ``phi`` distinct
    actions from the same state in the twin and updates each with its own
    reward and successor. ``phi = 0`` reproduces :func:`train_ql` exactly.
    """
    return _train_single(env, hp, seed, hp.phi, backend)


def train_dtaql(
    env: SchedulingEnv,
    hp: HyperParams,
    seed: int = 0,
    backend: str | None = None,
    parallel: bool = False,
    twin_seeds: Sequence | None = None,
):
    """One real agent plus ``phi`` twin agents, each on its own twin clone with
    its own table and RNG stream. Every ``delta`` episodes the ``1 + phi``
    tables are replaced by their entrywise mean. Only the real agent is
    evaluated.

    ``parallel`` runs the twin agents on a thread pool between syncs; results
    are bit-identical to the sequential order.
    """
    hp.validate()
    if hp.phi < 1:
        raise ValueError("DTAQL needs at least one twin agent (phi >= 1)")
    if twin_seeds is None:
        twin_seeds = [[seed, j] for j in range(1, hp.phi + 1)]
    if len(twin_seeds) != hp.phi:
        raise ValueError(f"expected {hp.phi} twin seeds, got {len(twin_seeds)}")
    real = _Agent(env, hp, np.random.default_rng(seed), backend)
    twins = [
        _Agent(env.clone_twin(), hp, np.random.default_rng(s), backend) for s in twin_seeds
    ]
    trace = TrainingTrace()
    pool = ThreadPoolExecutor(max_workers=min(hp.phi, 8)) if parallel else None
    try:
        start = 0
        for stop in _boundaries(hp.episodes, hp.eval_interval, hp.delta):
            eps = real.play(start, stop)
            if pool is not None:
                list(pool.map(lambda ag: ag.play(start, stop), twins))
            else:
                for ag in twins:
                    ag.play(start, stop)
            start = stop
            if stop % hp.delta == 0:
                merged = average_tables(real.table, [ag.table for ag in twins])
                for ag in (real, *twins):
                    ag.table.assign(merged)
                trace.sync_episodes.append(stop)
            if stop % hp.eval_interval == 0 or stop == hp.episodes:
                report = objective(env.instance, greedy_schedule(real.table, env.n))
                trace.record(stop, eps, report, len(real.table))
    finally:
        if pool is not None:
            pool.shutdown()
    return TrainedPolicy(real.table, env.instance, hp, [ag.env for ag in twins]), trace
