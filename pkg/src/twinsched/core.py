"""Task model: instances, the transmit/execute timing recursion, the
deadline-penalised objective and an exhaustive permutation oracle.

Units are SI throughout: bits, cycles per bit, seconds, hertz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from ._backend import get_kernels
from .errors import ConfigError, ContractViolation, OracleInfeasible

ORACLE_LIMIT = 10


@dataclass(frozen=True)
class Task:
    data_bits: float
    complexity: float
    deadline: float

    def __post_init__(self):
        if not (self.data_bits >= 0 and self.complexity >= 0):
            raise ContractViolation(f"negative task size or complexity: {self}")
        if not self.deadline > 0:
            raise ContractViolation(f"deadline must be positive: {self}")


@dataclass(frozen=True)
class DistParams:
    """Sampling ranges for generated tasks plus the channel/server constants."""

    data_low: float = 0.0
    data_high: float = 2e6
    complexity_low: float = 0.0
    complexity_high: float = 1000.0
    deadline_low: float = 1.0
    deadline_high: float = 5.0
    rate: float = 1e7
    cpu_freq: float = 1e10
    penalty: float = 10.0

    def validate(self) -> None:
        for lo, hi, name in [
            (self.data_low, self.data_high, "data"),
            (self.complexity_low, self.complexity_high, "complexity"),
            (self.deadline_low, self.deadline_high, "deadline"),
        ]:
            if not lo <= hi:
                raise ConfigError(f"{name} bounds reversed: low={lo} > high={hi}")
        if self.data_low < 0 or self.complexity_low < 0:
            raise ConfigError("data and complexity bounds must be nonnegative")
        if self.deadline_low <= 0:
            raise ConfigError("deadlines must be positive")
        if self.rate <= 0 or self.cpu_freq <= 0:
            raise ConfigError("rate and cpu_freq must be positive")
        if self.penalty < 0:
            raise ConfigError("penalty must be nonnegative")


@dataclass(frozen=True)
class Instance:
    tasks: tuple[Task, ...]
    rate: float = 1e7
    cpu_freq: float = 1e10
    penalty: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        if not self.tasks:
            raise ContractViolation("an instance needs at least one task")
        if self.rate <= 0 or self.cpu_freq <= 0 or self.penalty < 0:
            raise ContractViolation(
                f"bad constants: rate={self.rate} cpu_freq={self.cpu_freq} penalty={self.penalty}"
            )

    @property
    def n(self) -> int:
        return len(self.tasks)

    @cached_property
    def transmit_times(self) -> np.ndarray:
        """Per-task upload time d / R."""
        return np.array([t.data_bits / self.rate for t in self.tasks], dtype=np.float64)

    @cached_property
    def exec_times(self) -> np.ndarray:
        """Per-task CPU time d * c / f."""
        return np.array(
            [t.data_bits * t.complexity / self.cpu_freq for t in self.tasks], dtype=np.float64
        )

    @cached_property
    def deadlines(self) -> np.ndarray:
        return np.array([t.deadline for t in self.tasks], dtype=np.float64)


@dataclass(frozen=True)
class ScheduleReport:
    completion: tuple[float, ...]
    total_cost: float
    misses: int
    avg_delay: float
    order: tuple[int, ...] = field(default=(), compare=False)


def validate_schedule(instance: Instance, schedule: Sequence[int]) -> tuple[int, ...]:
    order = tuple(int(i) for i in schedule)
    if sorted(order) != list(range(instance.n)):
        raise ContractViolation(
            f"schedule {list(order)} is not a permutation of 0..{instance.n - 1}"
        )
    return order


def ready_time(instance: Instance, schedule: Sequence[int], j: int) -> float:
    """Time at which the ``j``-th queued task (1-based) has fully arrived."""
    order = validate_schedule(instance, schedule)
    if not 1 <= j <= instance.n:
        raise ContractViolation(f"queue position {j} outside 1..{instance.n}")
    tt = instance.transmit_times
    ready = 0.0
    for i in order[:j]:
        ready += float(tt[i])
    return ready


def completion_times(instance: Instance, schedule: Sequence[int]) -> list[float]:
    """Completion instant of each queue position.

    A task starts executing once its data is in and the CPU is free.
    """
    order = validate_schedule(instance, schedule)
    tt = instance.transmit_times.tolist()
    et = instance.exec_times.tolist()
    ready = 0.0
    comp = 0.0
    out = []
    for a in order:
        ready = ready + tt[a]
        comp = max(ready, comp) + et[a]
        out.append(comp)
    return out


def objective(instance: Instance, schedule: Sequence[int]) -> ScheduleReport:
    order = validate_schedule(instance, schedule)
    completion = completion_times(instance, order)
    dl = instance.deadlines.tolist()
    total = 0.0
    misses = 0
    # per-position accumulation matches the environment's reward sum exactly
    for a, c in zip(order, completion):
        miss = c > dl[a]
        misses += miss
        total += c + instance.penalty * (1.0 if miss else 0.0)
    return ScheduleReport(
        completion=tuple(completion),
        total_cost=total,
        misses=misses,
        avg_delay=math.fsum(completion) / instance.n,
        order=order,
    )


def brute_force_optimal(
    instance: Instance, limit: int = ORACLE_LIMIT, backend: str | None = None
) -> tuple[tuple[int, ...], ScheduleReport]:
    """Cheapest schedule over all ``n!`` orders; ties go to the smallest order."""
    if instance.n > limit:
        raise OracleInfeasible(
            f"oracle infeasible: {instance.n} tasks exceeds the limit of {limit} "
            f"({math.factorial(instance.n)} permutations)"
        )
    kernels = get_kernels(backend)
    order, _ = kernels.brute_force(
        instance.transmit_times, instance.exec_times, instance.deadlines, float(instance.penalty)
    )
    order = tuple(int(a) for a in order)
    return order, objective(instance, order)


def generate_instance(n: int, dist: DistParams | None = None, seed: int = 0) -> Instance:
    """Draw ``n`` tasks uniformly from the ranges in ``dist``."""
    if n < 1:
        raise ConfigError(f"need at least one task, got n={n}")
    dist = dist or DistParams()
    dist.validate()
    rng = np.random.default_rng(seed)
    data = rng.uniform(dist.data_low, dist.data_high, n)
    comp = rng.uniform(dist.complexity_low, dist.complexity_high, n)
    dl = rng.uniform(dist.deadline_low, dist.deadline_high, n)
    tasks = tuple(Task(float(d), float(c), float(e)) for d, c, e in zip(data, comp, dl))
    return Instance(tasks, rate=dist.rate, cpu_freq=dist.cpu_freq, penalty=dist.penalty)
