"""Episodic scheduling MDP over one fixed instance.

A state is the ordered prefix of tasks already queued; an action appends one
unqueued task. The per-step reward is minus that task's completion time minus
the miss penalty, so an undiscounted episode return is exactly minus the
objective of the realised schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import Instance
from .errors import ContractViolation

State = tuple[int, ...]


@dataclass(frozen=True)
class Transition:
    next_state: State
    reward: float
    terminal: bool


class SchedulingEnv:
    """The real environment; :meth:`clone_twin` gives its digital twin.

    ``steps`` counts transitions taken on this object, including those the
    compiled training kernels report through :meth:`record_steps`.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        self.n = instance.n
        self._tt = instance.transmit_times.tolist()
        self._et = instance.exec_times.tolist()
        self._dl = instance.deadlines.tolist()
        self.state: State = ()
        self.steps = 0

    def reset(self) -> State:
        self.state = ()
        return self.state

    def valid_actions(self, state: State) -> tuple[int, ...]:
        taken = set(state)
        return tuple(a for a in range(self.n) if a not in taken)

    def _timing(self, prefix: State) -> tuple[float, float]:
        ready = 0.0
        comp = 0.0
        for a in prefix:
            ready = ready + self._tt[a]
            comp = max(ready, comp) + self._et[a]
        return ready, comp

    def step(self, state: State, action: int) -> Transition:
        state = tuple(state)
        if len(set(state)) != len(state) or any(not 0 <= a < self.n for a in state):
            raise ContractViolation(f"malformed state {state}")
        if not (0 <= action < self.n) or action in state:
            raise ContractViolation(f"action {action} is not valid in state {state}")
        ready, comp = self._timing(state)
        ready = ready + self._tt[action]
        comp = max(ready, comp) + self._et[action]
        miss = 1.0 if comp > self._dl[action] else 0.0
        reward = -(comp + self.instance.penalty * miss)
        next_state = state + (action,)
        self.state = next_state
        self.steps += 1
        return Transition(next_state, reward, len(next_state) == self.n)

    def record_steps(self, count: int) -> None:
        self.steps += int(count)

    def clone_twin(self) -> "SchedulingEnv":
        """Perfect-fidelity copy with its own episode state and step counter."""
        return SchedulingEnv(self.instance)
