"""Sparse Q-table, epsilon-greedy selection, TD(0) updates and table averaging."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._backend import get_kernels
from .errors import ContractViolation

State = tuple[int, ...]


@dataclass(frozen=True)
class HyperParams:
    lr: float = 0.1
    gamma: float = 1.0
    eps_min: float = 0.1
    beta: float = 5000.0
    phi: int = 1
    delta: int = 512
    episodes: int = 25600
    eval_interval: int = 8

    def validate(self) -> None:
        if not 0 < self.lr <= 1:
            raise ContractViolation(f"lr must be in (0, 1], got {self.lr}")
        if not 0 <= self.gamma <= 1:
            raise ContractViolation(f"gamma must be in [0, 1], got {self.gamma}")
        if not 0 <= self.eps_min < 1:
            raise ContractViolation(f"eps_min must be in [0, 1), got {self.eps_min}")
        if not self.beta > 0:
            raise ContractViolation(f"beta must be positive, got {self.beta}")
        if self.phi < 0 or self.delta < 1 or self.episodes < 1 or self.eval_interval < 1:
            raise ContractViolation(
                f"bad counts: phi={self.phi} delta={self.delta} "
                f"episodes={self.episodes} eval_interval={self.eval_interval}"
            )


def state_key(state: Sequence[int]) -> int:
    """Pack a prefix into 4-bit fields, ``task + 1`` per position."""
    key = 0
    for pos, a in enumerate(state):
        key |= (int(a) + 1) << (4 * pos)
    return key


def decode_key(key: int) -> State:
    out = []
    while key:
        out.append((key & 0xF) - 1)
        key >>= 4
    return tuple(out)


class QTable:
    """Map from prefix state to a length-``n_actions`` value vector; absent reads as 0."""

    def __init__(self, n_actions: int, backend: str | None = None, store=None):
        self.kernels = get_kernels(backend)
        self.n_actions = n_actions
        self.store = store if store is not None else self.kernels.QStore(n_actions)

    def __len__(self) -> int:
        return len(self.store)

    def get(self, state: Sequence[int], action: int) -> float:
        return self.store.get(state_key(state), action)

    def set(self, state: Sequence[int], action: int, value: float) -> None:
        self.store.set(state_key(state), action, value)

    def row(self, state: Sequence[int]) -> np.ndarray:
        row = self.store.row(state_key(state))
        return np.zeros(self.n_actions) if row is None else np.array(row)

    def states(self) -> list[State]:
        return [decode_key(k) for k in self.store.keys()]

    def copy(self) -> "QTable":
        return QTable(self.n_actions, self.kernels.BACKEND, self.store.copy())

    def assign(self, other: "QTable") -> None:
        """Overwrite this table's contents with a copy of ``other``."""
        self.store = other.store.copy()

    def to_dense(self, states: Sequence[State]) -> np.ndarray:
        return np.array([self.row(s) for s in states]).reshape(len(states), self.n_actions)

    def to_dict(self) -> dict[State, tuple[float, ...]]:
        return {s: tuple(self.row(s)) for s in self.states()}

    def dump(self, path: str | Path) -> None:
        """Write one line per stored state: ``prefix v_0 ... v_{n-1}``.

        The prefix is dot-joined task indices, ``-`` for the empty one.
        """
        lines = [f"# n_actions={self.n_actions}"]
        for s in sorted(self.states(), key=lambda s: (len(s), s)):
            name = ".".join(map(str, s)) or "-"
            lines.append(" ".join([name, *(repr(float(v)) for v in self.row(s))]))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path, backend: str | None = None) -> "QTable":
        text = Path(path).read_text().splitlines()
        if not text or not text[0].startswith("# n_actions="):
            raise ValueError(f"{path}: missing '# n_actions=' header")
        table = cls(int(text[0].split("=", 1)[1]), backend)
        for lineno, line in enumerate(text[1:], start=2):
            if not line.strip():
                continue
            name, *vals = line.split()
            if len(vals) != table.n_actions:
                raise ValueError(f"{path}:{lineno}: expected {table.n_actions} values")
            state = () if name == "-" else tuple(int(x) for x in name.split("."))
            table.store.set_row(state_key(state), [float(v) for v in vals])
        return table


def best_action(table: QTable, state: Sequence[int], valid: Iterable[int]) -> int:
    """Highest-valued valid action; the lowest index wins ties."""
    valid = sorted(valid)
    if not valid:
        raise ContractViolation(f"no valid actions in state {tuple(state)}")
    row = table.row(state)
    best = valid[0]
    for a in valid[1:]:
        if row[a] > row[best]:
            best = a
    return best


def epsilon_greedy(
    table: QTable, state: Sequence[int], valid: Iterable[int], eps: float, rng: np.random.Generator
) -> int:
    """Uniform random valid action with probability ``eps``, else the greedy one.

    Consumes two uniforms per call (coin, pick) like the training kernels.
    """
    if not 0 <= eps <= 1:
        raise ContractViolation(f"eps must be in [0, 1], got {eps}")
    valid = sorted(valid)
    if not valid:
        raise ContractViolation(f"no valid actions in state {tuple(state)}")
    coin, pick = rng.random(2)
    if coin < eps:
        m = len(valid)
        return valid[min(int(pick * m), m - 1)]
    return best_action(table, state, valid)


def epsilon_schedule(i: int, eps_min: float = 0.1, beta: float = 5000.0) -> float:
    """Exploration rate for episode ``i``: starts at 1, decays to ``eps_min`` over ``beta``."""
    if i < 0:
        raise ContractViolation(f"episode index must be >= 0, got {i}")
    return eps_min + (1.0 - eps_min) * math.exp(-i / beta)


def td_update(
    table: QTable,
    state: Sequence[int],
    action: int,
    reward: float,
    next_state: Sequence[int],
    next_valid: Iterable[int],
    hp: HyperParams,
) -> float:
    next_valid = list(next_valid)
    boot = max((table.get(next_state, b) for b in next_valid), default=0.0)
    target = reward + hp.gamma * boot
    q = table.get(state, action)
    new = q + hp.lr * (target - q)
    table.set(state, action, new)
    return new


def average_tables(main: QTable, twins: Sequence[QTable]) -> QTable:
    """Entrywise mean of ``main`` and ``twins``; absent entries count as zero.

    Summation order is ``main`` then twins by index, so results are bit-stable.
    """
    for t in twins:
        if t.n_actions != main.n_actions:
            raise ContractViolation(
                f"table sizes differ: {t.n_actions} vs {main.n_actions}"
            )
    stores = [main.store, *(t.store for t in twins)]
    if any(type(s) is not type(main.store) for s in stores):
        raise ContractViolation("cannot average tables from different backends")
    return QTable(main.n_actions, main.kernels.BACKEND, main.kernels.average_stores(stores))
