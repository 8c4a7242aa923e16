"""Pure-Python hot kernels.

Reference implementation for ``_ckernels``; both modules expose the same
names and must produce bit-identical results for identical inputs.

States are keyed by packing the prefix into 4-bit nibbles, ``task + 1`` per
position, so the empty prefix is key 0 and at most 15 tasks are supported.
"""

from __future__ import annotations

import math

BACKEND = "python"
MAX_TASKS = 15


class QStore:
    """Sparse table: packed state key -> row of ``n_actions`` floats."""

    def __init__(self, n_actions: int):
        if not 1 <= n_actions <= MAX_TASKS:
            raise ValueError(f"n_actions must be in [1, {MAX_TASKS}], got {n_actions}")
        self.n_actions = n_actions
        self._rows: dict[int, list[float]] = {}

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key: int) -> bool:
        return key in self._rows

    def get(self, key: int, action: int) -> float:
        row = self._rows.get(key)
        return 0.0 if row is None else row[action]

    def set(self, key: int, action: int, value: float) -> None:
        row = self._rows.get(key)
        if row is None:
            row = self._rows[key] = [0.0] * self.n_actions
        row[action] = float(value)

    def row(self, key: int):
        row = self._rows.get(key)
        return None if row is None else list(row)

    def set_row(self, key: int, values) -> None:
        values = [float(v) for v in values]
        if len(values) != self.n_actions:
            raise ValueError(f"row length {len(values)} != {self.n_actions}")
        self._rows[key] = values

    def keys(self) -> list[int]:
        return list(self._rows)

    def copy(self) -> "QStore":
        out = QStore(self.n_actions)
        out._rows = {k: list(v) for k, v in self._rows.items()}
        return out


def _best(row, valid):
    # strict '>' keeps the lowest index on ties
    best = valid[0]
    if row is None:
        return best
    best_v = row[best]
    for a in valid[1:]:
        if row[a] > best_v:
            best, best_v = a, row[a]
    return best


def _max_next(store, key, valid):
    if not valid:
        return 0.0
    row = store._rows.get(key)
    if row is None:
        return 0.0
    return max(row[a] for a in valid)


def _td(store, key, a, reward, next_key, next_valid, lr, gamma):
    rows = store._rows
    row = rows.get(key)
    if row is None:
        row = rows[key] = [0.0] * store.n_actions
    target = reward + gamma * _max_next(store, next_key, next_valid)
    q = row[a]
    row[a] = q + lr * (target - q)


def run_episodes(store, data_time, exec_time, deadline, penalty, lr, gamma,
                 eps, uniforms, phi, orders, returns):
    """Play ``len(eps)`` training episodes in place on ``store``.

    ``uniforms[e, j]`` holds ``n + 2`` draws for step ``j`` of episode ``e``:
    explore coin, random pick, then the twin Fisher-Yates draws. ``phi = 0``
    is plain Q-learning; ``phi > 0`` adds twin lookahead on every step.
    Realised orders and undiscounted returns go to ``orders``/``returns``.
    Returns ``(real_steps, twin_steps)``.
    """
    n = len(data_time)
    data_time = [float(x) for x in data_time]
    exec_time = [float(x) for x in exec_time]
    deadline = [float(x) for x in deadline]
    if hasattr(uniforms, "tolist"):
        uniforms = uniforms.tolist()
    eps = [float(x) for x in eps]
    penalty = float(penalty)
    lr = float(lr)
    gamma = float(gamma)
    real_steps = 0
    twin_steps = 0
    for e in range(len(eps)):
        epsilon = eps[e]
        u_ep = uniforms[e]
        valid = list(range(n))
        key = 0
        ready = 0.0
        comp = 0.0
        total = 0.0
        for j in range(n):
            u = u_ep[j]
            m = n - j
            if u[0] < epsilon:
                a = valid[min(int(u[1] * m), m - 1)]
            else:
                a = _best(store._rows.get(key), valid)

            # real transition
            r_ready = ready + data_time[a]
            r_comp = max(r_ready, comp) + exec_time[a]
            miss = 1.0 if r_comp > deadline[a] else 0.0
            reward = -(r_comp + penalty * miss)
            next_key = key | ((a + 1) << (4 * j))
            next_valid = [b for b in valid if b != a]
            _td(store, key, a, reward, next_key, next_valid, lr, gamma)
            real_steps += 1

            if phi > 0:
                k = min(phi, m)
                pool = list(valid)
                for t in range(k):
                    s = t + min(int(u[2 + t] * (m - t)), m - t - 1)
                    pool[t], pool[s] = pool[s], pool[t]
                    b = pool[t]
                    t_ready = ready + data_time[b]
                    t_comp = max(t_ready, comp) + exec_time[b]
                    t_miss = 1.0 if t_comp > deadline[b] else 0.0
                    t_reward = -(t_comp + penalty * t_miss)
                    t_valid = [x for x in valid if x != b]
                    _td(store, key, b, t_reward, key | ((b + 1) << (4 * j)),
                        t_valid, lr, gamma)
                    twin_steps += 1

            total += reward
            orders[e][j] = a
            ready, comp, key, valid = r_ready, r_comp, next_key, next_valid
        returns[e] = total
    return real_steps, twin_steps


def greedy_order(store, n):
    valid = list(range(n))
    key = 0
    order = []
    for j in range(n):
        a = _best(store._rows.get(key), valid)
        order.append(a)
        valid.remove(a)
        key |= (a + 1) << (4 * j)
    return order


def average_stores(stores):
    """Entrywise mean over ``stores`` with absent rows read as zero.

    Summation runs in list order so the result is reproducible bit for bit.
    """
    n = stores[0].n_actions
    for s in stores:
        if s.n_actions != n:
            raise ValueError("cannot average tables with different action counts")
    keys: dict[int, None] = {}
    for s in stores:
        keys.update(dict.fromkeys(s._rows))
    denom = float(len(stores))
    out = QStore(n)
    zero = [0.0] * n
    for key in keys:
        acc = list(stores[0]._rows.get(key, zero))
        for s in stores[1:]:
            row = s._rows.get(key, zero)
            for a in range(n):
                acc[a] = acc[a] + row[a]
        out._rows[key] = [v / denom for v in acc]
    return out


def brute_force(data_time, exec_time, deadline, penalty):
    """Exact minimiser over all permutations by depth-first search.

    Branches are explored in lexicographic order and only strictly better
    completions replace the incumbent, so ties resolve to the smallest order.
    Costs accumulate per position exactly as the objective does.
    """
    n = len(data_time)
    data_time = [float(x) for x in data_time]
    exec_time = [float(x) for x in exec_time]
    deadline = [float(x) for x in deadline]
    penalty = float(penalty)
    best_cost = math.inf
    best_order: list[int] = []
    prefix: list[int] = []
    used = [False] * n

    def dfs(depth, ready, comp, cost):
        nonlocal best_cost, best_order
        if cost >= best_cost:
            return
        if depth == n:
            best_cost = cost
            best_order = list(prefix)
            return
        for a in range(n):
            if used[a]:
                continue
            r = ready + data_time[a]
            c = max(r, comp) + exec_time[a]
            step = c + penalty * (1.0 if c > deadline[a] else 0.0)
            used[a] = True
            prefix.append(a)
            dfs(depth + 1, r, c, cost + step)
            prefix.pop()
            used[a] = False

    dfs(0, 0.0, 0.0, 0.0)
    return best_order, best_cost
