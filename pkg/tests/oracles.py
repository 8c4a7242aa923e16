"""Independent reference computations used only by the tests."""

import heapq
import itertools

import numpy as np


def event_replay(data, complexity, rate, cpu_freq, order):
    """Event-driven replay of one frame: a single uplink feeding a FIFO CPU.

    Returns the completion instant of each queued task, in queue order.
    """
    events = []  # (time, seq, kind, task)
    seq = itertools.count()
    t = 0.0
    for task in order:
        t += data[task] / rate
        heapq.heappush(events, (t, next(seq), "arrive", task))
    queue = []
    busy_until = None
    done = {}
    while events:
        now, _, kind, task = heapq.heappop(events)
        if kind == "arrive":
            queue.append(task)
        else:
            done[task] = now
            busy_until = None
        if busy_until is None and queue:
            nxt = queue.pop(0)
            busy_until = now + data[nxt] * complexity[nxt] / cpu_freq
            heapq.heappush(events, (busy_until, next(seq), "finish", nxt))
    return [done[task] for task in order]


def enumerate_costs(instance):
    """Cost of every permutation, evaluated from scratch with numpy."""
    d = np.array([t.data_bits for t in instance.tasks])
    c = np.array([t.complexity for t in instance.tasks])
    dl = np.array([t.deadline for t in instance.tasks])
    out = {}
    for perm in itertools.permutations(range(instance.n)):
        p = list(perm)
        ready = np.cumsum(d[p] / instance.rate)
        comp = []
        prev = 0.0
        for k, task in enumerate(p):
            prev = max(ready[k], prev) + d[task] * c[task] / instance.cpu_freq
            comp.append(prev)
        comp = np.array(comp)
        out[perm] = comp.sum() + instance.penalty * np.count_nonzero(comp > dl[p])
    return out


def all_prefixes(n):
    states = [()]
    for k in range(1, n + 1):
        states.extend(itertools.permutations(range(n), k))
    return states
