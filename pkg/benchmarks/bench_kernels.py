"""Time the compiled and pure-Python kernels on the same workloads.

    python benchmarks/bench_kernels.py [--tasks 6] [--episodes 2000] [--repeat 3]
"""

import argparse
import time

from twinsched import available_backends
from twinsched.algorithms import train_dtaql, train_dteql, train_ql
from twinsched.core import brute_force_optimal, generate_instance
from twinsched.env import SchedulingEnv
from twinsched.qtable import HyperParams


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tasks", type=int, default=6)
    ap.add_argument("--episodes", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    inst = generate_instance(args.tasks, seed=0)
    big = generate_instance(9, seed=0)
    hp = HyperParams(episodes=args.episodes, phi=20, delta=64)
    jobs = {
        "ql": lambda b: train_ql(SchedulingEnv(inst), hp, 0, b)[1].total_cost[-1],
        "dteql phi=20": lambda b: train_dteql(SchedulingEnv(inst), hp, 0, b)[1].total_cost[-1],
        "dtaql phi=20": lambda b: train_dtaql(SchedulingEnv(inst), hp, 0, b)[1].total_cost[-1],
        "oracle N=9": lambda b: brute_force_optimal(big, backend=b)[1].total_cost,
    }
    backends = available_backends()
    print(f"N={args.tasks} episodes={args.episodes} best of {args.repeat}")
    print(f"{'workload':<16}" + "".join(f"{b:>12}" for b in backends) + "     speedup  same")
    for name, job in jobs.items():
        res = {b: best_of(lambda: job(b), args.repeat) for b in backends}
        cells = "".join(f"{res[b][0]:>11.3f}s" for b in backends)
        if len(backends) == 2:
            fast, slow = res["compiled"], res["python"]
            extra = f"{slow[0] / fast[0]:>11.1f}x  {fast[1] == slow[1]}"
        else:
            extra = ""
        print(f"{name:<16}{cells}{extra}")


if __name__ == "__main__":
    main()
