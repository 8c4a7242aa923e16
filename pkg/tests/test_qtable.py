import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinsched.core import generate_instance
from twinsched.env import SchedulingEnv
from twinsched.errors import ContractViolation
from twinsched.qtable import (
    HyperParams,
    QTable,
    average_tables,
    best_action,
    decode_key,
    epsilon_greedy,
    epsilon_schedule,
    state_key,
    td_update,
)

from .oracles import all_prefixes


def test_absent_entries_read_zero(backend):
    t = QTable(4, backend)
    assert t.get((1, 2), 3) == 0.0
    assert len(t) == 0
    assert list(t.row(())) == [0.0] * 4


def test_state_key_roundtrip():
    for s in all_prefixes(4):
        assert decode_key(state_key(s)) == s
    assert len({state_key(s) for s in all_prefixes(5)}) == len(all_prefixes(5))
    assert decode_key(state_key(tuple(range(15)))) == tuple(range(15))


# best_action

def test_best_action_zero_table(backend):
    assert best_action(QTable(4, backend), (), [3, 1, 2]) == 1


def test_best_action_picks_max(backend):
    t = QTable(4, backend)
    t.set((), 2, 5.0)
    t.set((), 0, 1.0)
    assert best_action(t, (), range(4)) == 2


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 0), min_size=4, max_size=4), st.floats(-50, 50))
def test_best_action_shift_invariant(values, shift):
    t, u = QTable(4), QTable(4)
    for a, v in enumerate(values):
        t.set((), a, v)
        u.set((), a, v + shift)
    valid = [0, 1, 2, 3]
    # shifting can merge nearly-equal floats; only compare when gaps survive
    shifted = [v + shift for v in values]
    if len(set(shifted)) == len(set(values)) and np.argmax(shifted) == np.argmax(values):
        assert best_action(t, (), valid) == best_action(u, (), valid)


def test_best_action_empty_valid():
    with pytest.raises(ContractViolation):
        best_action(QTable(3), (), [])


# epsilon_greedy

def test_epsilon_zero_is_greedy():
    t = QTable(5)
    t.set((), 3, 1.0)
    rng = np.random.default_rng(0)
    assert all(epsilon_greedy(t, (), range(5), 0.0, rng) == 3 for _ in range(500))


def test_epsilon_one_is_uniform():
    t = QTable(5)
    t.set((), 3, 1.0)
    rng = np.random.default_rng(1)
    draws = 100_000
    counts = np.bincount([epsilon_greedy(t, (), range(5), 1.0, rng) for _ in range(draws)], minlength=5)
    p = 1 / 5
    sigma = math.sqrt(draws * p * (1 - p))
    assert np.all(np.abs(counts - draws * p) <= 3 * sigma), counts
    chi2 = float(((counts - draws * p) ** 2 / (draws * p)).sum())
    assert chi2 < 18.47  # 0.999 quantile, 4 dof


def test_epsilon_selection_frequencies():
    t = QTable(5)
    t.set((), 2, 1.0)
    rng = np.random.default_rng(2)
    draws, eps = 100_000, 0.1
    counts = np.bincount([epsilon_greedy(t, (), range(5), eps, rng) for _ in range(draws)], minlength=5)
    for a in range(5):
        p = eps / 5 + (1 - eps if a == 2 else 0.0)
        sigma = math.sqrt(draws * p * (1 - p))
        assert abs(counts[a] - draws * p) <= 3 * sigma, (a, counts)
    assert eps / 5 + 1 - eps == pytest.approx(0.92)


# epsilon_schedule

def test_epsilon_schedule_values():
    assert epsilon_schedule(0, 0.1, 5000) == 1.0
    assert epsilon_schedule(10**7, 0.1, 5000) == pytest.approx(0.1, abs=1e-12)
    assert epsilon_schedule(5000, 0.1, 5000) == pytest.approx(0.1 + 0.9 / math.e, rel=1e-12)
    assert epsilon_schedule(5000, 0.1, 5000) == pytest.approx(0.4311, abs=1e-4)
    values = [epsilon_schedule(i) for i in range(0, 50_000, 100)]
    assert all(b < a for a, b in zip(values, values[1:]))
    with pytest.raises(ContractViolation):
        epsilon_schedule(-1)


# td_update

def test_td_terminal_step(backend):
    t = QTable(3, backend)
    assert td_update(t, (), 0, -1.0, (0,), [], HyperParams(lr=0.1)) == pytest.approx(-0.1)


def test_td_fixed_point(backend):
    t = QTable(3, backend)
    t.set((1,), 0, -2.0)
    t.set((1,), 2, -3.5)
    t.set((), 1, -1.0 + -2.0)
    new = td_update(t, (), 1, -1.0, (1,), [0, 2], HyperParams(lr=0.3))
    assert new == -3.0


def test_td_geometric_contraction(backend):
    t = QTable(2, backend)
    hp = HyperParams(lr=0.1)
    target, q0 = -4.0, 0.0
    for k in range(1, 60):
        q = td_update(t, (), 0, target, (0,), [], hp)
        assert abs(q - target) == pytest.approx((1 - hp.lr) ** k * abs(q0 - target), rel=1e-9)


def test_td_bootstraps_over_valid_only(backend):
    t = QTable(3, backend)
    t.set((0,), 1, -5.0)  # action 0 is not valid after (0,), its zero must be ignored
    new = td_update(t, (), 0, -1.0, (0,), [1], HyperParams(lr=1.0))
    assert new == -6.0


# average_tables

def test_average_identical(backend):
    t = QTable(3, backend)
    t.set((), 0, -1.25)
    t.set((2,), 1, -0.5)
    avg = average_tables(t, [t.copy(), t.copy()])
    assert avg.to_dict() == t.to_dict()


def test_average_absent_is_zero(backend):
    t = QTable(3, backend)
    t.set((), 1, 1.0)
    assert average_tables(t, [QTable(3, backend)]).get((), 1) == 0.5


def test_average_matches_dense(backend):
    rng = np.random.default_rng(5)
    n = 4
    states = all_prefixes(n)
    index = {s: i for i, s in enumerate(states)}
    tables, dense = [], []
    for _ in range(5):
        t = QTable(n, backend)
        arr = np.zeros((len(states), n))
        for _ in range(60):
            s = states[rng.integers(len(states))]
            a = int(rng.integers(n))
            v = float(rng.normal())
            t.set(s, a, v)
            arr[index[s], a] = v
        tables.append(t)
        dense.append(arr)
    avg = average_tables(tables[0], tables[1:])
    expected = sum(dense[1:], dense[0]) / 5
    np.testing.assert_array_equal(avg.to_dense(states), expected)


def test_average_rejects_mismatch():
    with pytest.raises(ContractViolation):
        average_tables(QTable(3), [QTable(4)])


# whole-table properties

def test_sparse_matches_dense_under_random_ops(backend):
    rng = np.random.default_rng(8)
    for n in (1, 2, 3, 4):
        states = all_prefixes(n)
        index = {s: i for i, s in enumerate(states)}
        t = QTable(n, backend)
        dense = np.zeros((len(states), n))
        hp = HyperParams(lr=0.25, gamma=0.9)
        for _ in range(400):
            s = states[rng.integers(len(states))]
            free = [a for a in range(n) if a not in s]
            if not free:
                continue
            a = int(rng.choice(free))
            nxt = s + (a,)
            nv = [b for b in range(n) if b not in nxt]
            r = -float(rng.random())
            boot = max((dense[index[nxt], b] for b in nv), default=0.0)
            q = dense[index[s], a]
            dense[index[s], a] = q + hp.lr * ((r + hp.gamma * boot) - q)
            td_update(t, s, a, r, nxt, nv, hp)
        np.testing.assert_array_equal(t.to_dense(states), dense)
        for s in states:
            free = [a for a in range(n) if a not in s]
            if free:
                ref = free[int(np.argmax(dense[index[s], free]))]
                assert best_action(t, s, free) == ref


def test_boundedness_after_training(backend):
    from twinsched.algorithms import train_dteql

    inst = generate_instance(4, seed=2)
    env = SchedulingEnv(inst)
    r_max = max(
        abs(env.step(s, a).reward) for s in all_prefixes(4) for a in env.valid_actions(s)
    )
    policy, _ = train_dteql(env, HyperParams(phi=2, episodes=600), seed=1, backend=backend)
    vals = np.concatenate([policy.table.row(s) for s in policy.table.states()])
    assert vals.max() <= 0.0
    assert vals.min() >= -4 * r_max


def test_dump_load_roundtrip(tmp_path, backend):
    t = QTable(3, backend)
    t.set((), 0, -0.1)
    t.set((2, 0), 1, -1 / 3)
    t.set((1,), 2, -2.5e-17)
    path = tmp_path / "q.txt"
    t.dump(path)
    assert path.read_text().splitlines()[:2] == ["# n_actions=3", "- -0.1 0.0 0.0"]
    assert QTable.load(path, backend).to_dict() == t.to_dict()


def test_hyperparams_validation():
    HyperParams().validate()
    for bad in [dict(lr=0), dict(lr=1.5), dict(gamma=2), dict(eps_min=1), dict(beta=0), dict(delta=0)]:
        with pytest.raises(ContractViolation):
            HyperParams(**bad).validate()
