import csv
import dataclasses
import math

import pytest

from twinsched.algorithms import TrainingTrace
from twinsched.core import DistParams, ScheduleReport
from twinsched.errors import ConfigError, ContractViolation, OracleInfeasible
from twinsched.harness import (
    SUMMARY_HEADER,
    TRACE_HEADER,
    ExperimentConfig,
    SummaryRow,
    build_config,
    convergence_time,
    normalized_reward,
    read_config_file,
    run_experiment,
    run_sweep,
    write_reports,
)


def make_trace(costs, interval=8):
    tr = TrainingTrace()
    for i, c in enumerate(costs, start=1):
        tr.record(i * interval, 0.5, ScheduleReport((c,), c, 0, c), 0)
    return tr


SMALL = ExperimentConfig(algo="ql", n_tasks=3, episodes=2000, num_instances=3, phi=2, delta=64)


# normalized_reward

def test_normalized_reward_values():
    assert normalized_reward(3.0, 3.0) == 1.0
    assert normalized_reward(4.0, 2.0) == 0.5


@pytest.mark.parametrize("achieved,oracle", [(1.0, 2.0), (0.0, 0.0), (-1.0, -2.0)])
def test_normalized_reward_rejects(achieved, oracle):
    with pytest.raises(ContractViolation):
        normalized_reward(achieved, oracle)


# convergence_time

def test_convergence_constant_trace():
    assert convergence_time(make_trace([2.0] * 30)) == 8


def test_convergence_never_stable():
    assert convergence_time(make_trace([2.0, 3.0] * 20)) is None
    # settles, but with fewer than `window` evaluations left
    assert convergence_time(make_trace([5.0] * 25 + [2.0] * 9)) is None


def test_convergence_step_fixture():
    costs = [3.0] * 11 + [2.0] * 40  # final value from evaluation 12, i.e. episode 96
    assert convergence_time(make_trace(costs), window=10, tolerance=0.01) == 96


def test_convergence_tolerance_band():
    costs = [3.0] * 5 + [2.015, 2.0, 2.01] * 10
    assert convergence_time(make_trace(costs), tolerance=0.01) == 48
    assert convergence_time(make_trace(costs), tolerance=0.005) is None


def test_convergence_requires_data():
    with pytest.raises(ValueError):
        convergence_time(TrainingTrace())


# run_experiment

def test_ql_tiny_instance_is_optimal():
    row, results = run_experiment(dataclasses.replace(SMALL, num_instances=1, episodes=5000))
    assert row.normalized_reward == 1.0
    assert results[0].final.total_cost == results[0].oracle.total_cost


def test_aggregation_is_plain_mean():
    cfg = dataclasses.replace(SMALL, algo="dteql", episodes=300,
                              dist=DistParams(deadline_low=0.1, deadline_high=0.6))
    row, results = run_experiment(cfg)
    norms = [r.oracle.total_cost / r.final.total_cost for r in results]
    assert row.normalized_reward == sum(norms) / len(norms)
    assert row.avg_delay == sum(r.final.avg_delay for r in results) / len(results)
    assert row.miss_ratio == sum(r.final.misses for r in results) / (3 * len(results))
    assert [r.seed for r in results] == [0, 1, 2]
    assert all(r.real_steps == 300 * 3 for r in results)
    assert all(r.twin_steps == 300 * (2 + 2 + 1) for r in results)


def test_reports_are_byte_identical(tmp_path):
    for algo in ("ql", "dtaql", "dteql"):
        cfg = dataclasses.replace(SMALL, algo=algo, episodes=400)
        outs = []
        for k in range(2):
            row, results = run_experiment(cfg)
            d = tmp_path / f"{algo}{k}"
            write_reports([row], [(algo, cfg.phi_label, r) for r in results], d)
            outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
        assert outs[0] == outs[1]
        assert len(outs[0]) == 1 + cfg.num_instances


def test_dtaql_parallel_reports_match_sequential(tmp_path):
    cfg = dataclasses.replace(SMALL, algo="dtaql", episodes=400, phi=3)
    files = []
    for par in (False, True):
        row, results = run_experiment(dataclasses.replace(cfg, parallel=par))
        d = tmp_path / str(par)
        write_reports([row], [("dtaql", 3, r) for r in results], d)
        files.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert files[0] == files[1]


def test_oracle_limit_in_experiment():
    with pytest.raises(OracleInfeasible, match="--no-normalize"):
        run_experiment(dataclasses.replace(SMALL, n_tasks=11))
    row, results = run_experiment(
        dataclasses.replace(SMALL, n_tasks=11, normalize=False, episodes=16, num_instances=1)
    )
    assert math.isnan(row.normalized_reward)
    assert results[0].oracle is None


@pytest.mark.parametrize("bad", [dict(algo="sarsa"), dict(episodes=0), dict(tolerance=1.0),
                                 dict(algo="dteql", phi=0), dict(lr=0.0)])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        run_experiment(dataclasses.replace(SMALL, **bad))


# write_reports

def test_empty_summary(tmp_path):
    write_reports([], [], tmp_path)
    assert (tmp_path / "summary.csv").read_text() == ",".join(SUMMARY_HEADER) + "\n"


def test_report_roundtrip(tmp_path):
    cfg = dataclasses.replace(SMALL, algo="dteql", episodes=240)
    row, results = run_experiment(cfg)
    write_reports([row], [("dteql", 2, r) for r in results], tmp_path)
    with (tmp_path / "summary.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == SUMMARY_HEADER
    assert rows[0]["algo"] == "dteql" and int(rows[0]["seeds"]) == 3
    assert float(rows[0]["avg_delay"]) == pytest.approx(row.avg_delay, rel=1e-5)
    assert float(rows[0]["normalized_reward"]) == pytest.approx(row.normalized_reward, rel=1e-5)
    conv = rows[0]["convergence_episodes"]
    assert conv == "not converged" if row.convergence_episodes is None else int(conv) == row.convergence_episodes
    with (tmp_path / "trace_dteql_2_1.csv").open() as fh:
        trace_rows = list(csv.DictReader(fh))
    assert list(trace_rows[0]) == TRACE_HEADER
    tr = results[1].trace
    assert [int(r["episode"]) for r in trace_rows] == tr.episode
    for r, cost, eps in zip(trace_rows, tr.total_cost, tr.epsilon):
        assert float(r["total_cost"]) == pytest.approx(cost, rel=1e-5)
        assert float(r["epsilon"]) == pytest.approx(eps, rel=1e-5)
        assert 0 < float(r["normalized_reward"]) <= 1


def test_write_reports_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match=str(blocker)):
        write_reports([], [], blocker / "sub")


def test_sweep_rows(tmp_path):
    rows, traces = run_sweep(dataclasses.replace(SMALL, episodes=200, num_instances=2),
                             ["ql", "dteql"], [1, 3], tmp_path)
    assert [(r.algo, r.phi) for r in rows] == [("ql", 0), ("dteql", 1), ("dteql", 3)]
    assert len(traces) == 6
    assert (tmp_path / "trace_dteql_3_1.csv").exists()


# config files

def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# experiment\nalgo = dtaql\nn-tasks = 5   # inline\nphi=4\n"
                 "instances = 7\nseed = 100\nrate = 2e7\nno-normalize = true\n\n")
    settings = read_config_file(p)
    cfg = build_config({**settings, "phi": 9})
    assert (cfg.algo, cfg.n_tasks, cfg.phi, cfg.num_instances, cfg.base_seed) == ("dtaql", 5, 9, 7, 100)
    assert cfg.dist.rate == 2e7 and cfg.dist.penalty == 10.0
    assert cfg.normalize is False


@pytest.mark.parametrize("text", ["algo dteql\n", "frobnicate = 3\n", "phi = many\n"])
def test_config_file_errors(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError):
        build_config(read_config_file(p))


def test_summary_row_fields_match_header():
    assert [f.name for f in dataclasses.fields(SummaryRow)] == SUMMARY_HEADER
