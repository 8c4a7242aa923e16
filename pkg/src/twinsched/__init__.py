"""Q-learning schedulers for offloaded edge tasks, with optional twin-generated experience."""

from ._backend import available as available_backends, default_name as default_backend
from .algorithms import (
    TrainedPolicy,
    TrainingTrace,
    evaluate_policy,
    train_dtaql,
    train_dteql,
    train_ql,
)
from .core import (
    DistParams,
    Instance,
    ScheduleReport,
    Task,
    brute_force_optimal,
    completion_times,
    generate_instance,
    objective,
    ready_time,
)
from .env import SchedulingEnv, Transition
from .errors import ConfigError, ContractViolation, OracleInfeasible
from .harness import ExperimentConfig, convergence_time, normalized_reward, run_experiment
from .qtable import (
    HyperParams,
    QTable,
    average_tables,
    best_action,
    epsilon_greedy,
    epsilon_schedule,
    td_update,
)

__version__ = "0.1.0"
