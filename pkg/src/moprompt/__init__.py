"""Multi-objective prompt optimization on synthetic conflicting rewards.

The package trains a small token-sequence policy against vector-valued
reward environments and compares four update rules: averaged rewards,
expected product of rewards, hypervolume improvement, and multiple
gradient descent on the per-objective losses.
"""

from .envs import EnvSpec, OutputSample, builtin_env, dump_samples, rollout
from .geometry import dominates, hypervolume, hypervolume_mc, pareto_front
from .mgda import DescentResult, mgda_step, min_norm_point
from .policy import (
    PolicyConfig,
    PolicyParams,
    PromptSample,
    init_policy,
    load_checkpoint,
    param_count,
    per_objective_loss_grads,
    sample_prompts,
    save_checkpoint,
    sql_loss_and_grad,
)
from .rewards import (
    EvaluationMetrics,
    RewardAssignment,
    aggregate_average,
    aggregate_hvi,
    aggregate_product,
    evaluation_metrics,
)
from .runner import (
    ConfigError,
    MetricsRecord,
    TrainConfig,
    TrainResult,
    compare_methods,
    config_from_dict,
    emit_scatter,
    read_metrics_csv,
    train,
    write_metrics_csv,
)
from .seeding import derive_seed, unit_floats

__version__ = "0.1.0"

__all__ = [
    "EnvSpec",
    "OutputSample",
    "builtin_env",
    "dump_samples",
    "rollout",
    "dominates",
    "hypervolume",
    "hypervolume_mc",
    "pareto_front",
    "DescentResult",
    "mgda_step",
    "min_norm_point",
    "PolicyConfig",
    "PolicyParams",
    "PromptSample",
    "init_policy",
    "load_checkpoint",
    "param_count",
    "per_objective_loss_grads",
    "sample_prompts",
    "save_checkpoint",
    "sql_loss_and_grad",
    "EvaluationMetrics",
    "RewardAssignment",
    "aggregate_average",
    "aggregate_hvi",
    "aggregate_product",
    "evaluation_metrics",
    "ConfigError",
    "MetricsRecord",
    "TrainConfig",
    "TrainResult",
    "compare_methods",
    "config_from_dict",
    "emit_scatter",
    "read_metrics_csv",
    "train",
    "write_metrics_csv",
    "derive_seed",
    "unit_floats",
    "__version__",
]
