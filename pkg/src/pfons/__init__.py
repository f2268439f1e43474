"""Projection-free online Newton step over linear optimization oracles.

The package plays exp-concave smooth online convex optimization in blocks:
a dense or sketched quadratic metric accumulates block gradient sums, a
Newton step proposes the next anchor, and an approximately-feasible
projection built from Frank-Wolfe separation turns anchors into playable
feasible points using only linear-oracle calls.
"""

from .afp import AFPResult, approx_feasible_projection, pull_iteration_bound, pull_step
from .baselines import (
    BaselineReport,
    project_ball_metric,
    run_baseline_exact_ons_ball,
    run_baseline_ogd,
)
from .config import RunConfig, load_config, parse_config
from .errors import CapExceededError, ConfigError, ContractViolationError
from .losses import (
    LogPortfolioLoss,
    QuadraticLoss,
    batch_values,
    check_curvature,
    stream_constants,
    total_value_and_grad,
)
from .metrics import ExactMetric, logdet_ratio
from .ons import (
    BlockRow,
    OfflineSolution,
    Params,
    RunReport,
    compute_regret,
    loo_call_budget,
    offline_best,
    run_online,
    theoretical_regret_bound,
    tune_params_fullrank,
    tune_params_lowdim,
    tuned_loo_budget,
    validate_params,
)
from .seeding import rng_for
from .separation import (
    PROXIMAL,
    SEPARATING,
    SeparationOutcome,
    fw_iteration_bound,
    line_search_sigma,
    separate_or_approach,
)
from .sets import Box, FeasibleSet, L1Ball, L2Ball, OracleCounter, Simplex, make_set
from .sketch import SketchMetric
from .experiment import (
    CheckResult,
    ExperimentResult,
    generate_lowdim_stream,
    generate_portfolio_stream,
    run_experiment,
    run_sweep,
    verify_run,
)

__version__ = "0.1.0"

__all__ = [
    "AFPResult",
    "approx_feasible_projection",
    "pull_iteration_bound",
    "pull_step",
    "BaselineReport",
    "project_ball_metric",
    "run_baseline_exact_ons_ball",
    "run_baseline_ogd",
    "RunConfig",
    "load_config",
    "parse_config",
    "CapExceededError",
    "ConfigError",
    "ContractViolationError",
    "LogPortfolioLoss",
    "QuadraticLoss",
    "batch_values",
    "check_curvature",
    "stream_constants",
    "total_value_and_grad",
    "ExactMetric",
    "logdet_ratio",
    "BlockRow",
    "OfflineSolution",
    "Params",
    "RunReport",
    "compute_regret",
    "loo_call_budget",
    "offline_best",
    "run_online",
    "theoretical_regret_bound",
    "tune_params_fullrank",
    "tune_params_lowdim",
    "tuned_loo_budget",
    "validate_params",
    "rng_for",
    "PROXIMAL",
    "SEPARATING",
    "SeparationOutcome",
    "fw_iteration_bound",
    "line_search_sigma",
    "separate_or_approach",
    "Box",
    "FeasibleSet",
    "L1Ball",
    "L2Ball",
    "OracleCounter",
    "Simplex",
    "make_set",
    "SketchMetric",
    "CheckResult",
    "ExperimentResult",
    "generate_lowdim_stream",
    "generate_portfolio_stream",
    "run_experiment",
    "run_sweep",
    "verify_run",
]
