"""Trust inference and propagation for teams of two humans and two robots."""

from .core import (
    ExperiencePair,
    PerformanceObservation,
    TrustParams,
    clamp_rating,
    direct_update,
    expected_trust,
    indirect_update,
    log_beta_pdf,
    sample_beta,
)
from .dataio import ExperimentDataset, load_params, parse_dataset, save_params, write_dataset
from .equilibrium import ScheduleSpec, grid_oracle, newton_solve, solve_equilibrium
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    MisuseError,
    NoEquilibriumError,
    NumericError,
    ParseError,
    TipError,
)
from .evaluation import compare_models, fitting_error_series, holdout_rmse, rmse
from .inference import AgentHistory, FitOptions, ModelVariant, estimate_missing, fit, impute_series
from .simulator import SimConfig, monte_carlo_limit, run_schedule
from .synth import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AgentHistory",
    "ConfigError",
    "DataError",
    "DomainError",
    "ExperiencePair",
    "ExperimentDataset",
    "FitOptions",
    "MisuseError",
    "ModelVariant",
    "NoEquilibriumError",
    "NumericError",
    "ParseError",
    "PerformanceObservation",
    "ScheduleSpec",
    "SimConfig",
    "SynthConfig",
    "TipError",
    "TrustParams",
    "clamp_rating",
    "compare_models",
    "direct_update",
    "estimate_missing",
    "expected_trust",
    "fit",
    "fitting_error_series",
    "generate_synthetic",
    "grid_oracle",
    "holdout_rmse",
    "impute_series",
    "indirect_update",
    "load_params",
    "log_beta_pdf",
    "monte_carlo_limit",
    "newton_solve",
    "parse_dataset",
    "rmse",
    "run_schedule",
    "sample_beta",
    "save_params",
    "solve_equilibrium",
    "write_dataset",
]
