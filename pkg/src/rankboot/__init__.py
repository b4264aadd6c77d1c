"""Bootstrap assessment of how trustworthy an empirical ranking is.

The package estimates the bootstrap distribution of each item's rank, turns
it into rank prediction intervals, tunes the m-out-of-n resample size, and
ships closed-form / Monte Carlo limit laws plus a simulation harness for
checking all of the above.
"""

from .data import (
    Layout,
    PopulationData,
    SampleSizeSummary,
    load_long_csv,
    load_matrix_csv,
    summarize_sizes,
)
from .engine import (
    ConditionalSummary,
    IntervalSet,
    RankDistribution,
    bootstrap_rank_distribution,
    conditional_rank_distribution,
    interval_width_summary,
    prediction_intervals,
)
from .errors import NumericalError, RankbootError, ValidationError
from .estimators import EstimatorSpec, estimate, estimate_all, sigma_hat
from .ranking import rank_estimates
from .resampling import ResamplePlan, Scheme, SizeRule, resolve_sizes
from .tuning import TuningInputs, select_m, tuning_objective

__version__ = "0.1.0"

__all__ = [
    "ConditionalSummary",
    "EstimatorSpec",
    "IntervalSet",
    "Layout",
    "NumericalError",
    "PopulationData",
    "RankDistribution",
    "RankbootError",
    "ResamplePlan",
    "SampleSizeSummary",
    "Scheme",
    "SizeRule",
    "TuningInputs",
    "ValidationError",
    "bootstrap_rank_distribution",
    "conditional_rank_distribution",
    "estimate",
    "estimate_all",
    "interval_width_summary",
    "load_long_csv",
    "load_matrix_csv",
    "prediction_intervals",
    "rank_estimates",
    "resolve_sizes",
    "select_m",
    "sigma_hat",
    "summarize_sizes",
    "tuning_objective",
]
