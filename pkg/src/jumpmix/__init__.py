"""Statistical jump model for mixed-type time series with missing data."""
from .dataset import (
    Feature,
    GowerContext,
    MixedSeries,
    compute_context,
    initial_impute,
    load_csv,
    load_schema,
    unconditional_center,
)
from .gower import feature_contribution, gower_distance, gower_matrix
from .jumpmodel import (
    FitResult,
    JumpModelMix,
    decode_states,
    evaluate_objective,
    fit,
    fit_centroids,
    imputation_error,
    impute_step,
)
from .metrics import ari
from .selection import GicReport, bcd, gic, select, select_by_ari

__version__ = "0.1.0"
