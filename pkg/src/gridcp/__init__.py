"""Conformal prediction sets for pixel-grid classifiers.

Turns per-pixel softmax probability maps into set-valued predictions with a
finite-sample marginal coverage guarantee, optionally sharpened by spatial
aggregation of the score field over pixel neighborhoods.  Ships exact
brute-force oracles and a calibrated synthetic generator so the guarantees
can be verified empirically at desk scale.
"""

from .conformal import (
    AggregationConfig,
    CalibrationResult,
    NeighborhoodSpec,
    aggregate,
    calibrate,
    predict_sets,
    quantile_index,
    run_pipeline,
)
from .errors import (
    EmptyCalibrationSet,
    EmptyInput,
    EmptyTestSet,
    GridError,
    HeaderPayloadMismatch,
    InvalidConfig,
    InvariantViolation,
    LabelOutOfRange,
    NonFiniteInput,
    NotEnoughLabeledPixels,
    ShapeMismatch,
    TieDetectedWarning,
    UnlabeledCalPixel,
)
from .experiments import RunConfig, TrialSummary, run_experiment, sample_split, sweep
from .gridio import load_grid, save_grid
from .grids import (
    LabelGrid,
    PredictionSetGrid,
    ProbabilityGrid,
    Role,
    ScoreField,
    SplitMask,
    softmax_ingest,
)
from .maps import render_size_map
from .metrics import (
    MetricReport,
    compute_metrics,
    coverage,
    default_size_bins,
    mean_size,
    oa_aa,
    size_stratified_bins,
    sscv,
)
from .oracle import (
    OracleFixture,
    OracleReport,
    cal_true_label_scores,
    efficiency_equivalence_check,
    exchangeability_permutation_test,
    integrated_set_size,
    integrated_set_size_direct,
    score_exceedance_rate,
    test_all_label_scores,
    test_true_label_scores,
)
from .rng import RandomizationField, derive_seed, uniform_at
from .scores import (
    ScoreFunctionConfig,
    aps_score,
    rank_labels,
    raps_score,
    saps_score,
    score_field,
)
from .synthetic import SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "CalibrationResult",
    "EmptyCalibrationSet",
    "EmptyInput",
    "EmptyTestSet",
    "GridError",
    "HeaderPayloadMismatch",
    "InvalidConfig",
    "InvariantViolation",
    "LabelGrid",
    "LabelOutOfRange",
    "MetricReport",
    "NeighborhoodSpec",
    "NonFiniteInput",
    "NotEnoughLabeledPixels",
    "OracleFixture",
    "OracleReport",
    "PredictionSetGrid",
    "ProbabilityGrid",
    "RandomizationField",
    "Role",
    "RunConfig",
    "ScoreField",
    "ScoreFunctionConfig",
    "ShapeMismatch",
    "SplitMask",
    "SynthConfig",
    "TieDetectedWarning",
    "TrialSummary",
    "UnlabeledCalPixel",
    "aggregate",
    "aps_score",
    "cal_true_label_scores",
    "calibrate",
    "compute_metrics",
    "coverage",
    "default_size_bins",
    "derive_seed",
    "efficiency_equivalence_check",
    "exchangeability_permutation_test",
    "generate_synthetic",
    "integrated_set_size",
    "integrated_set_size_direct",
    "load_grid",
    "mean_size",
    "oa_aa",
    "predict_sets",
    "quantile_index",
    "rank_labels",
    "raps_score",
    "render_size_map",
    "run_experiment",
    "run_pipeline",
    "sample_split",
    "saps_score",
    "save_grid",
    "score_exceedance_rate",
    "score_field",
    "size_stratified_bins",
    "softmax_ingest",
    "sscv",
    "sweep",
    "test_all_label_scores",
    "test_true_label_scores",
    "uniform_at",
]
