"""Temporal complexity of gradient trajectories.

Prediction-based path-length, predictability index (kappa), predictable rank
of gradient increments, seeded random projections, and optimisation testbeds
that check the associated regret and stationarity bounds.
"""
from .errors import (
    ConfigError,
    DimensionError,
    DivergenceError,
    GradTraceError,
    InputError,
    NumericalFailure,
    PreconditionError,
    SpectrumError,
    TraceCorruptionError,
    TraceFormatError,
    TraceValidationError,
    UndefinedMetricError,
)
from .metrics import (
    PredictabilityReport,
    WindowedKappaSeries,
    magnitude_ratio_diagnostic,
    path_length,
    predictability_index,
    predictability_report,
    windowed_kappa,
)
from .predictors import (
    PredictionSeries,
    PredictorConfig,
    ResidualSeries,
    residuals,
    run_predictor,
)
from .projection import (
    DistortionStats,
    ProjectionSpec,
    apply_projection,
    distortion_check,
    load_projection,
    make_projection,
    save_projection,
)
from .spectral import (
    IncrementMatrix,
    RankProfile,
    Spectrum,
    best_rank_r_residual,
    increment_matrix,
    predictable_rank,
    rank_profile,
    singular_spectrum,
    tail_energy,
    windowed_rank,
)
from .trace import GradientTrace, TraceDiagnostics, load_trace, save_trace, validate_trace

__version__ = "0.1.0"
