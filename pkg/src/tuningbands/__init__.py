"""Distribution-free confidence bands for random-search tuning curves."""
from ._backend import NAME as backend
from .cdfbands import (
    BandMethod,
    CdfBands,
    LnNull,
    Sample,
    StepCdf,
    dkw_bands,
    ecdf,
    ks_bands,
    ld_bands,
    make_bands,
    simulate_ln_null,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    EmptySampleError,
    ExtrapolationWarning,
    TiesWarning,
    TuningBandsError,
    UnsupportedShapeError,
    VacuousBandWarning,
)
from .numerics import BetaParams, IntervalKind, ProbabilityInterval
from .tuning import (
    ComparisonReport,
    CurveBandSet,
    CurveKind,
    Grade,
    KGrid,
    SupportBounds,
    compare_curves,
    mean_curve_bands,
    median_curve_bands,
    point_estimate_mean_u,
    point_estimate_mean_v,
    point_estimate_median,
    scale_cost,
)

__version__ = "0.1.0"
