"""Sparse projected averaged regression for p >> n linear models."""
from .core import Dataset, Standardization, Truth, holp, ols_reduced, ridge_dual, spd_solve, standardize
from .errors import (
    AllZeroValues,
    ConfigError,
    DegenerateDenominator,
    DegenerateReducedFit,
    DimensionMismatch,
    FoldTooSmall,
    InconsistentTau,
    InsufficientPositiveScores,
    NonPositiveDefinite,
    SingularGram,
    SingularSystem,
    SparError,
    ZeroVarianceResponse,
)
from .estimator import SparConfig, SparModel, cross_validate, fit_ensemble, predict, threshold
from .metrics import EvalResult, evaluate, mspe, rmspe, selection_scores
from .projection import (
    CwProjection,
    DenseProjection,
    active_ratio_moments,
    apply_projection,
    cw_projection,
    gaussian_projection,
    inverse_preimage_moments,
    project_coefficient,
    sparse_projection,
    theorem1_bound,
)
from .screening import (
    ScoreSource,
    ScreeningScores,
    holp_scores,
    marginal_correlation_scores,
    probabilistic_screen,
    ridge_cv_scores,
    ridge_scores,
    screening_report,
    top_k,
)
from .simgen import CovarianceSpec, SimulationDesign, generate, simulate

__version__ = "0.1.0"
