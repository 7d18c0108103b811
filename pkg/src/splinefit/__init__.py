"""Tensor-product B-spline surface fitting with LSPIA and AdagradLSPIA."""

from splinefit.basis import (
    BasisRow,
    KnotVector,
    ParamGrid,
    TensorBasis,
    averaging_knots,
    basis_row,
    eval_surface,
    find_span,
    sample_surface,
    uniform_params,
)
from splinefit.errors import (
    DivergenceError,
    OracleSizeError,
    OutOfDomainError,
    RankDeficientError,
    SplineFitError,
)
from splinefit.fitting import (
    FitConfig,
    FitReport,
    FitState,
    Method,
    adagrad_step,
    adjusting_vectors,
    fitting_error,
    lspia_step,
    make_problem,
    residuals,
    run_fit,
)

__version__ = "0.1.0"

__all__ = [
    "BasisRow",
    "KnotVector",
    "ParamGrid",
    "TensorBasis",
    "averaging_knots",
    "basis_row",
    "eval_surface",
    "find_span",
    "sample_surface",
    "uniform_params",
    "DivergenceError",
    "OracleSizeError",
    "OutOfDomainError",
    "RankDeficientError",
    "SplineFitError",
    "FitConfig",
    "FitReport",
    "FitState",
    "Method",
    "adagrad_step",
    "adjusting_vectors",
    "fitting_error",
    "lspia_step",
    "make_problem",
    "residuals",
    "run_fit",
]
