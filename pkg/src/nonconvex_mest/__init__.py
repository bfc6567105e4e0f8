"""Composite gradient methods for sparse M-estimation with nonconvex losses and penalties."""

from ._version import __version__
from .loss import (
    CorrectedLinearLoss,
    GlassoLoss,
    GlmLoss,
    build_corrected_gamma,
    build_missing_gamma,
    prediction_error,
    taylor_error,
)
from .penalty import (
    PenaltyKind,
    PenaltySpec,
    capped_l1_majorant,
    make_penalty,
    penalty_value,
    prox_scalar,
    side_function,
)
from .solver import (
    SolverConfig,
    StationaryPoint,
    check_stationarity,
    composite_step,
    contraction_estimate,
    project_g_ball,
    rsc_probe,
    run,
)

__all__ = [
    "__version__",
    "CorrectedLinearLoss", "GlassoLoss", "GlmLoss", "build_corrected_gamma", "build_missing_gamma",
    "prediction_error", "taylor_error",
    "PenaltyKind", "PenaltySpec", "capped_l1_majorant", "make_penalty", "penalty_value", "prox_scalar",
    "side_function",
    "SolverConfig", "StationaryPoint", "check_stationarity", "composite_step", "contraction_estimate",
    "project_g_ball", "rsc_probe", "run",
]
