"""Penalized-spline additive models with random-effect smooths.

Submodules: ``basis`` builds spline and random-effect design blocks,
``fitting`` solves the penalized least-squares problem and selects smoothing
parameters by GCV, ``model`` composes them into full fits with AIC, partial
effects, and prediction.
"""

from .basis import (
    BasisError,
    DegenerateRange,
    RandomEffectBlock,
    SmoothBasis,
    TooFewDistinctValues,
    build_random_block,
    build_spline_basis,
)
from .fitting import (
    DesignBlock,
    PenalizedFit,
    SelectedLambda,
    SingularSystem,
    fit_penalized,
    gcv_score,
    select_lambda,
)
from .model import (
    FitError,
    FittedGam,
    IncomparableModels,
    PartialEffect,
    TermNotFound,
    TermNotSmooth,
    UnseenFactorLevel,
    VariableNotFound,
    delta_aic,
    fit_gam,
    fitted_gam_to_json,
    partial_effect,
    partial_effect_to_csv,
    predict,
)

__all__ = [
    "BasisError",
    "DegenerateRange",
    "DesignBlock",
    "FitError",
    "FittedGam",
    "IncomparableModels",
    "PartialEffect",
    "PenalizedFit",
    "RandomEffectBlock",
    "SelectedLambda",
    "SingularSystem",
    "SmoothBasis",
    "TermNotFound",
    "TermNotSmooth",
    "TooFewDistinctValues",
    "UnseenFactorLevel",
    "VariableNotFound",
    "build_random_block",
    "build_spline_basis",
    "delta_aic",
    "fit_gam",
    "fitted_gam_to_json",
    "gcv_score",
    "partial_effect",
    "partial_effect_to_csv",
    "predict",
    "select_lambda",
    "fit_penalized",
]
