"""Markov-switching distributional regression (GAMLSS-style) for time
series whose hidden-state transition probabilities depend on covariates.

The high-level entry point is :class:`MarkovSwitchingGAMLSS`; the
underlying building blocks (splines, families, transition models, the
likelihood engine, smoothness selection, simulation) are importable from
their submodules.
"""

from .data import TimeSeriesFrame, load_frame
from .estimator import MarkovSwitchingGAMLSS
from .exceptions import (
    ConfigError,
    DataError,
    DomainError,
    FitError,
    LikelihoodError,
    MsgamlssError,
    NumericError,
    ParameterError,
    StationaryError,
)
from .families import Family, get_family
from .inference import (
    FittedModel,
    ParameterCurves,
    PseudoResiduals,
    gradient,
    log_likelihood,
    penalized_nll,
    predict_parameters,
    pseudo_residuals,
    viterbi,
)
from .model import (
    InitialDistribution,
    LinearTerm,
    ModelSpec,
    ModelStructure,
    Predictor,
)
from .markov import TransitionModel, stationary, tpm_from_eta
from .smoothing import OptimizerConfig, fit_penalized, penalized_hessian, select_smoothness
from .splines import BasisBundle, SmoothSpec, apply_centering, build_basis
from .uncertainty import (
    CurveBand,
    PosteriorSampleSet,
    effect_band,
    sample_posterior,
    transition_band,
)

__version__ = "0.1.0"

__all__ = [
    "MarkovSwitchingGAMLSS",
    "TimeSeriesFrame",
    "load_frame",
    "ModelSpec",
    "ModelStructure",
    "Predictor",
    "LinearTerm",
    "SmoothSpec",
    "InitialDistribution",
    "Family",
    "get_family",
    "BasisBundle",
    "build_basis",
    "apply_centering",
    "TransitionModel",
    "tpm_from_eta",
    "stationary",
    "FittedModel",
    "ParameterCurves",
    "PseudoResiduals",
    "log_likelihood",
    "penalized_nll",
    "gradient",
    "viterbi",
    "pseudo_residuals",
    "predict_parameters",
    "OptimizerConfig",
    "fit_penalized",
    "select_smoothness",
    "penalized_hessian",
    "PosteriorSampleSet",
    "CurveBand",
    "sample_posterior",
    "effect_band",
    "transition_band",
    "MsgamlssError",
    "ConfigError",
    "DataError",
    "DomainError",
    "ParameterError",
    "NumericError",
    "LikelihoodError",
    "StationaryError",
    "FitError",
    "__version__",
]
