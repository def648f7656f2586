"""Sample-selection models for exponential-family responses.

A baseline response density f is modulated by a selection probability
G(y) = G0{h(y)}; the package provides maximum-likelihood estimation with
analytic score and Hessian, a profile-likelihood search over the selection
slope with likelihood-ratio confidence intervals, a mechanism and family
catalog, a simulator, and a CSV-driven CLI.
"""

__version__ = "0.1.0"

from ._kernels import HAVE_COMPILED
from .errors import (
    DomainError,
    HessianNotPDError,
    NonConvergenceError,
    SchemaError,
    SelmodError,
    SupportError,
)
from .estimator import (
    AlphaCI,
    FitReport,
    ProfileCurve,
    alpha_confidence,
    inner_maximize,
    profile_maximize,
    standard_errors,
)
from .families import ResponseFamily, bernoulli, negbin, normal, poisson
from .glm import GlmFit, fit_glm, fit_selection_glm
from .likelihood import Dataset, ParamVector, ScoreHessian, evaluate, hessian, loglik, score
from .mechanisms import MECHANISM_KEYS, SelectionMechanism, mechanism
from .modelspec import ModelSpec, load_model_spec, parse_model_spec
from .normalizer import PiResult, pi_binary, pi_count, pi_mgf, pi_normal
from .simulate import SimConfig, esn_density_check, pi_monte_carlo, simulate

__all__ = [
    "AlphaCI",
    "Dataset",
    "DomainError",
    "FitReport",
    "GlmFit",
    "HAVE_COMPILED",
    "HessianNotPDError",
    "MECHANISM_KEYS",
    "ModelSpec",
    "NonConvergenceError",
    "ParamVector",
    "PiResult",
    "ProfileCurve",
    "ResponseFamily",
    "SchemaError",
    "ScoreHessian",
    "SelectionMechanism",
    "SelmodError",
    "SimConfig",
    "SupportError",
    "alpha_confidence",
    "bernoulli",
    "esn_density_check",
    "evaluate",
    "fit_glm",
    "fit_selection_glm",
    "hessian",
    "inner_maximize",
    "loglik",
    "mechanism",
    "negbin",
    "normal",
    "parse_model_spec",
    "pi_binary",
    "pi_count",
    "pi_mgf",
    "pi_monte_carlo",
    "pi_normal",
    "poisson",
    "profile_maximize",
    "score",
    "simulate",
    "standard_errors",
    "load_model_spec",
]
