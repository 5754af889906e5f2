"""Variational Bayes clustering of curves with B-spline cluster means."""

__version__ = "0.1.0"

from .basis import BasisMatrix, BasisSpec, basis_matrix, eval_basis, make_basis
from .core import FitResult, FunctionalDataset, PriorConfig, SpecialFn, VariationalState
from .errors import (
    DataError,
    DomainError,
    FunclustError,
    NotConvergedError,
    NumericFailure,
    ParseError,
    ShapeError,
)
from .initialization import InitConfig, default_priors, kmeans_init, prior_preset
from .metrics import emise, mismatch_rate, summarize, v_measure
from .model1 import fit_model1
from .model2 import fit_model2
from .selection import dic, k_scan
from .simgen import generate, get_scenario, true_mean

__all__ = [
    "BasisMatrix", "BasisSpec", "basis_matrix", "eval_basis", "make_basis",
    "FitResult", "FunctionalDataset", "PriorConfig", "SpecialFn", "VariationalState",
    "DataError", "DomainError", "FunclustError", "NotConvergedError", "NumericFailure",
    "ParseError", "ShapeError",
    "InitConfig", "default_priors", "kmeans_init", "prior_preset",
    "emise", "mismatch_rate", "summarize", "v_measure",
    "fit_model1", "fit_model2", "dic", "k_scan",
    "generate", "get_scenario", "true_mean",
]
