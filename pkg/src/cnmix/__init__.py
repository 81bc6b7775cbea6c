"""Parsimonious mixtures of multivariate contaminated normal distributions.

Each component is a two-part normal mixture ``alpha N(mu, Sigma) +
(1 - alpha) N(mu, eta Sigma)`` with ``eta > 1``, so mild outliers are absorbed
by the inflated part and flagged as bad points. Scale matrices follow the
fourteen eigen-decomposed structures ``EII`` ... ``VVV``; parameters are
estimated with an ECM algorithm and models are compared by information
criteria.
"""

__version__ = "0.1.0"

from .classification import AgreementTable, DetectionTable, agree, detect, map_assign
from .ecm import FitOptions, FitResult, InitialValues, Psi, Responsibilities, fit_single
from .errors import (CNMixError, DegenerateFitError, EmptyComponentError, NotPositiveDefiniteError,
                     NumericFailureError)
from .grid import GridResult, candidates, fit_grid
from .initialization import STRATEGIES, initialize
from .mvn import ContaminationParams, GaussianParams, dcn, log_dcn, log_dmvnorm, mahalanobis_sq, rcn
from .selection import CRITERIA, NoSuccessfulFitError, best_model, criteria, free_param_count, rank_models
from .simulate import simulate_two_clusters
from .structures import MODELS, Scales, ScatterSet, n_sigma_params, update_scales

__all__ = [
    "AgreementTable", "CNMixError", "CRITERIA", "ContaminationParams", "DegenerateFitError",
    "DetectionTable", "EmptyComponentError", "FitOptions", "FitResult", "GaussianParams", "GridResult",
    "InitialValues", "MODELS", "NoSuccessfulFitError", "NotPositiveDefiniteError", "NumericFailureError",
    "Psi", "Responsibilities", "STRATEGIES", "Scales", "ScatterSet", "agree", "best_model", "candidates",
    "criteria", "dcn", "detect", "fit_grid", "fit_single", "free_param_count", "initialize", "log_dcn",
    "log_dmvnorm", "mahalanobis_sq", "map_assign", "n_sigma_params", "rank_models", "rcn",
    "simulate_two_clusters", "update_scales",
]
