"""Conditional moments of uniformly correlated normal vectors given a complete ranking."""

from .errors import (
    DegenerateModelError,
    DomainError,
    InsufficientAcceptanceError,
    NumericalError,
    SingularCovarianceError,
)
from .model import (
    ConditionalMoments,
    Ranking,
    UniformCorrelationModel,
    apply_ranking,
    covariance_matrix,
    extract_ranking,
    one_factor_sample,
)
from .recursive import (
    QuadratureSpec,
    component_moments,
    conditional_moments,
    conditional_moments_all_n,
    log_ranking_probability,
)

__version__ = "0.1.0"

__all__ = [
    "ConditionalMoments",
    "DegenerateModelError",
    "DomainError",
    "InsufficientAcceptanceError",
    "NumericalError",
    "QuadratureSpec",
    "Ranking",
    "SingularCovarianceError",
    "UniformCorrelationModel",
    "apply_ranking",
    "component_moments",
    "conditional_moments",
    "conditional_moments_all_n",
    "covariance_matrix",
    "extract_ranking",
    "log_ranking_probability",
    "one_factor_sample",
]
