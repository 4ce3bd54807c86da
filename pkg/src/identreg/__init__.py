"""Identifiable parameters and dimensionality-reduction regression under ill-posedness."""

__version__ = "0.1.0"

from .algorithms import Kind, SolutionRule, check_adaptive, check_parsimonious, coefficients_at_dof, fit_at_dof, run
from .population import (
    PopulationPair,
    identifiable_parameter,
    identify,
    least_squares,
    perturbation_size,
    rel_eps_bound,
    relative_prediction_risk,
    relevant_subspace,
    truncation_ladder,
)
from .spectral import DEFAULT_TOL, SymPsd, ToleranceConfig, condition_number, effective_rank, pseudoinverse
from .subspaces import Subspace, krylov_basis, principal_angle

__all__ = [
    "__version__", "Kind", "SolutionRule", "check_adaptive", "check_parsimonious", "coefficients_at_dof",
    "fit_at_dof", "run", "PopulationPair", "identifiable_parameter", "identify", "least_squares",
    "perturbation_size", "rel_eps_bound", "relative_prediction_risk", "relevant_subspace", "truncation_ladder",
    "DEFAULT_TOL", "SymPsd", "ToleranceConfig", "condition_number", "effective_rank", "pseudoinverse",
    "Subspace", "krylov_basis", "principal_angle",
]
