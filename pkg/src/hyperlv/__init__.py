"""Higher-order Lotka-Volterra competition networks driven by symmetric tensors."""

from __future__ import annotations

__version__ = "0.1.0"

from .tensor import SymmetricTensor, contract, model_tensor, spectral_radius, classify_structure
from .model import CompetitionModel, vector_field, jacobian
from .equilibria import (Stability, SolverConfig, EquilibriumRecord, NoSolution, ContinuumReport,
                         enumerate_equilibria, solve_winner_set, existence_certificates)
from .dynamics import (IntegratorOptions, Trajectory, Outcome, OutcomeReport, integrate,
                       classify_outcome, check_ratio_law, check_lyapunov_descent, sweep)

__all__ = [
    "__version__", "SymmetricTensor", "contract", "model_tensor", "spectral_radius",
    "classify_structure", "CompetitionModel", "vector_field", "jacobian", "Stability",
    "SolverConfig", "EquilibriumRecord", "NoSolution", "ContinuumReport", "enumerate_equilibria",
    "solve_winner_set", "existence_certificates", "IntegratorOptions", "Trajectory", "Outcome",
    "OutcomeReport", "integrate", "classify_outcome", "check_ratio_law", "check_lyapunov_descent",
    "sweep",
]
