"""Mean-field dynamics: states, equations of motion and integration."""

from .equations import CollectiveModel, DispersiveModel, collective_rhs, dispersive_rhs
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, Trajectory, evolve_ensemble, integrate
from .radau import BlockDiagonal, IntegrationError, radau
from .state import (BlochState, EnsembleState, apply_rotation, pairwise_sum,
                    rotation_matrix)

__all__ = [
    "BlochState", "EnsembleState", "Trajectory", "CollectiveModel", "DispersiveModel",
    "collective_rhs", "dispersive_rhs", "integrate", "evolve_ensemble", "apply_rotation",
    "pairwise_sum", "rotation_matrix", "radau", "BlockDiagonal", "IntegrationError",
    "DEFAULT_RTOL", "DEFAULT_ATOL",
]
