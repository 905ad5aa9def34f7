"""LQR-based decay-rate stabilization of the heat equation with memory.

The heat equation with memory is rewritten as a coupled PDE/ODE system on
X = L^2 x H^1_0, discretized by Galerkin projection, and stabilized with
gains obtained from finite-dimensional Riccati equations.
"""

from memlqr.errors import (
    DomainMismatch,
    HamiltonianAxisEigenvalue,
    InvalidConstant,
    MaxIndexTooSmall,
    MemLQRError,
    NoConvergence,
    OmegaInfeasible,
    SingularStepMatrix,
)
from memlqr.model import (
    AEigenpair,
    DomainSpec,
    InputShape,
    LaplacianMode,
    ModelParams,
    a_eigenpair,
    laplacian_modes,
    omega_zero,
    unstable_index_set,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "AEigenpair",
    "DomainMismatch",
    "DomainSpec",
    "HamiltonianAxisEigenvalue",
    "InputShape",
    "InvalidConstant",
    "LaplacianMode",
    "MaxIndexTooSmall",
    "MemLQRError",
    "ModelParams",
    "NoConvergence",
    "OmegaInfeasible",
    "SingularStepMatrix",
    "a_eigenpair",
    "laplacian_modes",
    "omega_zero",
    "unstable_index_set",
    "validate",
]
