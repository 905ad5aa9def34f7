"""Exception hierarchy. Each class maps onto a CLI exit code."""


class MemLQRError(Exception):
    exit_code = 3


class InvalidConstant(MemLQRError, ValueError):
    """Nonpositive physical constant or non-PD weight."""

    exit_code = 2


class OmegaInfeasible(MemLQRError, ValueError):
    """Requested decay rate is at or above kappa + 1/eta; no bounded gain exists."""

    exit_code = 2


class MaxIndexTooSmall(MemLQRError):
    """Mode enumeration stopped before the stable real branch was reached."""

    exit_code = 2


class DomainMismatch(MemLQRError, ValueError):
    exit_code = 2


class HamiltonianAxisEigenvalue(MemLQRError):
    """Hamiltonian matrix has (numerically) an eigenvalue on the imaginary axis."""

    exit_code = 3


class NoConvergence(MemLQRError):
    exit_code = 3


class SingularStepMatrix(MemLQRError):
    exit_code = 3
