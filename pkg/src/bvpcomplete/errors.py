"""Exception types shared across the package."""


class BvpError(Exception):
    """Base class for all package errors."""


class DimensionError(BvpError):
    """Matrix or vector dimensions do not match the operation's contract."""


class SingularMatrixError(BvpError):
    """A linear solve hit a matrix that is singular to working tolerance."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class AdmissibilityError(BvpError):
    """A direction z lies on one of the critical lines, so column picks
    are undefined.  ``block`` names the offending block index."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block


class ApplicabilityError(BvpError):
    """Operation preconditions (real weights, zero potential, pattern
    match, ...) are not satisfied for this problem."""


class StructureError(BvpError):
    """Boundary conditions do not have the structural shape an operation
    requires (e.g. not separated into per-endpoint rows)."""


class StiffnessError(BvpError):
    """Adaptive step size underflowed during integration."""

    def __init__(self, message, lam=None):
        super().__init__(message)
        self.lam = lam


class SearchBudgetError(BvpError):
    """Eigenvalue search exceeded its cell budget; carries partial results."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class ConstructionError(BvpError):
    """Root-chain construction could not reach the multiplicity target."""


class PairingError(BvpError):
    """Primary and adjoint eigenvalue clusters could not be matched."""
