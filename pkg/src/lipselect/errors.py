"""Exception types shared across the package.

The CLI maps these onto its exit-status contract: document/schema problems,
numeric precondition violations, and internal convergence or degeneracy
failures are distinguishable by type.
"""


class LipselectError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(LipselectError):
    """An input document does not match its expected JSON schema."""


class IdentifierError(LipselectError):
    """A point identifier is unknown to the space it was used with."""


class ConfigurationError(LipselectError):
    """An object is structurally unusable (e.g. explicit metric without a
    distance matrix, or an empty sphere table)."""


class ShapeError(LipselectError):
    """Dimension mismatch between vectors, bodies, or operators."""


class PreconditionError(LipselectError):
    """A documented operation precondition was violated by the caller."""


class ParameterError(PreconditionError):
    """A numeric parameter is outside its admissible range."""


class RankDeficiencyError(PreconditionError):
    """A matrix expected to have full row rank is (numerically) rank
    deficient."""


class ConvergenceError(LipselectError):
    """An iterative solve exhausted its budget.  Carries the final residual."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = float(residual)


class RateError(LipselectError):
    """An anchored selection violates its strong pointwise bound.  Carries
    the worst sample point and the excess over the allowed rate."""

    def __init__(self, message, witness, excess):
        super().__init__(message)
        self.witness = witness
        self.excess = float(excess)


class DegenerateRadiusError(LipselectError):
    """The halving search for an adjustment radius fell below its floor."""


class ResolutionError(LipselectError):
    """No ball in the requested radius schedule contains a point other than
    its center; the sample is too coarse for the requested estimate."""


class InvariantViolationError(LipselectError):
    """A structural invariant that the construction should guarantee was
    found violated (e.g. overlapping adjustment supports)."""
