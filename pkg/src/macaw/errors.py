"""Exception hierarchy for the macaw package."""


class MacawError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MacawError):
    """Invalid configuration or input data."""


class GrazingIncidence(MacawError):
    """Incidence angle beyond the configured cutoff."""


class SingularProjection(MacawError):
    """Tangent-plane projection matrix is (numerically) singular."""


class CausticCrossing(MacawError):
    """Propagation would move a curvature eigenvalue through a caustic."""


class EmptyPath(MacawError):
    """Path geometry contains no bounces."""


class SamplingExhausted(MacawError):
    """Rejection sampling failed to find a valid point."""


class TooManyRows(MacawError):
    """Requested more sketch rows than the ambient dimension."""


class ShapeMismatch(MacawError):
    """Operand shapes are inconsistent with the operator."""


class ZeroReference(MacawError):
    """Reference matrix has zero norm."""


class ModelOrderTooHigh(MacawError):
    """Requested more paths than the data supports."""


class FeasibleRegionEmpty(MacawError):
    """Curvature feasibility constraints leave no search region."""


class EmptyBox(MacawError):
    """Thresholded spectrum contains no positive mass."""


class NonFinite(MacawError):
    """Numerical blowup during optimization."""


class NoSolution(MacawError):
    """Root bracketing failed."""
