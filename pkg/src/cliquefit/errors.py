"""Exception types shared across the package."""


class CliquefitError(Exception):
    """Base class for all package-specific errors."""


class RankDeficientError(CliquefitError):
    """A matrix that must be full rank is numerically rank deficient."""


class DegenerateGeometryError(CliquefitError):
    """Input geometry does not determine a unique solution (e.g. collinear support)."""


class DegenerateSubsetError(CliquefitError):
    """A measurement subset is unusable for its invariant (coincident or non-collinear points)."""


class TooFewMeasurementsError(CliquefitError):
    """Fewer measurements than the invariant arity; pruning cannot run."""


class GraphTooLargeError(CliquefitError):
    """Graph exceeds the size limit of an exhaustive algorithm."""


class InputFormatError(CliquefitError):
    """A measurement file or payload is malformed; message names the offending field."""
