"""Exception types raised by the covclust library."""


class CovClustError(Exception):
    """Base class for all covclust errors."""


class InvalidMatrix(CovClustError):
    """Input is not a finite, square, symmetric matrix."""


class NotPSD(CovClustError):
    """Matrix has negative eigenvalues beyond the clipping budget."""


class DimMismatch(CovClustError):
    """Operands have incompatible dimensions."""


class EmptySet(CovClustError):
    """A weighted set has no members with positive weight."""


class InvalidParam(CovClustError):
    """A parameter is outside its admissible range."""


class InvalidDistance(CovClustError):
    """A distance matrix entry is negative or non-finite."""


class DegenerateDistances(CovClustError):
    """The entropy target is unattainable for the given distance matrix."""


class TooFewItems(CovClustError):
    """Fewer items than clusters (or than the reduced subsample size)."""


class TooFewCurves(CovClustError):
    """A group holds fewer than two curves."""


class NeedsTwoClusters(CovClustError):
    """The operation is undefined for a single cluster."""


class RequiresRawCurves(CovClustError):
    """The operation needs raw curves, not precomputed covariances."""


class InputFormatError(CovClustError):
    """A data file does not conform to the expected format."""
