"""Exception hierarchy shared across the library."""


class GnnsiError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(GnnsiError):
    """Shapes of the supplied arrays are inconsistent."""


class IsolatedNode(GnnsiError):
    """A node with degree zero makes the degree matrix singular."""


class DegenerateSaliency(GnnsiError):
    """All saliency values coincide; min-max normalization is undefined."""


class EmptySide(GnnsiError):
    """The salient or the non-salient node set is empty; no test possible."""


class ZeroVariance(GnnsiError):
    """The variance of the test statistic is at or below the numerical floor."""


class SearchStalled(GnnsiError):
    """The line search failed to advance; indicates a geometry bug."""


class InfeasibleDegree(GnnsiError):
    """Requested average degree cannot be realized on n nodes."""


class CholeskyFailure(GnnsiError):
    """Covariance factorization failed (matrix not positive definite)."""


class CalibrationFailed(GnnsiError):
    """Root bracketing for the noise-family shape parameter failed."""


class RankDeficient(GnnsiError):
    """Sample covariance is rank deficient beyond repair."""


class ParseError(GnnsiError):
    """A structured-text file could not be parsed."""


class VersionMismatch(ParseError):
    """Unsupported format_version in a structured-text file."""


class ShapeMismatch(ParseError):
    """Declared shapes in a weight file do not chain or match payloads."""
