"""Exception types shared across the package."""


class GNSmoothError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(GNSmoothError):
    """Inputs have inconsistent shapes or lengths."""


class NotPositiveDefinite(GNSmoothError):
    """A matrix that must be symmetric positive definite is not.

    ``index`` identifies the offending block (or stack entry) when the
    failure occurred inside a blocked factorization.
    """

    def __init__(self, index: int | None = None, detail: str = ""):
        self.index = index
        msg = "matrix is not positive definite"
        if index is not None:
            msg += f" (block {index})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class LineSearchFailed(GNSmoothError):
    """Backtracking exhausted its budget without sufficient decrease."""


class DegenerateTruth(GNSmoothError):
    """Reference signal has zero norm, relative error is undefined."""


class ConfigError(GNSmoothError):
    """Configuration file is malformed or contains unknown keys."""
