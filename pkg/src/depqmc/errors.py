"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class UnsupportedDimensionError(DimensionError):
    """Requested dimension exceeds the available Sobol' direction numbers."""


class DomainError(ValueError):
    """A numeric argument lies outside the mathematical domain."""


class DegenerateMarginError(ValueError):
    """A data column carries no variation, so a margin cannot be estimated."""


class ParseError(ValueError):
    """A data file failed validation; the message carries the location."""


class FitError(RuntimeError):
    """An iterative fit did not converge.

    Carries the best iterate found so far in ``best`` and, when available,
    an objective history in ``history``.
    """

    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history
