"""Exception types shared across the package."""


class CutoffGFFError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CutoffGFFError, ValueError):
    """Invalid geometry, cutoff or run configuration.

    ``key`` names the offending configuration key or index when known.
    """

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key


class UnsupportedGeometryError(ConfigurationError):
    pass


class GeometryMismatchError(CutoffGFFError, ValueError):
    pass


class SupportError(CutoffGFFError, ValueError):
    """A test function violates its support precondition."""

    def __init__(self, message, index=None):
        super().__init__(message if index is None else f"test {index}: {message}")
        self.index = index


class ConstructionFailed(CutoffGFFError):
    """A witness construction did not reach a certified negative value.

    ``value`` is the best (or final) pairing reached and ``details`` holds
    whatever diagnostics the builder collected.
    """

    def __init__(self, message, value=None, **details):
        super().__init__(message)
        self.value = value
        self.details = details


class RankDeficientError(ConstructionFailed):
    pass


class FitFailed(ConstructionFailed):
    def __init__(self, message, residual):
        super().__init__(message, value=None, residual=residual)
        self.residual = residual


class DegenerateWeightsError(CutoffGFFError):
    def __init__(self, message, effective_sample_size):
        super().__init__(message)
        self.effective_sample_size = effective_sample_size
