"""Exception and warning types raised across the package."""


class DiffPosError(Exception):
    """Base class for all package errors."""


class EvaluationError(DiffPosError):
    """A model callable produced non-finite values."""

    def __init__(self, message, coordinate=None):
        super().__init__(message)
        self.coordinate = coordinate


class DivergenceError(DiffPosError):
    """Integration produced a non-finite state."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class NormalizationError(DiffPosError):
    """Unit-norm drift of the projective flow exceeded the hard limit."""


class PreconditionError(DiffPosError):
    pass


class ConeConstructionError(DiffPosError):
    pass


class InfeasibleConeError(ConeConstructionError):
    """The cone has no interior (estimated feasibility margin <= 0)."""


class DegenerateVectorError(DiffPosError):
    """A zero tangent vector was passed where a ray is required."""


class PhaseBalancedError(DiffPosError):
    """The phase centroid vanishes, so its angle is undefined."""


class ConfigError(DiffPosError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SamplerWarning(UserWarning):
    """Boundary sampling found no points on a facet expected to be non-empty."""
