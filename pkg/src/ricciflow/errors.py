"""Exception types shared across the package."""


class RicciflowError(Exception):
    """Base class for all package errors."""


class ConfigError(RicciflowError):
    """A scenario configuration is malformed or violates a precondition."""


class DegenerateMetricError(RicciflowError):
    """A metric lost positive definiteness beyond the tolerance gate."""


class CurvatureBlowupError(RicciflowError):
    """Curvature or metric eigenvalues left the trustworthy range mid-run."""


class StepUnderflowError(RicciflowError):
    """The stability-limited time step shrank below the useful floor."""


class UnsupportedFamilyError(RicciflowError):
    """An operation was asked of a manifold family that cannot provide it."""


class HypothesisError(RicciflowError):
    """Measured data violates a declared hypothesis of the estimate."""
