"""Exception and warning types shared across the package."""


class FracmildError(Exception):
    """Base class for package errors."""


class AliasingError(FracmildError, ValueError):
    """Spatial resolution too low to represent the requested modes."""


class ResourceLimitError(FracmildError, ValueError):
    """Requested construction exceeds the documented size limits."""


class AdmissibilityError(FracmildError, ValueError):
    """Parameter tuple violates the admissibility conditions."""


class SummabilityError(FracmildError, ValueError):
    """Series-noise coefficient law fails its summability check."""


class NoiseGenerationError(FracmildError, RuntimeError):
    """Sampling failed (e.g. covariance factorization did not succeed)."""


class NonlinearityEvalError(FracmildError, RuntimeError):
    """Nodal evaluation of a nonlinearity produced non-finite values."""

    def __init__(self, message, node_index=None):
        super().__init__(message)
        self.node_index = node_index


class ConfigError(FracmildError, ValueError):
    """Run configuration failed validation; carries a field path."""

    def __init__(self, message, field_path=""):
        super().__init__(message)
        self.field_path = field_path


class TruncationWarning(UserWarning):
    """Spectral truncation tail is not negligible for the requested time."""


class AliasingWarning(UserWarning):
    """Operation produced frequency content near the resolution limit."""


class JitterWarning(UserWarning):
    """Covariance matrix needed diagonal jitter before factorization."""


class HolderWarning(UserWarning):
    """A measured Hölder order is too low for a requested operation."""
