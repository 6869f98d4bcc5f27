"""Exception types shared across the package."""


class PeftBoError(Exception):
    """Base class for all engine errors."""


class InvalidConfigurationError(PeftBoError, ValueError):
    """Configuration violates the search-space contract."""


class EncodingError(PeftBoError, ValueError):
    """Vector cannot be decoded back onto the size grid."""


class DimensionError(PeftBoError, ValueError):
    """Matrix or vector shapes are inconsistent."""


class BenchmarkError(PeftBoError, ValueError):
    """Tabular benchmark file is malformed."""


class BenchmarkMissError(PeftBoError, LookupError):
    """Configuration absent from the tabular benchmark."""


class EvaluationError(PeftBoError, RuntimeError):
    """An evaluation backend failed to produce a score."""


class NumericalError(PeftBoError, RuntimeError):
    """Linear algebra failed even after jitter escalation."""


class AcquisitionExhausted(PeftBoError, RuntimeError):
    """Local search found no returnable (unevaluated) configuration."""


class StateError(PeftBoError, ValueError):
    """Run state file is unreadable or inconsistent with the run config."""


class RunInterrupted(PeftBoError, RuntimeError):
    """Search aborted mid-run; state was persisted for resume."""

    def __init__(self, message: str, state_path=None):
        super().__init__(message)
        self.state_path = state_path
