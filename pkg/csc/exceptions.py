class SeparativeCodingError(Exception):
    """Base exception for contrastive separative coding errors."""


class ConfigurationError(SeparativeCodingError, ValueError):
    """Raised when a configuration value is missing, unknown or out of range."""


class ShapeError(SeparativeCodingError, ValueError):
    """Raised when tensor shapes or dimensions do not agree."""


class NonFiniteError(SeparativeCodingError, FloatingPointError):
    """Raised when a forward result contains NaN or infinity."""


class GradientContractError(SeparativeCodingError):
    """Raised when backward is called on something that is not a scalar loss of the tape."""


class DegenerateSignalError(SeparativeCodingError, ValueError):
    """Raised when a waveform has zero power where a reference is required."""


class UnknownSpeakerError(SeparativeCodingError, KeyError):
    """Raised when a speaker id has no row in the global speaker bank."""


class EmptyBatchError(SeparativeCodingError, ValueError):
    """Raised when a loss receives no embeddings."""


class UnsupportedScaleError(SeparativeCodingError, ValueError):
    """Raised when exhaustive permutation search is requested for too many sources."""


class InvalidDistributionError(SeparativeCodingError, ValueError):
    """Raised when probability tables do not normalise."""


class QuadratureError(SeparativeCodingError):
    """Raised when numeric integration does not converge."""


class SingleClassTrialsError(SeparativeCodingError, ValueError):
    """Raised when a trial list lacks target or non-target trials."""


class InsufficientEnrollmentError(SeparativeCodingError, ValueError):
    """Raised when a test speaker has too few mixtures to enroll and probe."""


class CheckpointError(SeparativeCodingError):
    """Raised when a checkpoint is missing or malformed."""


class CheckpointVersionError(CheckpointError):
    """Raised when a checkpoint was written with another format version."""


class RefusedOverwriteError(SeparativeCodingError):
    """Raised when an output already exists and overwriting was not requested."""


class TrainingAbortedError(SeparativeCodingError):
    """Raised when training stops on a non-finite loss."""

    def __init__(self, message: str, *, epoch: int, step: int, example_id: str | None = None) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.step = step
        self.example_id = example_id
