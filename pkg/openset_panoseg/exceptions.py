"""
Custom exceptions for the open-set panoramic segmentation toolkit.
"""


class PanoSegError(Exception):
    """Base exception for all toolkit errors."""
    pass


class InvalidInputError(PanoSegError):
    """An argument violates an operation's precondition."""
    pass


class ShapeMismatchError(InvalidInputError):
    """Tensor shapes are inconsistent with each other."""
    pass


class NonFiniteError(PanoSegError):
    """A tensor or loss term contains NaN or Inf."""
    pass


class DatasetError(PanoSegError):
    """Dataset files are missing, corrupt or inconsistent with their metadata."""
    pass


class CheckpointError(PanoSegError):
    """Checkpoint cannot be read or does not match the current run."""
    pass


class ConfigurationError(PanoSegError):
    """Configuration error."""
    pass


class StorageError(PanoSegError):
    """Storage operation failed."""
    pass


class TrainingAbortedError(PanoSegError):
    """Training stopped after too many consecutive rejected steps."""
    pass
