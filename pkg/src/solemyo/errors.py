"""Exception hierarchy shared across the package.

Exit-code mapping lives in the CLI: data/format problems map to 2,
numeric/training failures to 3.
"""


class SolemyoError(Exception):
    """Base class for all package errors."""


class DataFormatError(SolemyoError):
    """Malformed file: bad header, wrong column count, unparseable field."""


class SequencingError(DataFormatError):
    """Timestamps are not strictly increasing."""


class OutOfRangeError(SolemyoError):
    """A value violates its physical range (pressure, sEMG, activation)."""


class AlignmentError(SolemyoError):
    """Pressure and sEMG streams cannot be synchronized (no overlap / gaps)."""


class ConfigError(SolemyoError):
    """Invalid configuration or shape mismatch between config and data."""


class NumericError(SolemyoError):
    """Non-finite value encountered during computation."""


class UndefinedCorrelationError(SolemyoError):
    """Correlation of a zero-variance series; reported as absent in summaries."""


class TrainingError(NumericError):
    """Training diverged; carries the epoch where the loss went non-finite."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class CheckpointError(DataFormatError):
    """Checkpoint file corrupt: checksum, size or shape mismatch."""
