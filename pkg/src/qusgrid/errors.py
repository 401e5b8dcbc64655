"""Exception hierarchy shared by all qusgrid modules.

The CLI maps these onto process exit codes (see ``qusgrid.cli``):
configuration / numeric problems exit 5, container format problems exit 4,
plain I/O failures exit 3.
"""


class QusError(Exception):
    """Base class for all qusgrid errors."""


class ConfigurationError(QusError):
    """Invalid configuration or violated call contract."""


class DensityError(ConfigurationError):
    """Requested scatterer density is not representable on the grid (p > 1)."""


class WindowTooSmallError(ConfigurationError):
    """Analysis window is smaller than the required multiple of the resolution cell."""


class DegenerateDataError(QusError):
    """Input data carries no usable signal (zero variance, all-zero envelope, ...)."""


class InvalidSampleError(QusError):
    """A sample value violates the estimator's domain (e.g. non-positive envelope)."""


class NumericError(QusError):
    """An iterative numeric routine failed to converge."""


class DataFormatError(QusError):
    """Base class for QUSD container / manifest format problems."""


class BadMagicError(DataFormatError):
    """File does not start with the QUSD magic bytes."""


class UnsupportedVersionError(DataFormatError):
    """Container version is not supported by this reader."""


class TruncatedFileError(DataFormatError):
    """File ends before the declared payload is complete."""


class DigestMismatchError(DataFormatError):
    """Stored content digest does not match the file bytes."""
