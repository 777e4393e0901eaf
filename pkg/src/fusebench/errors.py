"""Exception types shared across the package."""


class FuseBenchError(Exception):
    """Base class for every error raised by this library."""


class InvalidInputError(FuseBenchError):
    """Data handed to an operation violates its preconditions."""


class ConfigurationError(FuseBenchError):
    """A requested configuration is illegal or incomplete."""


class ImageIOError(FuseBenchError):
    """An image file could not be read or written."""


class UnsupportedFormatError(ImageIOError):
    """A file decoded, but its layout or bit depth is not supported."""


class MeasurementError(FuseBenchError):
    """A benchmark measurement could not be completed."""
