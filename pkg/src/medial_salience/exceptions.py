class MedialSalienceError(Exception):
    """Base class for errors raised by this package."""


class ImageFormatError(MedialSalienceError, ValueError):
    """Raster bytes could not be decoded."""


class ImageDimensionError(MedialSalienceError, ValueError):
    """Raster is smaller than 3x3."""


class ParameterError(MedialSalienceError, ValueError):
    """A numeric parameter is outside its admissible range."""


class RegionError(MedialSalienceError, KeyError):
    """Unknown region id."""


class SampleError(MedialSalienceError, ValueError):
    """Gradient sample falls outside the region it was requested for."""


class ChannelError(MedialSalienceError, ValueError):
    """Unknown channel token in a channel specification."""


class ConfigError(MedialSalienceError, ValueError):
    """Invalid run configuration."""
