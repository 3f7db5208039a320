"""Exception types shared across the pipeline stages."""


class HydroTraceError(Exception):
    """Base class for all hydrotrace errors."""


class EmptyRasterError(HydroTraceError):
    """Raised when an operation receives a raster with no cells."""


class RasterFormatError(HydroTraceError):
    """Raised for unreadable, multi-band, or oversized raster files."""


class GeoreferenceMismatchError(HydroTraceError):
    """Raised when grids combined in one stage do not share georeferencing."""


class NetworkTopologyError(HydroTraceError):
    """Raised when a vector network violates a topology precondition."""
