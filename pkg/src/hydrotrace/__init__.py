"""hydrotrace: raster-to-vector hydrography on a reference network backbone."""

from .grid import (
    ComponentLabels,
    ConnectivityRule,
    RasterGrid,
    WATER8_LAND4,
    ensure_aligned,
    label_components,
)
from .raster_io import load_raster, save_raster

__all__ = [
    "ComponentLabels",
    "ConnectivityRule",
    "RasterGrid",
    "WATER8_LAND4",
    "ensure_aligned",
    "label_components",
    "load_raster",
    "save_raster",
]

__version__ = "0.1.0"
