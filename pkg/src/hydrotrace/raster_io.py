"""Single-band GeoTIFF reading and writing.

Files are plain uncompressed GeoTIFFs in EPSG:4326 written through
Pillow, carrying ModelPixelScale (33550), ModelTiepoint (33922), a
minimal GeoKey directory (34735), and the GDAL nodata tag (42113).
Supported sample types are float32, uint8, and int32.

Nodata handling: cells flagged in ``nodata_mask`` are stored as the
nodata value (NaN for float32, 0 for uint8, INT32_MIN for int32 by
default) and the mask is reconstructed from that value on load. Valid
cells round-trip bit-exactly.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from PIL import Image, TiffImagePlugin, TiffTags

from .errors import RasterFormatError
from .grid import RasterGrid

TAG_PIXEL_SCALE = 33550
TAG_TIEPOINT = 33922
TAG_GEO_KEYS = 34735
TAG_GDAL_NODATA = 42113
TAG_SAMPLES_PER_PIXEL = 277

# GTModelType = geographic, GeographicType = EPSG:4326.
_GEO_KEYS_4326 = (1, 1, 0, 2, 1024, 0, 1, 2, 2048, 0, 1, 4326)

_MAX_CELLS = 2**31  # refuse absurd grids before allocating

_DEFAULT_NODATA = {
    np.dtype(np.float32): float("nan"),
    np.dtype(np.uint8): 0,
    np.dtype(np.int32): np.iinfo(np.int32).min,
}

_MODE_FOR_DTYPE = {
    np.dtype(np.float32): "F",
    np.dtype(np.uint8): "L",
    np.dtype(np.int32): "I",
}


def save_raster(grid: RasterGrid, path: str | Path, nodata: float | int | None = None) -> None:
    """Write a grid as a single-band GeoTIFF.

    ``nodata`` overrides the per-dtype default sentinel written at
    masked cells. Booleans are stored as uint8 0/1.
    """
    values = grid.values
    if values.dtype == bool:
        values = values.astype(np.uint8)
    dtype = values.dtype
    if dtype not in _MODE_FOR_DTYPE:
        # Normalize the common cases rather than rejecting them.
        if np.issubdtype(dtype, np.floating):
            values = values.astype(np.float32)
        elif np.issubdtype(dtype, np.integer):
            values = values.astype(np.int32)
        else:
            raise RasterFormatError(f"unsupported raster dtype {dtype}")
        dtype = values.dtype

    if nodata is None:
        nodata = _DEFAULT_NODATA[dtype]
    if grid.nodata_mask.any():
        values = values.copy()
        values[grid.nodata_mask] = nodata

    ifd = TiffImagePlugin.ImageFileDirectory_v2()
    ifd[TAG_PIXEL_SCALE] = (float(grid.cell_size), float(grid.cell_size), 0.0)
    ifd.tagtype[TAG_PIXEL_SCALE] = TiffTags.DOUBLE
    ifd[TAG_TIEPOINT] = (0.0, 0.0, 0.0, float(grid.origin_lon), float(grid.origin_lat), 0.0)
    ifd.tagtype[TAG_TIEPOINT] = TiffTags.DOUBLE
    ifd[TAG_GEO_KEYS] = _GEO_KEYS_4326
    ifd.tagtype[TAG_GEO_KEYS] = TiffTags.SHORT
    ifd[TAG_GDAL_NODATA] = _format_nodata(nodata)
    ifd.tagtype[TAG_GDAL_NODATA] = TiffTags.ASCII

    image = Image.fromarray(values, mode=_MODE_FOR_DTYPE[dtype])
    image.save(str(path), format="TIFF", tiffinfo=ifd)


def load_raster(path: str | Path) -> RasterGrid:
    """Read a single-band GeoTIFF written by this module (or compatible)."""
    try:
        image = Image.open(str(path))
        image.load()
    except FileNotFoundError:
        raise
    except Exception as exc:  # Pillow raises several unrelated types
        raise RasterFormatError(f"unreadable raster file {path}: {exc}") from exc

    bands = image.tag_v2.get(TAG_SAMPLES_PER_PIXEL, len(image.getbands()))
    if isinstance(bands, tuple):
        bands = bands[0]
    if bands != 1:
        raise RasterFormatError(f"expected single band, found {bands} in {path}")

    width, height = image.size
    if width * height > _MAX_CELLS:
        raise RasterFormatError(f"grid size overflow: {width}x{height}")

    values = np.asarray(image)
    if values.dtype not in _MODE_FOR_DTYPE:
        if np.issubdtype(values.dtype, np.floating):
            values = values.astype(np.float32)
        elif np.issubdtype(values.dtype, np.integer) and values.dtype != np.uint8:
            values = values.astype(np.int32)
        else:
            raise RasterFormatError(f"unsupported sample type {values.dtype} in {path}")

    scale = image.tag_v2.get(TAG_PIXEL_SCALE)
    tiepoint = image.tag_v2.get(TAG_TIEPOINT)
    if scale is None or tiepoint is None:
        raise RasterFormatError(f"missing GeoTIFF georeferencing tags in {path}")
    cell_size = float(scale[0])
    # Tiepoint maps raster point (i, j) to model point (x, y).
    origin_lon = float(tiepoint[3]) - float(tiepoint[0]) * cell_size
    origin_lat = float(tiepoint[4]) + float(tiepoint[1]) * cell_size

    nodata_mask = None
    nodata_text = image.tag_v2.get(TAG_GDAL_NODATA)
    if nodata_text is not None:
        nodata = float(str(nodata_text).strip("\x00 "))
        if math.isnan(nodata):
            nodata_mask = np.isnan(values)
        else:
            nodata_mask = values == values.dtype.type(nodata)

    return RasterGrid(values, origin_lon, origin_lat, cell_size, nodata_mask)


def _format_nodata(nodata: float | int) -> str:
    if isinstance(nodata, float):
        if math.isnan(nodata):
            return "nan"
        if nodata == int(nodata):
            return str(int(nodata))
        return repr(nodata)
    return str(int(nodata))
