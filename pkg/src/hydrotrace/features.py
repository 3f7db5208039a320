"""Scene compositing and derivation of the 10-channel model input.

Channel order: N_t, R_t, G_t, B_t, NDVI, NDWI, shifted elevation,
elevation x-delta, elevation y-delta, elevation gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import RasterGrid, ensure_aligned

CHANNEL_NAMES = (
    "nir_t",
    "red_t",
    "green_t",
    "blue_t",
    "ndvi",
    "ndwi",
    "elev_shifted",
    "elev_dx",
    "elev_dy",
    "elev_grad",
)

COMPOSITE_WINDOW = 4


@dataclass
class SceneStack:
    """Byte scenes of one tile, ordered most-complete first.

    A scene's validity is its grid's inverse nodata mask (clouds and
    gaps are expected to be flagged as nodata upstream).
    """

    scenes: list[RasterGrid]

    def __post_init__(self):
        if not self.scenes:
            raise ValueError("scene stack requires at least one scene")
        ensure_aligned(*self.scenes)
        self.scenes = sorted(self.scenes, key=lambda s: -self.completeness(s))

    @staticmethod
    def completeness(scene: RasterGrid) -> float:
        return float((~scene.nodata_mask).mean())


def composite_scenes(stack: SceneStack, window: int = COMPOSITE_WINDOW) -> RasterGrid:
    """First-valid composite over the ``window`` most complete scenes.

    Cells invalid in every windowed scene stay nodata.
    """
    scenes = stack.scenes[:window]
    base = scenes[0]
    values = np.zeros(base.values.shape, dtype=np.uint8)
    filled = np.zeros(base.values.shape, dtype=bool)
    for scene in scenes:
        take = ~scene.nodata_mask & ~filled
        values[take] = scene.values[take]
        filled |= take
    return base.with_values(values, nodata_mask=~filled)


def radiometric_transform(x):
    """Squash surface-reflectance-derived values into a byte.

    f(x) = 255 / (1 + exp(-0.6 x)), rounded half-up, clamped to 0..255.
    Accepts scalars or arrays.
    """
    x = np.asarray(x, dtype=np.float64)
    y = 255.0 / (1.0 + np.exp(-0.6 * x))
    out = np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)
    return out if out.ndim else out.item()


@dataclass
class FeatureStack:
    """The 10 aligned input channels plus the flat-denominator flag grid."""

    channels: list[RasterGrid]
    zero_denominator_mask: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    names = CHANNEL_NAMES

    def __post_init__(self):
        if len(self.channels) != len(CHANNEL_NAMES):
            raise ValueError(f"expected {len(CHANNEL_NAMES)} channels, got {len(self.channels)}")
        ensure_aligned(*self.channels)
        if self.zero_denominator_mask is None:
            self.zero_denominator_mask = np.zeros(self.channels[0].values.shape, dtype=bool)

    def as_array(self) -> np.ndarray:
        """(10, rows, cols) float32 array of the channel values."""
        return np.stack([c.values.astype(np.float32) for c in self.channels])


def _central_difference(elev: np.ndarray, axis: int) -> np.ndarray:
    # Replicate the edge value so border cells get a one-sided difference
    # without shrinking the grid.
    pad = [(0, 0), (0, 0)]
    pad[axis] = (1, 1)
    padded = np.pad(elev, pad, mode="edge")
    if axis == 1:
        return (padded[:, 2:] - padded[:, :-2]) / 2.0
    return (padded[2:, :] - padded[:-2, :]) / 2.0


def compute_feature_stack(
    nir: RasterGrid,
    red: RasterGrid,
    green: RasterGrid,
    blue: RasterGrid,
    elevation: RasterGrid,
) -> FeatureStack:
    """Derive the 10 model input channels from composited bytes and elevation.

    NRGB bytes are scaled to [0, 1] and re-centered to [-1, 1]; NDVI and
    NDWI come from the scaled values, with flat denominators mapped to 0
    and flagged; elevation channels are shift and central differences.
    """
    ensure_aligned(nir, red, green, blue, elevation)
    valid = ~(
        nir.nodata_mask | red.nodata_mask | green.nodata_mask | blue.nodata_mask | elevation.nodata_mask
    )
    nodata = ~valid

    n_s = nir.values.astype(np.float64) / 255.0
    r_s = red.values.astype(np.float64) / 255.0
    g_s = green.values.astype(np.float64) / 255.0
    b_s = blue.values.astype(np.float64) / 255.0

    transformed = [2.0 * band - 1.0 for band in (n_s, r_s, g_s, b_s)]

    ndvi_den = n_s + r_s
    ndwi_den = g_s + n_s
    zero_den = ((ndvi_den == 0) | (ndwi_den == 0)) & valid
    with np.errstate(divide="ignore", invalid="ignore"):
        ndvi = np.where(ndvi_den == 0, 0.0, (n_s - r_s) / np.where(ndvi_den == 0, 1.0, ndvi_den))
        ndwi = np.where(ndwi_den == 0, 0.0, (g_s - n_s) / np.where(ndwi_den == 0, 1.0, ndwi_den))

    elev = elevation.values.astype(np.float64)
    if valid.any():
        shifted = elev - elev[valid].min()
    else:
        shifted = np.zeros_like(elev)
    dx = _central_difference(elev, axis=1)
    dy = _central_difference(elev, axis=0)
    grad = np.sqrt(dx * dx + dy * dy)

    planes = transformed + [ndvi, ndwi, shifted, dx, dy, grad]
    channels = [
        nir.with_values(np.where(valid, plane, 0.0).astype(np.float32), nodata_mask=nodata.copy())
        for plane in planes
    ]
    return FeatureStack(channels=channels, zero_denominator_mask=zero_den)
