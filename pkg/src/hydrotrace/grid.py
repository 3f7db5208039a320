"""Georeferenced raster grids and mixed-connectivity component labeling.

Grids live in EPSG:4326 with square cells. The origin is the *top-left
corner* of cell (0, 0): longitude grows with columns, latitude shrinks
with rows. All stages of the pipeline require their input grids to share
rows, cols, origin, and cell size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyRasterError, GeoreferenceMismatchError

# Neighbor offsets in the fixed scan order used everywhere (row-major).
OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
OFFSETS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))

GEOREF_TOL = 1e-12


@dataclass
class RasterGrid:
    """A single-band georeferenced raster.

    ``values`` is any 2-D numpy array (probability, elevation, byte
    channel, boolean mask, or integer label). ``nodata_mask`` is True
    where the cell carries no data; it is never None after construction.
    """

    values: np.ndarray
    origin_lon: float = 0.0
    origin_lat: float = 0.0
    cell_size: float = 1.0
    nodata_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.ndim != 2:
            raise ValueError(f"raster values must be 2-D, got shape {self.values.shape}")
        if self.values.size == 0:
            raise EmptyRasterError("empty raster")
        if self.cell_size <= 0:
            raise ValueError(f"cell_size must be positive, got {self.cell_size}")
        if self.nodata_mask is None:
            self.nodata_mask = np.zeros(self.values.shape, dtype=bool)
        else:
            self.nodata_mask = np.asarray(self.nodata_mask, dtype=bool)
            if self.nodata_mask.shape != self.values.shape:
                raise ValueError("nodata_mask shape does not match values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def cell_midpoint(self, row: int, col: int) -> tuple[float, float]:
        """Lon/lat of the center of a cell."""
        lon = self.origin_lon + (col + 0.5) * self.cell_size
        lat = self.origin_lat - (row + 0.5) * self.cell_size
        return lon, lat

    def cell_bounds(self, row: int, col: int) -> tuple[float, float, float, float]:
        """(west, south, east, north) extent of a cell."""
        west = self.origin_lon + col * self.cell_size
        north = self.origin_lat - row * self.cell_size
        return west, north - self.cell_size, west + self.cell_size, north

    def same_georef(self, other: "RasterGrid", tol: float = GEOREF_TOL) -> bool:
        return (
            self.values.shape == other.values.shape
            and abs(self.origin_lon - other.origin_lon) <= tol
            and abs(self.origin_lat - other.origin_lat) <= tol
            and abs(self.cell_size - other.cell_size) <= tol
        )

    def with_values(self, values: np.ndarray, nodata_mask: np.ndarray | None = None) -> "RasterGrid":
        """New grid sharing this grid's georeferencing."""
        return RasterGrid(values, self.origin_lon, self.origin_lat, self.cell_size, nodata_mask)


def ensure_aligned(*grids: RasterGrid) -> None:
    """Raise if the grids do not share shape and georeferencing."""
    first = grids[0]
    for g in grids[1:]:
        if not first.same_georef(g):
            raise GeoreferenceMismatchError(
                "georeference mismatch: "
                f"{first.values.shape}@({first.origin_lon},{first.origin_lat},{first.cell_size}) vs "
                f"{g.values.shape}@({g.origin_lon},{g.origin_lat},{g.cell_size})"
            )


@dataclass(frozen=True)
class ConnectivityRule:
    """Mixed connectivity: water regions are 8-connected, land is 4-connected.

    The defaults are fixed by the pipeline; other values exist only so
    test oracles can exercise the labeling machinery.
    """

    water_connectivity: int = 8
    land_connectivity: int = 4

    def __post_init__(self):
        if self.water_connectivity not in (4, 8) or self.land_connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


WATER8_LAND4 = ConnectivityRule()


@dataclass
class ComponentLabels:
    """Result of connected-component labeling of water cells.

    ``labels`` holds 0 for land and 1..component_count for water, with
    components numbered by row-major order of their first-visited cell.
    """

    labels: np.ndarray
    component_count: int
    cells: list[list[tuple[int, int]]]  # cells[k] = cell list of component k+1

    def component_cells(self, label: int) -> list[tuple[int, int]]:
        return self.cells[label - 1]

    def min_elevation_cells(self, elevation: RasterGrid) -> dict[int, tuple[int, int]]:
        """Per component, the cell with minimum elevation (ties row-major)."""
        out: dict[int, tuple[int, int]] = {}
        elev = elevation.values
        for label in range(1, self.component_count + 1):
            best = None
            best_val = None
            for (r, c) in self.cells[label - 1]:
                v = float(elev[r, c])
                if best_val is None or v < best_val:
                    best_val = v
                    best = (r, c)
            out[label] = best  # type: ignore[assignment]
        return out


def _label_cells(mask: np.ndarray, connectivity: int) -> tuple[np.ndarray, list[list[tuple[int, int]]]]:
    """BFS labeling of True cells; label numbering follows row-major first visit."""
    offsets = OFFSETS_8 if connectivity == 8 else OFFSETS_4
    rows, cols = mask.shape
    labels = np.zeros(mask.shape, dtype=np.int32)
    cells: list[list[tuple[int, int]]] = []
    next_label = 0
    for r0 in range(rows):
        row_mask = mask[r0]
        for c0 in range(cols):
            if not row_mask[c0] or labels[r0, c0]:
                continue
            next_label += 1
            comp: list[tuple[int, int]] = []
            labels[r0, c0] = next_label
            queue = deque([(r0, c0)])
            while queue:
                r, c = queue.popleft()
                comp.append((r, c))
                for dr, dc in offsets:
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < rows and 0 <= nc < cols and mask[nr, nc] and not labels[nr, nc]:
                        labels[nr, nc] = next_label
                        queue.append((nr, nc))
            cells.append(comp)
    return labels, cells


def label_components(water_mask: RasterGrid, rule: ConnectivityRule = WATER8_LAND4) -> ComponentLabels:
    """Label connected water regions of a boolean grid.

    Nodata cells count as land: missing data must not create phantom
    waterways. Labeling is deterministic (row-major first visit).
    """
    mask = np.asarray(water_mask.values, dtype=bool) & ~water_mask.nodata_mask
    labels, cells = _label_cells(mask, rule.water_connectivity)
    return ComponentLabels(labels=labels, component_count=len(cells), cells=cells)
