"""Synthetic basin fixtures: a branching probability ridge over a sloped
DEM, one reference trunk line, and the GeoJSON/manifest files the
pipeline stages consume."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from hydrotrace.grid import RasterGrid
from hydrotrace.raster_io import save_raster

ORIGIN_LON = 30.0
ORIGIN_LAT = 10.0
CELL = 0.0002


def build_basin(size: int = 256, seed: int = 0, n_branches: int = 6):
    """Returns (probability, elevation, truth_mask, trunk_row) arrays."""
    rng = np.random.RandomState(seed)
    trunk_row = int(size * 0.8)

    ridge = np.zeros((size, size), dtype=bool)
    # Branches random-walk downhill from the top toward the trunk.
    for b in range(n_branches):
        col = int((b + 0.7) * size / (n_branches + 1))
        row = rng.randint(2, size // 4)
        path = []
        while row < trunk_row:
            ridge[row, col] = True
            path.append((row, col))
            step = rng.choice([-1, 0, 0, 1])
            col = int(np.clip(col + step, 1, size - 2))
            row += 1
        # A short side twig off a point on the branch.
        twig_row, twig_col = path[rng.randint(len(path) // 4, len(path) - 1)]
        for k in range(rng.randint(4, 12)):
            tc = int(np.clip(twig_col + k, 1, size - 2))
            tr = int(np.clip(twig_row - k, 1, size - 2))
            ridge[tr, tc] = True

    prob = np.zeros((size, size), dtype=np.float64)
    prob[ridge] = 0.9
    # Soft halo so searches have crossable mid-range cells.
    halo = np.zeros_like(ridge)
    halo[1:, :] |= ridge[:-1, :]
    halo[:-1, :] |= ridge[1:, :]
    halo[:, 1:] |= ridge[:, :-1]
    halo[:, :-1] |= ridge[:, 1:]
    prob[halo & ~ridge] = 0.3

    # Carve gaps: every branch loses a few cells to sub-threshold values,
    # so connection has real work to do.
    ridge_cells = np.argwhere(ridge)
    rng.shuffle(ridge_cells)
    for (r, c) in ridge_cells[: max(3, size // 40)]:
        if trunk_row - 10 > r > 10:
            prob[max(0, r - 1) : r + 2, c] = np.minimum(
                prob[max(0, r - 1) : r + 2, c], 0.35
            )

    # DEM: plane sloping toward the trunk and toward the outlet (west),
    # with gentle deterministic noise.
    rows = np.arange(size)[:, None]
    cols = np.arange(size)[None, :]
    elevation = (
        np.abs(rows - trunk_row) * 1.5 + cols * 0.05 + rng.rand(size, size) * 0.2
    ).astype(np.float64)

    truth = ridge.copy()
    truth[trunk_row, :] = True
    return prob, elevation, truth, trunk_row


def write_basin(
    out_dir: Path,
    size: int = 256,
    seed: int = 0,
    basin_id: str = "synthetic",
    with_nrgb: bool = False,
    with_lakes: bool = False,
    with_truth: bool = False,
):
    """Write one basin's inputs; returns its manifest entry."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prob, elevation, truth, trunk_row = build_basin(size=size, seed=seed)

    prob_grid = RasterGrid(prob.astype(np.float32), ORIGIN_LON, ORIGIN_LAT, CELL)
    dem_grid = prob_grid.with_values(elevation.astype(np.float32))
    save_raster(prob_grid, out_dir / "probability.tif")
    save_raster(dem_grid, out_dir / "dem.tif")

    # Reference trunk along the cell midpoints of trunk_row.
    lat = ORIGIN_LAT - (trunk_row + 0.5) * CELL
    lon_west = ORIGIN_LON + 0.5 * CELL
    lon_east = ORIGIN_LON + (size - 0.5) * CELL
    reference = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[lon_east, lat], [lon_west, lat]],
                },
                "properties": {"id": 1, "strahler": 3, "target_id": -1},
            }
        ],
    }
    (out_dir / "reference.geojson").write_text(json.dumps(reference))

    pad = 2 * CELL
    west, east = ORIGIN_LON + pad, ORIGIN_LON + size * CELL - pad
    south, north = ORIGIN_LAT - size * CELL + pad, ORIGIN_LAT - pad
    basin = {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "Polygon",
                    "coordinates": [
                        [[west, south], [east, south], [east, north], [west, north], [west, south]]
                    ],
                },
                "properties": {"id": basin_id},
            }
        ],
    }
    (out_dir / "basin.geojson").write_text(json.dumps(basin))

    entry = {
        "id": basin_id,
        "probability": str(out_dir / "probability.tif"),
        "dem": str(out_dir / "dem.tif"),
        "basin": str(out_dir / "basin.geojson"),
        "reference": str(out_dir / "reference.geojson"),
    }

    if with_truth:
        save_raster(prob_grid.with_values(truth), out_dir / "truth.tif", nodata=255)
        entry["truth"] = str(out_dir / "truth.tif")

    if with_nrgb:
        rng = np.random.RandomState(seed + 1)
        for name in ("nir", "red", "green", "blue"):
            base = rng.randint(60, 200, (size, size)).astype(np.uint8)
            base[truth] = rng.randint(10, 60)
            save_raster(prob_grid.with_values(base), out_dir / f"{name}.tif", nodata=255)
        entry["nrgb"] = [str(out_dir / f"{n}.tif") for n in ("nir", "red", "green", "blue")]

    if with_lakes:
        lw = ORIGIN_LON + size * CELL * 0.05
        le = lw + 4 * CELL
        ln = ORIGIN_LAT - size * CELL * 0.05
        ls = ln - 4 * CELL
        lakes = {
            "type": "FeatureCollection",
            "features": [
                {
                    "type": "Feature",
                    "geometry": {
                        "type": "Polygon",
                        "coordinates": [[[lw, ls], [le, ls], [le, ln], [lw, ln], [lw, ls]]],
                    },
                    "properties": {},
                }
            ],
        }
        (out_dir / "lakes.geojson").write_text(json.dumps(lakes))
        entry["lakes"] = str(out_dir / "lakes.geojson")

    return entry


def write_manifest(path: Path, entries: list[dict]) -> Path:
    path = Path(path)
    path.write_text(json.dumps({"basins": entries}, indent=2))
    return path
