"""GeoJSON helpers, rasterization of vectors, and distance math."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LineString, box, shape

from .grid import RasterGrid

EARTH_RADIUS_KM = 6371.0088


def haversine_km(lon1: float, lat1: float, lon2: float, lat2: float) -> float:
    """Great-circle distance between two lon/lat points in kilometers."""
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def polyline_length_km(points: list[tuple[float, float]]) -> float:
    return sum(
        haversine_km(points[i][0], points[i][1], points[i + 1][0], points[i + 1][1])
        for i in range(len(points) - 1)
    )


def read_geojson(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_geojson(doc: dict, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_polygons(path: str | Path) -> list:
    """All polygonal geometries of a GeoJSON file as shapely objects."""
    doc = read_geojson(path)
    geoms = []
    features = doc["features"] if doc.get("type") == "FeatureCollection" else [doc]
    for feat in features:
        geom = shape(feat["geometry"] if "geometry" in feat else feat)
        if geom.geom_type in ("Polygon", "MultiPolygon"):
            geoms.append(geom)
    return geoms


def load_lines(path: str | Path) -> list[tuple[dict, LineString]]:
    """(properties, geometry) pairs for every LineString feature."""
    doc = read_geojson(path)
    out = []
    for feat in doc.get("features", []):
        geom = shape(feat["geometry"])
        props = feat.get("properties") or {}
        if geom.geom_type == "LineString":
            out.append((props, geom))
        elif geom.geom_type == "MultiLineString":
            for part in geom.geoms:
                out.append((props, part))
    return out


def burn_lines(lines: list[LineString], template: RasterGrid) -> np.ndarray:
    """Boolean mask of cells whose square extent a polyline intersects."""
    rows, cols = template.values.shape
    mask = np.zeros((rows, cols), dtype=bool)
    cs = template.cell_size
    for line in lines:
        coords = list(line.coords)
        for (x0, y0), (x1, y1) in zip(coords[:-1], coords[1:]):
            seg = LineString([(x0, y0), (x1, y1)])
            c_lo = int(math.floor((min(x0, x1) - template.origin_lon) / cs))
            c_hi = int(math.floor((max(x0, x1) - template.origin_lon) / cs))
            r_lo = int(math.floor((template.origin_lat - max(y0, y1)) / cs))
            r_hi = int(math.floor((template.origin_lat - min(y0, y1)) / cs))
            for r in range(max(0, r_lo), min(rows, r_hi + 1)):
                for c in range(max(0, c_lo), min(cols, c_hi + 1)):
                    if mask[r, c]:
                        continue
                    if seg.intersects(box(*template.cell_bounds(r, c))):
                        mask[r, c] = True
    return mask


def points_in_polygon(polygon, template: RasterGrid) -> np.ndarray:
    """Boolean mask of cells whose midpoint lies inside the polygon."""
    rows, cols = template.values.shape
    lon = template.origin_lon + (np.arange(cols) + 0.5) * template.cell_size
    lat = template.origin_lat - (np.arange(rows) + 0.5) * template.cell_size
    lon_grid, lat_grid = np.meshgrid(lon, lat)
    return shapely.contains_xy(polygon, lon_grid.ravel(), lat_grid.ravel()).reshape(rows, cols)
