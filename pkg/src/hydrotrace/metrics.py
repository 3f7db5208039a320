"""Pixel scores with thickness-tolerant and mask-aware variants, plus
nearest-type labeling and length-by-order statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from shapely.geometry import LineString, Point

from .grid import RasterGrid, ensure_aligned
from .vector import WaterNetwork

# Waterway types excluded by the mask-aware scores by default: swamps,
# canals/ditches, drainage, intermittent lakes, playas.
DEFAULT_MASKED_TYPES = (
    "playa",
    "swamp",
    "swamp intermittent",
    "swamp perennial",
    "canal",
    "canal storm",
    "canal aqua",
    "drainage",
    "lake intermittent",
)


@dataclass(frozen=True)
class FcodeLabel:
    """A waterway type: integer raster code, name, and training weight.

    A type was masked during training exactly when its weight lies
    strictly between 0 and 1; weights >= 1 scale the loss, weight 0
    marks non-waterway types.
    """

    code: int
    description: str
    training_weight: float

    @property
    def masked_in_training(self) -> bool:
        return 0.0 < self.training_weight < 1.0


# Training weights by waterway type, with artifact-local integer codes
# (real datasets remap these through their own code tables).
DEFAULT_FCODE_TABLE = tuple(
    FcodeLabel(code, name, weight)
    for code, (name, weight) in enumerate(
        [
            ("playa", 0.0),
            ("inundation area", 0.0),
            ("swamp intermittent", 0.5),
            ("swamp perennial", 0.5),
            ("swamp", 0.5),
            ("reservoir", 2.0),
            ("lake intermittent", 0.5),
            ("lake perennial", 7.0),
            ("lake", 7.0),
            ("spillway", 0.0),
            ("drainage", 0.5),
            ("wash", 0.5),
            ("canal storm", 0.5),
            ("canal aqua", 1.0),
            ("canal", 0.5),
            ("artificial path", 1.0),
            ("ephemeral streams", 7.5),
            ("intermittent streams", 7.5),
            ("perennial streams", 6.5),
            ("streams other", 6.5),
            ("other", 1.0),
        ],
        start=1,
    )
)


def default_masked_codes() -> set[int]:
    names = set(DEFAULT_MASKED_TYPES)
    return {f.code for f in DEFAULT_FCODE_TABLE if f.description in names}


@dataclass
class EvalReport:
    p: float
    r: float
    f1: float
    p_star: float
    r_star: float
    f1_star: float
    p_dstar: float
    r_dstar: float
    f1_dstar: float
    counts: dict

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "r": self.r,
            "f1": self.f1,
            "p_star": self.p_star,
            "r_star": self.r_star,
            "f1_star": self.f1_star,
            "p_dstar": self.p_dstar,
            "r_dstar": self.r_dstar,
            "f1_dstar": self.f1_dstar,
            "counts": self.counts,
        }


def f1_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _scores(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp > 0 else 0.0
    r = tp / (tp + fn) if tp + fn > 0 else 0.0
    return p, r, f1_score(p, r)


def _bool_grids(pred: RasterGrid, truth: RasterGrid) -> tuple[np.ndarray, np.ndarray]:
    ensure_aligned(pred, truth)
    p = np.asarray(pred.values, dtype=bool) & ~pred.nodata_mask
    t = np.asarray(truth.values, dtype=bool) & ~truth.nodata_mask
    return p, t


def pixel_metrics(pred: RasterGrid, truth: RasterGrid) -> tuple[float, float, float]:
    """Standard pixel precision, recall, F1."""
    p, t = _bool_grids(pred, truth)
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    return _scores(tp, fp, fn)


def _adjacent_any(mask: np.ndarray, pad_value: bool = False) -> np.ndarray:
    """True where any 8-neighbor (with constant padding) is True."""
    padded = np.pad(mask, 1, mode="constant", constant_values=pad_value)
    out = np.zeros_like(mask)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            out |= padded[1 + dr : 1 + dr + mask.shape[0], 1 + dc : 1 + dc + mask.shape[1]]
    return out


def tolerant_metrics(pred: RasterGrid, truth: RasterGrid) -> tuple[float, float, float]:
    """Scores that ignore errors adjacent (8-connected) to both a true
    positive and a true negative; out-of-grid counts as true negative."""
    p, t = _bool_grids(pred, truth)
    tp_mask = p & t
    tn_mask = ~p & ~t
    errors = p != t
    ignorable = errors & _adjacent_any(tp_mask) & _adjacent_any(tn_mask, pad_value=True)
    tp = int(np.count_nonzero(tp_mask))
    fp = int(np.count_nonzero((p & ~t) & ~ignorable))
    fn = int(np.count_nonzero((~p & t) & ~ignorable))
    return _scores(tp, fp, fn)


def masked_metrics(
    pred: RasterGrid,
    truth: RasterGrid,
    fcode_grid: RasterGrid,
    masked_codes: set[int],
) -> tuple[float, float, float]:
    """Scores over pixels whose waterway type was not masked in training."""
    p, t = _bool_grids(pred, truth)
    ensure_aligned(pred, fcode_grid)
    codes = np.asarray(fcode_grid.values)
    keep = ~np.isin(codes, sorted(masked_codes))
    tp = int(np.count_nonzero(p & t & keep))
    fp = int(np.count_nonzero(p & ~t & keep))
    fn = int(np.count_nonzero(~p & t & keep))
    return _scores(tp, fp, fn)


def evaluate(
    pred: RasterGrid,
    truth: RasterGrid,
    fcode_grid: RasterGrid | None = None,
    masked_codes: set[int] | None = None,
) -> EvalReport:
    """All three metric families in one report."""
    p_grid, t_grid = _bool_grids(pred, truth)
    tp = int(np.count_nonzero(p_grid & t_grid))
    fp = int(np.count_nonzero(p_grid & ~t_grid))
    fn = int(np.count_nonzero(~p_grid & t_grid))
    p, r, f1 = _scores(tp, fp, fn)
    ps, rs, f1s = tolerant_metrics(pred, truth)

    ignored_star = (tp + fp + fn) - _count_after_tolerance(p_grid, t_grid)
    if fcode_grid is not None:
        codes = masked_codes if masked_codes is not None else default_masked_codes()
        pd, rd, f1d = masked_metrics(pred, truth, fcode_grid, codes)
        masked_pixels = int(np.count_nonzero(np.isin(fcode_grid.values, sorted(codes))))
    else:
        pd, rd, f1d = p, r, f1
        masked_pixels = 0

    return EvalReport(
        p=p,
        r=r,
        f1=f1,
        p_star=ps,
        r_star=rs,
        f1_star=f1s,
        p_dstar=pd,
        r_dstar=rd,
        f1_dstar=f1d,
        counts={
            "tp": tp,
            "fp": fp,
            "fn": fn,
            "ignored_star": ignored_star,
            "masked_pixels": masked_pixels,
        },
    )


def _count_after_tolerance(p: np.ndarray, t: np.ndarray) -> int:
    tp_mask = p & t
    tn_mask = ~p & ~t
    errors = p != t
    ignorable = errors & _adjacent_any(tp_mask) & _adjacent_any(tn_mask, pad_value=True)
    return int(np.count_nonzero(tp_mask) + np.count_nonzero(errors & ~ignorable))


def nearest_type_label(
    points: list[tuple[float, float]],
    labeled_lines: list[tuple[int, str, LineString]],
    max_dist: float = 0.001,
) -> list[str]:
    """Label each point with the type of the nearest polyline within
    ``max_dist`` degrees ("Unknown" beyond it, ties to the lowest id)."""
    labels = []
    for lon, lat in points:
        pt = Point(lon, lat)
        best: tuple[float, int, str] | None = None
        for feat_id, description, line in labeled_lines:
            d = line.distance(pt)
            if d <= max_dist and (best is None or (d, feat_id) < (best[0], best[1])):
                best = (d, feat_id, description)
        labels.append(best[2] if best else "Unknown")
    return labels


def length_stats(net: WaterNetwork, lakes: list | None = None) -> dict[tuple[str, int], float]:
    """Total kilometers per (origin, strahler), excluding lake-touching
    segments and zero-length degenerates."""
    lakes = lakes or []
    out: dict[tuple[str, int], float] = {}
    for seg in net.segments:
        if seg.strahler is None:
            raise ValueError(f"segment {seg.id} has no stream order")
        length = seg.length_km
        if length == 0.0:
            continue
        if len(seg.points) > 1 and lakes:
            line = LineString(seg.points)
            if any(line.intersects(lake) for lake in lakes):
                continue
        key = (seg.origin, seg.strahler)
        out[key] = out.get(key, 0.0) + length
    return out


def length_stats_csv(stats: dict[tuple[str, int], float]) -> str:
    lines = ["origin,strahler,total_km"]
    for (origin, order) in sorted(stats):
        lines.append(f"{origin},{order},{stats[(origin, order)]:.6f}")
    return "\n".join(lines) + "\n"
