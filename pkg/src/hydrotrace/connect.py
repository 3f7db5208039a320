"""Connect disconnected waterway components to the reference network.

The model's rounded output is labeled under mixed connectivity, foreign
components (those that drain into a neighboring basin) are pruned, and
every remaining component is attached to the reference network with an
iterative least-cost search over the cell graph.

Determinism contract (shared with the test oracle):
  * components are processed in ascending (min elevation, row-major) order
    of their minimum-elevation cell;
  * iteration k allows a total path cost of base_cost * 2**k;
  * search ties settle by (cost, row-major cell index), the reached target
    is the (cost, row-major) minimum, and the path is reconstructed
    backward choosing the row-major smallest predecessor whose settled
    distance plus edge weight reproduces the cell's distance exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import HydroTraceError
from .grid import OFFSETS_8, ComponentLabels, RasterGrid, ensure_aligned, label_components

REFERENCE_EPSILON = 2.0**-20  # stand-in scaled probability for reference cells


@dataclass(frozen=True)
class EdgeWeightParams:
    """Rescale window and slope coefficient for graph edge weights."""

    prob_floor: float = 0.1
    prob_ceil: float = 0.5
    slope_coefficient: float = 1.0  # the undefined "b"; configurable, never hard-coded

    def __post_init__(self):
        if not 0 <= self.prob_floor < self.prob_ceil <= 1:
            raise ValueError("need 0 <= prob_floor < prob_ceil <= 1")
        if self.slope_coefficient <= 0:
            raise ValueError("slope coefficient must be positive")


@dataclass(frozen=True)
class SearchSchedule:
    """Geometric search-budget schedule: iteration k caps path cost at base_cost * 2**k."""

    base_cost: float = 64.0
    max_iterations: int = 6

    def budget(self, iteration: int) -> float:
        return self.base_cost * (2.0**iteration)


@dataclass
class BasinTile:
    """One basin's clipped inputs: probability, elevation, burned reference, basin membership."""

    probability: RasterGrid
    elevation: RasterGrid
    reference_mask: RasterGrid
    inside_basin: RasterGrid
    basin_polygon: object = None

    def __post_init__(self):
        ensure_aligned(self.probability, self.elevation, self.reference_mask, self.inside_basin)


@dataclass
class ConnectionResult:
    connected_mask: RasterGrid
    added_path_cells: list[tuple[int, int]]
    pruned_component_ids: list[int]
    unreachable_component_ids: list[int]
    connection_costs: dict[int, float] = field(default_factory=dict)

    def stats(self) -> dict:
        return {
            "pruned_components": self.pruned_component_ids,
            "unreachable_components": self.unreachable_component_ids,
            "connected_components": {str(k): v for k, v in sorted(self.connection_costs.items())},
            "added_cells": len(self.added_path_cells),
        }


def rescale_probability(x, params: EdgeWeightParams = EdgeWeightParams()):
    """Clamp-rescale model probability into [0, 1] over the floor..ceil window."""
    x = np.asarray(x, dtype=np.float64)
    scaled = np.clip((x - params.prob_floor) / (params.prob_ceil - params.prob_floor), 0.0, 1.0)
    return scaled if scaled.ndim else scaled.item()


def prune_foreign_components(
    labels: ComponentLabels, inside_basin: RasterGrid, elevation: RasterGrid
) -> list[int]:
    """Component ids whose min-elevation cell is outside the basin and
    more than half of whose cells are outside."""
    inside = np.asarray(inside_basin.values, dtype=bool)
    min_cells = labels.min_elevation_cells(elevation)
    pruned = []
    for comp_id in range(1, labels.component_count + 1):
        r, c = min_cells[comp_id]
        if inside[r, c]:
            continue
        cells = labels.component_cells(comp_id)
        outside = sum(1 for (rr, cc) in cells if not inside[rr, cc])
        if outside * 2 > len(cells):
            pruned.append(comp_id)
    return pruned


def edge_weight(scaled_t: float, elev_s: float, elev_t: float, params: EdgeWeightParams) -> float:
    """Cost of stepping into a cell with scaled probability ``scaled_t``.

    Downhill or flat moves cost -log2(scaled_t); uphill moves cost
    max(-log2(scaled_t) * b * delta_e, delta_e).
    """
    if not (math.isfinite(elev_s) and math.isfinite(elev_t)):
        raise HydroTraceError("non-finite elevation in edge weight")
    neg_log = -math.log2(scaled_t)
    delta_e = elev_t - elev_s
    if delta_e <= 0:
        return neg_log
    return max(neg_log * params.slope_coefficient * delta_e, delta_e)


def connect_components(
    tile: BasinTile,
    params: EdgeWeightParams = EdgeWeightParams(),
    schedule: SearchSchedule = SearchSchedule(),
    rounding_threshold: float = 0.5,
) -> ConnectionResult:
    """Attach every model waterway component to the reference network.

    Returns the connected mask (retained components + reference + added
    paths) along with pruning, cost, and reachability bookkeeping.
    """
    reference = np.asarray(tile.reference_mask.values, dtype=bool)
    if not reference.any():
        raise HydroTraceError("no reference network in tile")

    rows, cols = reference.shape
    prob = tile.probability.values.astype(np.float64)
    prob = np.where(tile.probability.nodata_mask, 0.0, prob)
    elev = np.where(tile.elevation.nodata_mask, np.nan, tile.elevation.values.astype(np.float64))

    rounded = prob >= rounding_threshold
    labels = label_components(tile.probability.with_values(rounded))
    pruned = prune_foreign_components(labels, tile.inside_basin, tile.elevation)
    pruned_set = set(pruned)

    retained = rounded.copy()
    for comp_id in pruned:
        for (r, c) in labels.component_cells(comp_id):
            retained[r, c] = False

    scaled = rescale_probability(prob, params)
    in_graph = ((scaled > 0) | reference) & np.isfinite(elev)
    # Effective scaled probability: reference cells with zero model output
    # still need a finite -log2.
    scaled_eff = np.where(reference & (scaled <= 0), REFERENCE_EPSILON, scaled)

    connected = reference.copy()
    min_cells = labels.min_elevation_cells(tile.elevation)

    def touches_connected(comp_id: int) -> bool:
        for (r, c) in labels.component_cells(comp_id):
            if connected[r, c]:
                return True
            for dr, dc in OFFSETS_8:
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols and connected[nr, nc]:
                    return True
        return False

    def mark_connected(comp_id: int) -> None:
        for cell in labels.component_cells(comp_id):
            connected[cell] = True

    costs: dict[int, float] = {}
    pending: list[int] = []
    for comp_id in range(1, labels.component_count + 1):
        if comp_id in pruned_set:
            continue
        if touches_connected(comp_id):
            costs[comp_id] = 0.0
            mark_connected(comp_id)
        else:
            pending.append(comp_id)
    pending.sort(key=lambda cid: (elev[min_cells[cid]], min_cells[cid]))

    added_paths: list[tuple[int, int]] = []
    for iteration in range(schedule.max_iterations + 1):
        if not pending:
            break
        budget = schedule.budget(iteration)
        still_pending = []
        for comp_id in pending:
            if touches_connected(comp_id):
                costs[comp_id] = 0.0
                mark_connected(comp_id)
                continue
            found = _least_cost_path(
                min_cells[comp_id], connected, in_graph, scaled_eff, elev, params, budget
            )
            if found is None:
                still_pending.append(comp_id)
                continue
            cost, path = found
            costs[comp_id] = cost
            mark_connected(comp_id)
            for cell in path:
                if not connected[cell] and not retained[cell]:
                    added_paths.append(cell)
                connected[cell] = True
        pending = still_pending

    unreachable = pending
    mask = retained | reference
    for cell in added_paths:
        mask[cell] = True

    return ConnectionResult(
        connected_mask=tile.probability.with_values(mask),
        added_path_cells=added_paths,
        pruned_component_ids=pruned,
        unreachable_component_ids=unreachable,
        connection_costs=costs,
    )


def _least_cost_path(
    source: tuple[int, int],
    targets: np.ndarray,
    in_graph: np.ndarray,
    scaled_eff: np.ndarray,
    elev: np.ndarray,
    params: EdgeWeightParams,
    budget: float,
) -> tuple[float, list[tuple[int, int]]] | None:
    """Budgeted Dijkstra from ``source`` to any True cell of ``targets``.

    Settles every reachable cell with cost <= budget, then picks the
    (cost, row-major) minimal reached target and reconstructs the
    canonical path. Returns None when no target is within budget.
    """
    rows, cols = in_graph.shape
    if not in_graph[source]:
        return None
    dist: dict[tuple[int, int], float] = {source: 0.0}
    settled: set[tuple[int, int]] = set()
    heap: list[tuple[float, tuple[int, int]]] = [(0.0, source)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell in settled or d > budget:
            continue
        settled.add(cell)
        r, c = cell
        for dr, dc in OFFSETS_8:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < rows and 0 <= nc < cols) or not in_graph[nr, nc]:
                continue
            nb = (nr, nc)
            if nb in settled:
                continue
            nd = d + edge_weight(scaled_eff[nr, nc], elev[r, c], elev[nr, nc], params)
            if nd <= budget and nd < dist.get(nb, math.inf):
                dist[nb] = nd
                heapq.heappush(heap, (nd, nb))

    best = None
    for cell in settled:
        if targets[cell]:
            key = (dist[cell], cell)
            if best is None or key < best:
                best = key
    if best is None:
        return None

    cost, target = best
    path = [target]
    current = target
    while current != source:
        r, c = current
        pred = None
        for dr, dc in OFFSETS_8:
            nr, nc = r + dr, c + dc
            nb = (nr, nc)
            if not (0 <= nr < rows and 0 <= nc < cols) or nb not in settled:
                continue
            w = edge_weight(scaled_eff[r, c], elev[nr, nc], elev[r, c], params)
            if dist[nb] + w == dist[current] and (pred is None or nb < pred):
                pred = nb
        if pred is None:  # numerically impossible by construction
            raise HydroTraceError("path reconstruction failed")
        path.append(pred)
        current = pred
    path.reverse()
    return cost, path


def build_basin_tile(
    probability: RasterGrid,
    elevation: RasterGrid,
    basin_polygon,
    reference_lines,
    buffer_degrees: float = 0.005,
) -> BasinTile:
    """Clip rasters to the buffered basin bounding box and burn the reference."""
    ensure_aligned(probability, elevation)
    west, south, east, north = basin_polygon.bounds
    west -= buffer_degrees
    south -= buffer_degrees
    east += buffer_degrees
    north += buffer_degrees

    cs = probability.cell_size
    c_lo = max(0, int(math.floor((west - probability.origin_lon) / cs)))
    c_hi = min(probability.cols, int(math.ceil((east - probability.origin_lon) / cs)))
    r_lo = max(0, int(math.floor((probability.origin_lat - north) / cs)))
    r_hi = min(probability.rows, int(math.ceil((probability.origin_lat - south) / cs)))
    if c_lo >= c_hi or r_lo >= r_hi:
        raise HydroTraceError("basin bounding box does not intersect the raster")

    def clip(grid: RasterGrid) -> RasterGrid:
        return RasterGrid(
            grid.values[r_lo:r_hi, c_lo:c_hi].copy(),
            grid.origin_lon + c_lo * cs,
            grid.origin_lat - r_lo * cs,
            cs,
            grid.nodata_mask[r_lo:r_hi, c_lo:c_hi].copy(),
        )

    prob_tile = clip(probability)
    elev_tile = clip(elevation)
    ref_mask = geometry.burn_lines(reference_lines, prob_tile)
    inside = geometry.points_in_polygon(basin_polygon, prob_tile)
    return BasinTile(
        probability=prob_tile,
        elevation=elev_tile,
        reference_mask=prob_tile.with_values(ref_mask),
        inside_basin=prob_tile.with_values(inside),
        basin_polygon=basin_polygon,
    )
