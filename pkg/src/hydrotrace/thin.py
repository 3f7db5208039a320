"""Topology-preserving thinning of the connected waterway mask.

Cells are classified as skeleton (an endpoint, a bridge whose removal
would split the waterway, or a reference cell), interior (removal would
open a hole in the waterway), or removable. Removable cells are deleted
highest-elevation first, re-checking removability at deletion time and
re-examining adjacent interior cells, until no removable cell remains.

A hole is a 4-connected land region that cannot reach the land outside
the tile; land connectivity is tracked incrementally with a union-find
since removals only ever add land. The bridge check runs on the 3x3
neighborhood first and falls back to a component walk when the local
ring is inconclusive.
"""

from __future__ import annotations

from collections import deque
from enum import Enum

import numpy as np

from .errors import HydroTraceError
from .grid import OFFSETS_4, OFFSETS_8, RasterGrid, ensure_aligned


class CellClass(Enum):
    SKELETON = "skeleton"
    INTERIOR = "interior"
    REMOVABLE = "removable"


# Ring positions of the 3x3 neighborhood, clockwise from top-left, and
# which ring indices are 8-adjacent to each other within the ring.
_RING = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))
_RING_ADJ = tuple(
    tuple(
        j
        for j in range(8)
        if j != i
        and max(abs(_RING[i][0] - _RING[j][0]), abs(_RING[i][1] - _RING[j][1])) == 1
    )
    for i in range(8)
)


class _LandConnectivity:
    """Union-find over land cells plus a virtual outside-the-tile node.

    Supports the only mutation thinning needs: a water cell turning into
    land. A land region is "open" when it is connected to the outside.
    """

    OUTSIDE = 0

    def __init__(self, mask: np.ndarray):
        rows, cols = mask.shape
        self.rows, self.cols = rows, cols
        self.parent = list(range(rows * cols + 1))
        for r in range(rows):
            base = r * cols
            for c in range(cols):
                if mask[r, c]:
                    continue
                idx = base + c + 1
                if r == 0 or c == 0 or r == rows - 1 or c == cols - 1:
                    self._union(idx, self.OUTSIDE)
                if r > 0 and not mask[r - 1, c]:
                    self._union(idx, idx - cols)
                if c > 0 and not mask[r, c - 1]:
                    self._union(idx, idx - 1)

    def _find(self, x: int) -> int:
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def _union(self, a: int, b: int) -> None:
        ra, rb = self._find(a), self._find(b)
        if ra != rb:
            # Keep the outside node a root so openness is a root identity check.
            if rb == self.OUTSIDE:
                ra, rb = rb, ra
            self.parent[rb] = ra

    def _idx(self, r: int, c: int) -> int:
        return r * self.cols + c + 1

    def add_land(self, r: int, c: int, mask: np.ndarray) -> None:
        idx = self._idx(r, c)
        if r == 0 or c == 0 or r == self.rows - 1 or c == self.cols - 1:
            self._union(idx, self.OUTSIDE)
        for dr, dc in OFFSETS_4:
            nr, nc = r + dr, c + dc
            if 0 <= nr < self.rows and 0 <= nc < self.cols and not mask[nr, nc]:
                self._union(idx, self._idx(nr, nc))

    def removal_opens_hole(self, r: int, c: int, mask: np.ndarray) -> bool:
        """Would turning water cell (r, c) into land create a closed land region?"""
        if r == 0 or c == 0 or r == self.rows - 1 or c == self.cols - 1:
            return False
        outside_root = self._find(self.OUTSIDE)
        for dr, dc in OFFSETS_4:
            nr, nc = r + dr, c + dc
            if not mask[nr, nc] and self._find(self._idx(nr, nc)) == outside_root:
                return False
        # Either an isolated land cell or a merge of closed regions only.
        return True


def _water_neighbors(mask: np.ndarray, r: int, c: int) -> list[int]:
    """Ring indices of water neighbors of (r, c)."""
    rows, cols = mask.shape
    out = []
    for i, (dr, dc) in enumerate(_RING):
        nr, nc = r + dr, c + dc
        if 0 <= nr < rows and 0 <= nc < cols and mask[nr, nc]:
            out.append(i)
    return out


def _ring_connected(neighbors: list[int]) -> bool:
    """Are the water neighbors one 8-connected group within the 3x3 ring?"""
    if len(neighbors) <= 1:
        return True
    present = set(neighbors)
    seen = {neighbors[0]}
    stack = [neighbors[0]]
    while stack:
        i = stack.pop()
        for j in _RING_ADJ[i]:
            if j in present and j not in seen:
                seen.add(j)
                stack.append(j)
    return len(seen) == len(present)


def _is_bridge(mask: np.ndarray, r: int, c: int, neighbors: list[int]) -> bool:
    """Does removing (r, c) disconnect its water neighbors?

    The local ring check is conclusive when it says "connected"; when the
    ring splits, a walk over the full mask (without the cell) decides.
    """
    if _ring_connected(neighbors):
        return False
    rows, cols = mask.shape
    targets = {(r + _RING[i][0], c + _RING[i][1]) for i in neighbors}
    start = next(iter(targets))
    seen = {start}
    remaining = targets - seen
    queue = deque([start])
    while queue and remaining:
        cr, cc = queue.popleft()
        for dr, dc in OFFSETS_8:
            nr, nc = cr + dr, cc + dc
            if (
                0 <= nr < rows
                and 0 <= nc < cols
                and mask[nr, nc]
                and (nr, nc) != (r, c)
                and (nr, nc) not in seen
            ):
                seen.add((nr, nc))
                remaining.discard((nr, nc))
                queue.append((nr, nc))
    return bool(remaining)


def _classify(
    mask: np.ndarray,
    reference: np.ndarray,
    land: _LandConnectivity,
    r: int,
    c: int,
) -> CellClass:
    if reference[r, c]:
        return CellClass.SKELETON
    neighbors = _water_neighbors(mask, r, c)
    if len(neighbors) <= 1:
        return CellClass.SKELETON
    if _is_bridge(mask, r, c, neighbors):
        return CellClass.SKELETON
    if land.removal_opens_hole(r, c, mask):
        return CellClass.INTERIOR
    return CellClass.REMOVABLE


def classify_cell(
    mask: RasterGrid, reference_mask: RasterGrid, cell: tuple[int, int]
) -> CellClass:
    """Classify one water cell of the mask. Raises if the cell is land."""
    ensure_aligned(mask, reference_mask)
    water = np.asarray(mask.values, dtype=bool) & ~mask.nodata_mask
    r, c = cell
    if not water[r, c]:
        raise HydroTraceError(f"cell {cell} is not a water cell")
    land = _LandConnectivity(water)
    return _classify(water, np.asarray(reference_mask.values, dtype=bool), land, r, c)


def classify_all(mask: RasterGrid, reference_mask: RasterGrid) -> dict[tuple[int, int], CellClass]:
    """Classify every water cell, sharing one land-connectivity structure."""
    ensure_aligned(mask, reference_mask)
    water = np.asarray(mask.values, dtype=bool) & ~mask.nodata_mask
    reference = np.asarray(reference_mask.values, dtype=bool)
    land = _LandConnectivity(water)
    return {
        (r, c): _classify(water, reference, land, r, c)
        for r, c in zip(*np.nonzero(water))
    }


def thin(mask: RasterGrid, elevation: RasterGrid, reference_mask: RasterGrid) -> RasterGrid:
    """Remove removable cells in descending elevation order until stable.

    Reference cells are pinned; the result keeps the component structure
    of the input (one skeleton per input waterway).
    """
    ensure_aligned(mask, elevation, reference_mask)
    water = (np.asarray(mask.values, dtype=bool) & ~mask.nodata_mask).copy()
    reference = np.asarray(reference_mask.values, dtype=bool)
    elev = elevation.values.astype(np.float64)

    land = _LandConnectivity(water)
    cls = {}
    removable = []
    rows, cols = water.shape
    for r in range(rows):
        for c in range(cols):
            if not water[r, c]:
                continue
            kind = _classify(water, reference, land, r, c)
            cls[(r, c)] = kind
            if kind is CellClass.REMOVABLE:
                removable.append((r, c))

    while removable:
        removable.sort(key=lambda cell: (-elev[cell], cell))
        promoted = []
        for cell in removable:
            r, c = cell
            if _classify(water, reference, land, r, c) is CellClass.REMOVABLE:
                water[r, c] = False
                del cls[cell]
                land.add_land(r, c, water)
            else:
                cls[cell] = CellClass.SKELETON
            for dr, dc in OFFSETS_8:
                nb = (r + dr, c + dc)
                if cls.get(nb) is CellClass.INTERIOR and _classify(
                    water, reference, land, nb[0], nb[1]
                ) is CellClass.REMOVABLE:
                    cls[nb] = CellClass.REMOVABLE
                    promoted.append(nb)
        if not promoted:
            # A removal can open a far-away hole's route to the outside, so
            # adjacency-driven re-checks alone may strand interior cells;
            # sweep them to reach a true fixpoint.
            for nb in sorted(k for k, v in cls.items() if v is CellClass.INTERIOR):
                if _classify(water, reference, land, nb[0], nb[1]) is CellClass.REMOVABLE:
                    cls[nb] = CellClass.REMOVABLE
                    promoted.append(nb)
        removable = promoted

    return mask.with_values(water)
