import numpy as np
import pytest

from hydrotrace.errors import HydroTraceError
from hydrotrace.grid import RasterGrid
from hydrotrace.thin import CellClass, classify_cell, thin

from oracles import count_components, thin_by_pseudocode


def grids(mask, elev=None, ref=None):
    mask = np.asarray(mask, dtype=bool)
    elev = np.zeros_like(mask, dtype=float) if elev is None else np.asarray(elev, dtype=float)
    ref = np.zeros_like(mask) if ref is None else np.asarray(ref, dtype=bool)
    g = RasterGrid(mask)
    return g, g.with_values(elev), g.with_values(ref)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------


def test_isolated_cell_is_skeleton():
    mask = np.zeros((3, 3), dtype=bool)
    mask[1, 1] = True
    m, _, r = grids(mask)
    assert classify_cell(m, r, (1, 1)) is CellClass.SKELETON


def test_center_of_full_block_is_interior():
    m, _, r = grids(np.ones((3, 3), dtype=bool))
    assert classify_cell(m, r, (1, 1)) is CellClass.INTERIOR


def test_two_by_two_cells_are_removable():
    mask = np.zeros((4, 4), dtype=bool)
    mask[1:3, 1:3] = True
    m, _, r = grids(mask)
    for cell in ((1, 1), (1, 2), (2, 1), (2, 2)):
        assert classify_cell(m, r, cell) is CellClass.REMOVABLE


def test_bridge_cell_is_skeleton():
    m, _, r = grids([[True, True, True]])
    assert classify_cell(m, r, (0, 1)) is CellClass.SKELETON


def test_reference_cell_is_always_skeleton():
    mask = np.ones((4, 4), dtype=bool)
    ref = np.zeros((4, 4), dtype=bool)
    ref[1, 1] = True
    m, _, r = grids(mask, ref=ref)
    assert classify_cell(m, r, (1, 1)) is CellClass.SKELETON


def test_classifying_land_cell_raises():
    m, _, r = grids(np.zeros((2, 2), dtype=bool) | [[True, False], [False, False]])
    with pytest.raises(HydroTraceError, match="not a water cell"):
        classify_cell(m, r, (1, 1))


# ---------------------------------------------------------------------------
# thinning
# ---------------------------------------------------------------------------


def test_line_is_already_thin():
    m, e, r = grids([[True, True, True]])
    assert np.array_equal(thin(m, e, r).values, m.values)


def test_block_thins_to_low_elevation_column():
    # 2x4 block, elevation rising left to right: the skeleton must match
    # the pseudocode transcription and sit in the low column.
    mask = np.ones((2, 4), dtype=bool)
    elev = np.tile(np.linspace(0.0, 10.0, 4), (2, 1))
    m, e, r = grids(mask, elev)
    got = thin(m, e, r).values
    expected = thin_by_pseudocode(mask, elev, np.zeros_like(mask))
    assert np.array_equal(got, expected)
    assert got[:, 0].all() and not got[:, 1:].any()


def test_matches_pseudocode_oracle_on_random_masks():
    rng = np.random.RandomState(21)
    for _ in range(80):
        rows, cols = rng.randint(3, 11), rng.randint(3, 11)
        mask = rng.rand(rows, cols) < rng.uniform(0.35, 0.85)
        elev = np.round(rng.rand(rows, cols) * 9, 2)
        ref = mask & (rng.rand(rows, cols) < 0.05)
        m, e, r = grids(mask, elev, ref)
        got = thin(m, e, r).values
        expected = thin_by_pseudocode(mask, elev, ref)
        assert np.array_equal(got, expected), (mask, elev, ref)


def test_elevation_bias_in_sloped_corridors():
    # Two-cell-wide corridor with a strict cross slope: thinning keeps the
    # lower side, matching the pseudocode oracle exactly.
    for horizontal in (True, False):
        mask = np.ones((2, 8) if horizontal else (8, 2), dtype=bool)
        cross = np.array([0.0, 5.0])
        elev = np.tile(cross[:, None], (1, 8)) if horizontal else np.tile(cross[None, :], (8, 1))
        m, e, r = grids(mask, elev)
        got = thin(m, e, r).values
        expected = thin_by_pseudocode(mask, elev, np.zeros_like(mask))
        assert np.array_equal(got, expected)
        low_side = got[0, :] if horizontal else got[:, 0]
        high_side = got[1, :] if horizontal else got[:, 1]
        assert low_side.all()
        assert not high_side.any()


def _random_case(rng, size=32):
    rows, cols = rng.randint(4, size + 1), rng.randint(4, size + 1)
    mask = rng.rand(rows, cols) < rng.uniform(0.3, 0.8)
    elev = np.round(rng.rand(rows, cols) * 50, 3)
    ref = mask & (rng.rand(rows, cols) < 0.04)
    return mask, elev, ref


def test_topology_and_shrinkage_properties():
    rng = np.random.RandomState(9)
    for _ in range(250):
        mask, elev, ref = _random_case(rng, size=20)
        m, e, r = grids(mask, elev, ref)
        out = thin(m, e, r).values
        assert count_components(out, 8) == count_components(mask, 8)
        assert not (out & ~mask).any()  # monotone shrinkage
        assert (out | ~ref.astype(bool) | out).all() or (out[ref]).all()  # reference pinned
        assert out[ref].all()


def test_idempotence():
    rng = np.random.RandomState(10)
    for _ in range(60):
        mask, elev, ref = _random_case(rng, size=16)
        m, e, r = grids(mask, elev, ref)
        once = thin(m, e, r)
        twice = thin(once, e, r)
        assert np.array_equal(once.values, twice.values)


def test_no_removable_cells_remain():
    rng = np.random.RandomState(12)
    for _ in range(60):
        mask, elev, ref = _random_case(rng, size=16)
        m, e, r = grids(mask, elev, ref)
        out = thin(m, e, r)
        rgrid = m.with_values(np.asarray(ref, dtype=bool))
        for cell in zip(*np.nonzero(out.values)):
            assert classify_cell(out, rgrid, cell) is not CellClass.REMOVABLE
