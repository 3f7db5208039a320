import numpy as np
import pytest

from hydrotrace.errors import EmptyRasterError, GeoreferenceMismatchError
from hydrotrace.grid import (
    ConnectivityRule,
    RasterGrid,
    WATER8_LAND4,
    ensure_aligned,
    label_components,
)

from oracles import flood_fill_labels


def grid_of(mask):
    return RasterGrid(np.asarray(mask, dtype=bool), origin_lon=10.0, origin_lat=50.0, cell_size=0.01)


def test_diagonal_water_shares_label():
    mask = np.zeros((3, 3), dtype=bool)
    mask[0, 0] = mask[1, 1] = True
    labels = label_components(grid_of(mask))
    assert labels.component_count == 1
    assert labels.labels[0, 0] == labels.labels[1, 1] == 1


def test_all_land_has_no_components():
    labels = label_components(grid_of(np.zeros((3, 3), dtype=bool)))
    assert labels.component_count == 0
    assert not labels.labels.any()


def test_empty_raster_rejected():
    with pytest.raises(EmptyRasterError, match="empty raster"):
        RasterGrid(np.zeros((0, 0)))


def test_nodata_cells_count_as_land():
    mask = np.ones((2, 2), dtype=bool)
    nodata = np.zeros((2, 2), dtype=bool)
    nodata[0, 0] = True
    grid = RasterGrid(mask, nodata_mask=nodata)
    labels = label_components(grid)
    assert labels.labels[0, 0] == 0
    assert labels.component_count == 1


def test_labels_match_flood_fill_oracle_on_random_masks():
    rng = np.random.RandomState(7)
    for _ in range(1000):
        mask = rng.rand(16, 16) < rng.uniform(0.2, 0.7)
        got = label_components(grid_of(mask)).labels
        expected = flood_fill_labels(mask, 8)
        assert np.array_equal(got, expected)


def test_land_four_connectivity_splits_diagonals():
    # Land on the main diagonal, water on the off-diagonal: the two land
    # cells must be separate regions under the 4-connected land rule.
    mask = np.array([[False, True], [True, False]])
    land_rule = ConnectivityRule(water_connectivity=4, land_connectivity=4)
    labels = label_components(grid_of(~mask), land_rule)
    assert labels.component_count == 2


def test_component_cells_and_min_elevation():
    mask = np.array([[True, True, False], [False, False, False], [False, False, True]])
    elev = RasterGrid(np.arange(9, dtype=float).reshape(3, 3))
    labels = label_components(grid_of(mask))
    assert labels.component_count == 2
    assert labels.component_cells(1) == [(0, 0), (0, 1)]
    mins = labels.min_elevation_cells(elev)
    assert mins[1] == (0, 0)
    assert mins[2] == (2, 2)


def test_min_elevation_tie_breaks_row_major():
    mask = np.ones((2, 2), dtype=bool)
    elev = RasterGrid(np.zeros((2, 2)))
    labels = label_components(grid_of(mask))
    assert labels.min_elevation_cells(elev)[1] == (0, 0)


def test_ensure_aligned_rejects_shape_mismatch():
    a = RasterGrid(np.zeros((100, 100)))
    b = RasterGrid(np.zeros((99, 100)))
    with pytest.raises(GeoreferenceMismatchError, match="georeference mismatch"):
        ensure_aligned(a, b)


def test_ensure_aligned_rejects_origin_mismatch():
    a = RasterGrid(np.zeros((4, 4)), origin_lon=0.0)
    b = RasterGrid(np.zeros((4, 4)), origin_lon=0.5)
    with pytest.raises(GeoreferenceMismatchError):
        ensure_aligned(a, b)


def test_cell_midpoint_geometry():
    g = RasterGrid(np.zeros((4, 4)), origin_lon=10.0, origin_lat=50.0, cell_size=0.1)
    assert g.cell_midpoint(0, 0) == (10.05, 49.95)
    assert g.cell_midpoint(3, 1) == pytest.approx((10.15, 49.65))


def test_connectivity_rule_defaults_are_mixed():
    assert WATER8_LAND4.water_connectivity == 8
    assert WATER8_LAND4.land_connectivity == 4
