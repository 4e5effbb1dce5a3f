import numpy as np
import pytest

from hilbertfc.exceptions import BoundsError, ConfigurationError
from hilbertfc.features.hilbert import build_curve, coord_to_index, index_to_coord


def test_order_one_traversal():
    curve = build_curve(1)
    visited = [curve.index_to_coord(h) for h in range(8)]
    assert visited == [
        (0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0),
        (1, 1, 0), (1, 1, 1), (1, 0, 1), (1, 0, 0),
    ]


@pytest.mark.parametrize("order", [1, 2, 3, 4, 6])
def test_curve_is_a_bijection_with_unit_steps(order):
    curve = build_curve(order)
    coords = curve.coordinates

    assert coords.shape == (curve.total_cells, 3)
    assert coords.min() == 0 and coords.max() == curve.side - 1
    assert len(np.unique(coords, axis=0)) == curve.total_cells
    assert tuple(coords[0]) == (0, 0, 0)

    steps = np.abs(np.diff(coords, axis=0)).sum(axis=1)
    assert np.all(steps == 1)


@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_roundtrip_over_the_whole_cube(order):
    curve = build_curve(order)
    indices = np.arange(curve.total_cells)
    assert np.array_equal(curve.coords_to_indices(curve.indices_to_coords(indices)), indices)

    grid = np.stack(np.meshgrid(*[np.arange(curve.side)] * 3, indexing="ij"), -1).reshape(-1, 3)
    assert np.array_equal(curve.indices_to_coords(curve.coords_to_indices(grid)), grid)


def test_scalar_mappings_agree_with_table():
    curve = build_curve(6)
    rng = np.random.default_rng(0)
    for h in rng.integers(0, curve.total_cells, size=200):
        x, y, z = index_to_coord(curve, int(h))
        assert (x, y, z) == tuple(curve.coordinates[h])
        assert coord_to_index(curve, x, y, z) == h


def test_curves_of_same_order_are_equal():
    assert build_curve(5) == build_curve(5)
    assert np.array_equal(build_curve(3).coordinates, build_curve(3).coordinates)


def test_coordinate_table_is_read_only():
    table = build_curve(2).coordinates
    with pytest.raises(ValueError):
        table[0, 0] = 1


@pytest.mark.parametrize("order", [0, -1, 11])
def test_invalid_order(order):
    with pytest.raises(ConfigurationError):
        build_curve(order)


def test_out_of_range_arguments():
    curve = build_curve(3)
    with pytest.raises(BoundsError):
        curve.index_to_coord(curve.total_cells)
    with pytest.raises(BoundsError):
        curve.index_to_coord(-1)
    with pytest.raises(BoundsError):
        curve.coord_to_index(8, 0, 0)
    with pytest.raises(BoundsError):
        curve.coord_to_index(0, -1, 0)
