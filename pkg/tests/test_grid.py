import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gssbl.errors import ConfigurationError
from gssbl.grid import DEFAULT_CELL_SIZE, VoxelGrid, index_of, voxel_center

G222 = VoxelGrid((0, 0, 0), (25, 25, 10), (2, 2, 2))


def test_first_and_last_centres():
    np.testing.assert_array_equal(voxel_center(G222, 0), [12.5, 12.5, 5.0])
    np.testing.assert_array_equal(voxel_center(G222, 7), [37.5, 37.5, 15.0])


def test_default_cell_matches_survey_maps():
    assert DEFAULT_CELL_SIZE == (25.0, 25.0, 10.0)


def test_index_of_corners():
    assert index_of(G222, 0, 0, 0) == 0
    assert index_of(G222, 1, 1, 1) == 7
    # x varies fastest
    assert index_of(G222, 1, 0, 0) == 1
    assert index_of(G222, 0, 1, 0) == 2
    assert index_of(G222, 0, 0, 1) == 4


def test_exhaustive_round_trip_3x4x5():
    g = VoxelGrid((1.0, -2.0, 3.0), (2.0, 3.0, 4.0), (3, 4, 5))
    seen = set()
    for i in range(g.n_voxels):
        ijk = g.coords_of(i)
        assert g.index_of(*ijk) == i
        seen.add(ijk)
    assert len(seen) == 60
    np.testing.assert_array_equal(g.centers(), np.array([g.voxel_center(i) for i in range(60)]))


@pytest.mark.parametrize("bad", [-1, 8, 100])
def test_index_bounds(bad):
    with pytest.raises(IndexError):
        G222.voxel_center(bad)


def test_coordinate_bounds():
    with pytest.raises(IndexError):
        G222.index_of(2, 0, 0)
    with pytest.raises(IndexError):
        G222.index_of(0, -1, 0)


@pytest.mark.parametrize("kw", [dict(counts=(0, 1, 1)), dict(cell_size=(1, 0, 1)), dict(counts=(1.5, 1, 1))])
def test_invalid_grids(kw):
    args = dict(origin=(0, 0, 0), cell_size=(1, 1, 1), counts=(1, 1, 1))
    args.update(kw)
    with pytest.raises(ConfigurationError):
        VoxelGrid(**args)


dims = st.integers(1, 12)


@settings(max_examples=40, deadline=None)
@given(nx=dims, ny=dims, nz=dims,
       cell=st.tuples(*[st.floats(0.1, 50)] * 3),
       origin=st.tuples(*[st.floats(-1e3, 1e3)] * 3))
def test_bijection_and_centres_inside(nx, ny, nz, cell, origin):
    g = VoxelGrid(origin, cell, (nx, ny, nz))
    idx = np.arange(g.n_voxels)
    back = [g.index_of(*g.coords_of(int(i))) for i in idx]
    assert back == list(idx)
    c = g.centers()
    assert np.all(c > np.asarray(g.origin)) and np.all(c < g.upper)


def test_dict_round_trip():
    g = VoxelGrid((1, 2, 3), (4, 5, 6), (7, 8, 9))
    assert VoxelGrid.from_dict(g.to_dict()) == g
