import numpy as np
import pytest

from terrascout.grids import (
    GridError,
    GridSpec,
    Raster,
    raster_from_binary,
    raster_from_csv,
    raster_to_binary,
    raster_to_csv,
)


def test_cell_lookup_half_open():
    spec = GridSpec(0.0, 0.0, 1.0, 4, 6)
    assert spec.cell_of(0.0, 0.0) == (0, 0)
    assert spec.cell_of(0.999999, 0.0) == (0, 0)
    # a boundary point belongs to the upper cell
    assert spec.cell_of(1.0, 0.0) == (1, 0)
    assert spec.cell_of(3.2, 4.7) == (3, 4)
    with pytest.raises(GridError):
        spec.cell_of(4.0, 0.0)
    with pytest.raises(GridError):
        spec.cell_of(-0.001, 0.0)


def test_grid_validation():
    with pytest.raises(GridError):
        GridSpec(0, 0, 0.0, 4, 4)
    with pytest.raises(GridError):
        GridSpec(0, 0, 1.0, 0, 4)
    with pytest.raises(GridError):
        Raster(GridSpec(0, 0, 1.0, 2, 2), np.zeros((3, 2)))


def test_cell_centers():
    spec = GridSpec(1.0, 2.0, 0.5, 2, 3)
    xg, yg = spec.cell_centers()
    assert xg.shape == (3, 2)
    assert xg[0, 0] == pytest.approx(1.25)
    assert yg[2, 1] == pytest.approx(3.25)


def test_csv_round_trip():
    spec = GridSpec(-1.0, 2.5, 0.25, 3, 2)
    values = np.array([[1.0, 2.5, 3.125], [0.1, -4.0, 5.0]])
    raster = Raster(spec, values)
    text = raster_to_csv(raster)
    back = raster_from_csv(text)
    assert back.spec == spec
    assert np.array_equal(back.values, values)
    # byte-stable serialization
    assert raster_to_csv(back) == text


def test_binary_round_trip():
    spec = GridSpec(0.0, 0.0, 0.5, 4, 3)
    values = np.linspace(0, 1, 12).reshape(3, 4)
    blob = raster_to_binary(Raster(spec, values))
    back = raster_from_binary(blob)
    assert back.spec == spec
    assert np.array_equal(back.values, values)
    assert len(blob) == 32 + 12 * 8


def test_binary_rejects_truncation():
    spec = GridSpec(0.0, 0.0, 0.5, 2, 2)
    blob = raster_to_binary(Raster(spec, np.zeros((2, 2))))
    with pytest.raises(GridError):
        raster_from_binary(blob[:-1])


def test_csv_rejects_ragged_rows():
    text = "# origin_x=0.0 origin_y=0.0 cell_size=1.0 width=3 height=2\nx0,x1,x2\n1,2,3\n1,2\n"
    with pytest.raises(GridError):
        raster_from_csv(text)
