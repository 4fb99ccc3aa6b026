import numpy as np
import pytest

from fcbp import (
    CellIndex,
    cell_to_weight,
    image_flat,
    sino_flat,
    weight_to_cell,
)


def test_sino_flat_corners(default_geom):
    assert sino_flat(1, 1, default_geom) == 1
    assert sino_flat(90, 128, default_geom) == 11520
    assert sino_flat(2, 1, default_geom) == 129


def test_image_flat_corners(default_geom):
    assert image_flat(1, 1, default_geom) == 1
    assert image_flat(64, 64, default_geom) == 4096
    assert image_flat(2, 1, default_geom) == 65


@pytest.mark.parametrize("p,q", [(0, 1), (1, 0), (91, 1), (1, 129)])
def test_sino_flat_rejects_out_of_range(default_geom, p, q):
    with pytest.raises(IndexError):
        sino_flat(p, q, default_geom)


@pytest.mark.parametrize("c,t", [(0, 1), (1, 0), (65, 1), (1, 65)])
def test_image_flat_rejects_out_of_range(default_geom, c, t):
    with pytest.raises(IndexError):
        image_flat(c, t, default_geom)


def test_cell_to_weight_corners(default_geom):
    assert cell_to_weight(CellIndex(1, 1, 1, 1), default_geom) == (1, 1)
    assert cell_to_weight(CellIndex(64, 90, 64, 128), default_geom) == (11520, 4096)


def test_weight_to_cell_examples(default_geom):
    assert weight_to_cell(1, 1, default_geom) == CellIndex(1, 1, 1, 1)
    assert weight_to_cell(129, 65, default_geom) == CellIndex(k=1, l=2, a=2, b=1)


def test_round_trip_random_cells(default_geom, rng):
    for _ in range(1000):
        cell = CellIndex(
            k=int(rng.integers(1, 65)),
            l=int(rng.integers(1, 91)),
            a=int(rng.integers(1, 65)),
            b=int(rng.integers(1, 129)),
        )
        i, j = cell_to_weight(cell, default_geom)
        assert weight_to_cell(i, j, default_geom) == cell


def test_exhaustive_bijection_desk_scale(desk_geom):
    g = desk_geom
    k = np.arange(1, g.image_cols + 1)[:, None, None, None]
    l = np.arange(1, g.n_views + 1)[None, :, None, None]
    a = np.arange(1, g.image_rows + 1)[None, None, :, None]
    b = np.arange(1, g.n_detectors + 1)[None, None, None, :]
    i, j = cell_to_weight(CellIndex(k, l, a, b), g)
    back = weight_to_cell(i, j, g)
    assert (back.k == k).all() and (back.l == l).all()
    assert (back.a == a).all() and (back.b == b).all()
    # Both flat maps are bijections onto their full ranges.
    pairs = i * (g.image_len + 1) + j
    assert np.unique(pairs).size == g.sinogram_len * g.image_len


def test_fixed_view_detector_sweeps_full_image(default_geom):
    g = default_geom
    a = np.arange(1, g.image_rows + 1)[:, None]
    k = np.arange(1, g.image_cols + 1)[None, :]
    i, j = cell_to_weight(CellIndex(k, 12, a, 64), g)
    assert np.unique(np.asarray(i)).size == 1
    assert np.unique(j).size == g.image_len


def test_weight_to_cell_rejects_out_of_range(default_geom):
    with pytest.raises(IndexError):
        weight_to_cell(0, 1, default_geom)
    with pytest.raises(IndexError):
        weight_to_cell(1, 4097, default_geom)
    with pytest.raises(IndexError):
        weight_to_cell(11521, 1, default_geom)
