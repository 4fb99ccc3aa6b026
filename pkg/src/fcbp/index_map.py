"""Index algebra between sinogram, image, and dense-layer weight coordinates.

All public indices are 1-based; flattening is row-major. A sinogram sample
at (view p, detector q) flattens to i = (p-1)*Q + q and an image pixel at
(row c, col t) to j = (c-1)*T + t. The dense layer's weight matrix W is
addressed as W[i, j] with i on the sinogram (input) side and j on the image
(output) side; the cell view regroups W into image-shaped slices, one per
(view, detector) pair.

Every function accepts plain ints or integer ndarrays (vectorized).
"""

from typing import NamedTuple

import numpy as np

from .geometry import FanBeamGeometry


class SinoIndex(NamedTuple):
    p: int  # view (row)
    q: int  # detector (column)
    flat: int


class ImageIndex(NamedTuple):
    c: int  # image row
    t: int  # image column
    flat: int


class CellIndex(NamedTuple):
    k: int  # image column
    l: int  # view
    a: int  # image row
    b: int  # detector


def _check_range(name, value, upper):
    v = np.asarray(value)
    if ((v < 1) | (v > upper)).any():
        raise IndexError(f"{name} out of range 1..{upper}")


def sino_flat(p, q, geom: FanBeamGeometry):
    """Flat 1-based sinogram index for (view p, detector q)."""
    _check_range("view p", p, geom.n_views)
    _check_range("detector q", q, geom.n_detectors)
    return (p - 1) * geom.n_detectors + q


def image_flat(c, t, geom: FanBeamGeometry):
    """Flat 1-based image index for (row c, col t)."""
    _check_range("row c", c, geom.image_rows)
    _check_range("col t", t, geom.image_cols)
    return (c - 1) * geom.image_cols + t


def sino_index(p: int, q: int, geom: FanBeamGeometry) -> SinoIndex:
    return SinoIndex(p, q, sino_flat(p, q, geom))


def image_index(c: int, t: int, geom: FanBeamGeometry) -> ImageIndex:
    return ImageIndex(c, t, image_flat(c, t, geom))


def cell_to_weight(cell: CellIndex, geom: FanBeamGeometry):
    """Map cell coordinates (k, l, a, b) to weight coordinates (i, j).

    i is the flat sinogram index of (view l, detector b); j is the flat
    image index of (row a, col k). Bijective onto the full weight domain.
    """
    k, l, a, b = cell
    i = sino_flat(l, b, geom)
    j = image_flat(a, k, geom)
    return i, j


def weight_to_cell(i, j, geom: FanBeamGeometry) -> CellIndex:
    """Exact inverse of :func:`cell_to_weight`."""
    _check_range("weight row i", i, geom.sinogram_len)
    _check_range("weight col j", j, geom.image_len)
    q = geom.n_detectors
    t = geom.image_cols
    l = (i - 1) // q + 1
    b = (i - 1) % q + 1
    a = (j - 1) // t + 1
    k = (j - 1) % t + 1
    return CellIndex(k, l, a, b)
