"""Sparse fan-beam system matrix: forward projection, back projection, row maps.

The matrix is built pixel-driven: for every view, each pixel center is
projected through the fan geometry onto the flat detector line and its unit
weight is split between the two nearest detector cells by linear
interpolation. Forward projection applies the matrix; back projection
applies its exact transpose, so the pair is adjoint by construction. No
ramp filter and no fan-beam (cosine/distance) weighting is applied: the
back projector is the plain unfiltered adjoint.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ConfigError, FormatError
from .geometry import FanBeamGeometry, validate

_SM_MAGIC = b"FCBPSM"
_SM_VERSION = 1


@dataclass(frozen=True)
class SystemMatrix:
    """Sparse projection operator of shape (sinogram_len, image_len).

    Rows follow the flat sinogram order (view-major), columns the flat
    image order (row-major); ``matrix`` is CSR so one row is exactly the
    image-shaped weight map of one (view, detector) pair.
    """

    geom: FanBeamGeometry
    matrix: sparse.csr_matrix

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def row_offsets(self) -> np.ndarray:
        return self.matrix.indptr


def _pixel_centers_mm(geom: FanBeamGeometry):
    """(x, y) coordinates of all pixel centers, flattened in image order."""
    px = geom.pixel_size_mm
    rows, cols = geom.image_rows, geom.image_cols
    x = ((np.arange(1, cols + 1) - 0.5) - cols / 2.0) * px
    y = (rows / 2.0 - (np.arange(1, rows + 1) - 0.5)) * px
    xx, yy = np.meshgrid(x, y)  # shape (rows, cols)
    return xx.ravel(), yy.ravel()


def build_system_matrix(geom: FanBeamGeometry) -> SystemMatrix:
    """Assemble the sparse fan-beam operator for ``geom``.

    For each view the source sits at distance ``source_to_center_mm`` from
    the rotation center and the detector line at ``source_to_detector_mm``
    from the source, perpendicular to the central ray. A pixel whose
    projected splat does not fall fully inside the detector array
    contributes nothing.

    Raises
    ------
    ConfigError
        If the geometry violates any invariant.
    """
    violations = validate(geom)
    if violations:
        raise ConfigError("invalid geometry: " + ", ".join(violations))

    sod = geom.source_to_center_mm
    sdd = geom.source_to_detector_mm
    pitch = geom.detector_pitch_mm
    n_det = geom.n_detectors
    n_pix = geom.image_len

    xs, ys = _pixel_centers_mm(geom)
    cols = np.arange(n_pix)

    rows_out = []
    cols_out = []
    vals_out = []
    for view in range(geom.n_views):
        theta = np.deg2rad(view * geom.angular_step_deg)
        cos_t, sin_t = np.cos(theta), np.sin(theta)
        # Lateral / depth coordinates of each pixel in the rotated frame:
        # the source sits at sod * (cos, sin), the central ray points back
        # through the origin.
        lateral = -xs * sin_t + ys * cos_t
        depth = sod - (xs * cos_t + ys * sin_t)
        with np.errstate(divide="ignore", invalid="ignore"):
            det_mm = lateral * (sdd / depth)
        # Continuous 1-based detector coordinate; cell b is centered at
        # ((b - 0.5) - n/2) * pitch.
        det_pos = det_mm / pitch + n_det / 2.0 + 0.5
        lo = np.floor(det_pos)
        w_hi = det_pos - lo
        lo = lo.astype(np.int64)
        in_field = (depth > 0) & (lo >= 1) & (lo <= n_det - 1)

        lo = lo[in_field]
        w_hi = w_hi[in_field]
        pix = cols[in_field]
        row_base = view * n_det
        rows_out.append(row_base + lo - 1)
        cols_out.append(pix)
        vals_out.append(1.0 - w_hi)
        rows_out.append(row_base + lo)
        cols_out.append(pix)
        vals_out.append(w_hi)

    rows_all = np.concatenate(rows_out)
    cols_all = np.concatenate(cols_out)
    vals_all = np.concatenate(vals_out)
    keep = vals_all > 0.0
    mat = sparse.coo_matrix(
        (vals_all[keep], (rows_all[keep], cols_all[keep])),
        shape=(geom.sinogram_len, n_pix),
        dtype=np.float64,
    ).tocsr()
    return SystemMatrix(geom=geom, matrix=mat)


def forward_project(sm: SystemMatrix, image: np.ndarray) -> np.ndarray:
    """Project an image to its (n_views, n_detectors) sinogram."""
    geom = sm.geom
    image = np.asarray(image)
    if image.shape != geom.image_shape:
        raise ValueError(
            f"image shape {image.shape} does not match grid {geom.image_shape}"
        )
    sino = sm.matrix @ image.ravel().astype(np.float64)
    return sino.reshape(geom.sinogram_shape)


def back_project(sm: SystemMatrix, sino: np.ndarray) -> np.ndarray:
    """Apply the exact transpose of the forward operator (unfiltered)."""
    geom = sm.geom
    sino = np.asarray(sino)
    if sino.shape != geom.sinogram_shape:
        raise ValueError(
            f"sinogram shape {sino.shape} does not match {geom.sinogram_shape}"
        )
    img = sm.matrix.T @ sino.ravel().astype(np.float64)
    return img.reshape(geom.image_shape)


def analytic_weight_map(sm: SystemMatrix, l: int, b: int) -> np.ndarray:
    """Image-shaped slice of the operator for 1-based (view l, detector b).

    Equals the matrix row of that sinogram sample reshaped to the grid:
    nonzero exactly on the strip of pixels whose projection at view l
    interpolates into detector b.
    """
    geom = sm.geom
    if not 1 <= l <= geom.n_views:
        raise IndexError(f"view index {l} out of range 1..{geom.n_views}")
    if not 1 <= b <= geom.n_detectors:
        raise IndexError(f"detector index {b} out of range 1..{geom.n_detectors}")
    row = (l - 1) * geom.n_detectors + (b - 1)
    return sm.matrix[row].toarray().reshape(geom.image_shape)


_TRIPLET_DTYPE = np.dtype([("i", "<u4"), ("j", "<u4"), ("w", "<f4")])


def write_system_matrix(path, sm: SystemMatrix) -> None:
    """Export as magic + version + count + (i, j, w) triplets, 1-based, LE."""
    coo = sm.matrix.tocoo()
    triplets = np.empty(coo.nnz, dtype=_TRIPLET_DTYPE)
    triplets["i"] = coo.row + 1
    triplets["j"] = coo.col + 1
    triplets["w"] = coo.data.astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_SM_MAGIC)
        fh.write(struct.pack("<IQ", _SM_VERSION, coo.nnz))
        fh.write(triplets.tobytes())


def read_system_matrix(path, geom: FanBeamGeometry) -> SystemMatrix:
    """Read a triplet export back into a SystemMatrix for ``geom``."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_SM_MAGIC))
        if magic != _SM_MAGIC:
            raise FormatError(
                f"bad system-matrix magic {magic!r}, expected {_SM_MAGIC!r}"
            )
        header = fh.read(12)
        if len(header) != 12:
            raise FormatError("truncated system-matrix header")
        version, count = struct.unpack("<IQ", header)
        if version != _SM_VERSION:
            raise FormatError(f"unsupported system-matrix version {version}")
        payload = fh.read(count * _TRIPLET_DTYPE.itemsize)
        if len(payload) != count * _TRIPLET_DTYPE.itemsize:
            raise FormatError("truncated system-matrix payload")
        if fh.read(1):
            raise FormatError("trailing bytes after system-matrix payload")
    triplets = np.frombuffer(payload, dtype=_TRIPLET_DTYPE)
    i = triplets["i"].astype(np.int64) - 1
    j = triplets["j"].astype(np.int64) - 1
    if count and (
        i.min() < 0
        or i.max() >= geom.sinogram_len
        or j.min() < 0
        or j.max() >= geom.image_len
    ):
        raise FormatError("system-matrix indices out of range for geometry")
    mat = sparse.coo_matrix(
        (triplets["w"].astype(np.float64), (i, j)),
        shape=(geom.sinogram_len, geom.image_len),
    ).tocsr()
    return SystemMatrix(geom=geom, matrix=mat)
