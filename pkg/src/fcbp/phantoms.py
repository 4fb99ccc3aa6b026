"""Synthetic training/evaluation images and the dataset file format.

Training images are sums of random ellipses clipped to [0, 1]; evaluation
uses the classic ten-ellipse head phantom rescaled to [0, 1]. A dataset
pairs each image with its noise-free forward projection.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .geometry import (
    GEOMETRY_FIELDS,
    GEOMETRY_INT_FIELDS,
    FanBeamGeometry,
    validate,
)
from .projector import SystemMatrix, forward_project

_DS_MAGIC = b"FCBP"
_DS_VERSION = 1

# Classic head phantom: (amplitude, semi_x, semi_y, x0, y0, angle_deg) on
# the [-1, 1]^2 square (Shepp & Logan's ten-ellipse table).
_HEAD_ELLIPSES = (
    (2.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.98, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.02, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.02, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.01, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.01, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.01, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.01, 0.0230, 0.0230, 0.00, -0.6050, 0.0),
    (0.01, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
)


def _mirror(e):
    amp, sx, sy, x0, y0, ang = e
    return (amp, sx, sy, -x0, y0, -ang)


# Left-right symmetrized variant: asymmetric entries are replaced by exact
# mirror pairs so reflection tests hold to the bit.
_HEAD_ELLIPSES_SYMMETRIC = (
    _HEAD_ELLIPSES[0],
    _HEAD_ELLIPSES[1],
    _HEAD_ELLIPSES[2],
    _mirror(_HEAD_ELLIPSES[2]),
    _HEAD_ELLIPSES[4],
    _HEAD_ELLIPSES[5],
    _HEAD_ELLIPSES[6],
    _HEAD_ELLIPSES[7],
    _HEAD_ELLIPSES[8],
    _mirror(_HEAD_ELLIPSES[7]),
)


def _pixel_grid(geom: FanBeamGeometry):
    """Pixel-center coordinates in mm, x right / y up, shape (rows, cols)."""
    px = geom.pixel_size_mm
    rows, cols = geom.image_rows, geom.image_cols
    x = ((np.arange(1, cols + 1) - 0.5) - cols / 2.0) * px
    y = (rows / 2.0 - (np.arange(1, rows + 1) - 0.5)) * px
    return np.meshgrid(x, y)


def _add_ellipse(img, xx, yy, amp, sx, sy, x0, y0, angle_deg):
    phi = np.deg2rad(angle_deg)
    c, s = np.cos(phi), np.sin(phi)
    dx = xx - x0
    dy = yy - y0
    xi = dx * c + dy * s
    eta = -dx * s + dy * c
    img[(xi / sx) ** 2 + (eta / sy) ** 2 <= 1.0] += amp


def random_ellipse_phantom(seed, geom: FanBeamGeometry, n_ellipses=None) -> np.ndarray:
    """Random sum of 2-8 ellipses, clipped to [0, 1]; deterministic per seed.

    Centers fall inside the circle inscribed in the grid, semi-axes span
    8%-45% of the image width, and intensities 0.1-0.6 add where ellipses
    overlap. ``n_ellipses`` overrides the drawn count (0 gives a blank
    image; used by tests).
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9)) if n_ellipses is None else int(n_ellipses)
    width_mm = geom.image_cols * geom.pixel_size_mm
    radius_mm = min(geom.image_rows, geom.image_cols) * geom.pixel_size_mm / 2.0

    xx, yy = _pixel_grid(geom)
    img = np.zeros(geom.image_shape, dtype=np.float64)
    for _ in range(n):
        r = radius_mm * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, 2.0 * np.pi)
        x0, y0 = r * np.cos(phi), r * np.sin(phi)
        sx = rng.uniform(0.08, 0.45) * width_mm
        sy = rng.uniform(0.08, 0.45) * width_mm
        angle = rng.uniform(0.0, 180.0)
        amp = rng.uniform(0.1, 0.6)
        _add_ellipse(img, xx, yy, amp, sx, sy, x0, y0, angle)
    return np.clip(img, 0.0, 1.0)


def shepp_logan(geom: FanBeamGeometry, symmetric: bool = False) -> np.ndarray:
    """Ten-ellipse head phantom on the grid, min-max rescaled to [0, 1].

    ``symmetric=True`` swaps the asymmetric ellipses for mirror pairs,
    giving an exactly left-right symmetric image.
    """
    table = _HEAD_ELLIPSES_SYMMETRIC if symmetric else _HEAD_ELLIPSES
    half_x = geom.image_cols * geom.pixel_size_mm / 2.0
    half_y = geom.image_rows * geom.pixel_size_mm / 2.0
    xx, yy = _pixel_grid(geom)
    xx = xx / half_x
    yy = yy / half_y
    img = np.zeros(geom.image_shape, dtype=np.float64)
    for e in table:
        _add_ellipse(img, xx, yy, *e)
    lo, hi = img.min(), img.max()
    if hi > lo:
        img = (img - lo) / (hi - lo)
    return img


@dataclass
class Dataset:
    """Images paired with their noise-free sinograms under one geometry."""

    geometry: FanBeamGeometry
    images: list  # float32 arrays, image_shape each
    sinograms: list  # float32 arrays, sinogram_shape each
    seed: int

    def __len__(self) -> int:
        return len(self.images)


def sinogram_rms(ds: Dataset) -> float:
    """RMS over all sinogram samples: the dense layer's natural input scale."""
    total = 0.0
    count = 0
    for sino in ds.sinograms:
        arr = np.asarray(sino, dtype=np.float64)
        total += float((arr * arr).sum())
        count += arr.size
    return float(np.sqrt(total / count)) if count else 0.0


def build_dataset(
    n_images: int,
    seed: int,
    geom: FanBeamGeometry,
    system_matrix: SystemMatrix,
    phantom_fn=random_ellipse_phantom,
) -> Dataset:
    """Generate ``n_images`` phantoms and their forward projections.

    Deterministic: image k uses the k-th child of SeedSequence(seed). The
    sinograms are noise-free projections of the stored (float32) images.
    ``phantom_fn(seed, geom)`` may be swapped out, e.g. for degenerate
    test images.
    """
    if n_images < 1:
        raise ValueError("n_images must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_images)
    images = []
    sinograms = []
    for child in children:
        img = np.asarray(phantom_fn(child, geom), dtype=np.float32)
        sino = forward_project(system_matrix, img).astype(np.float32)
        images.append(img)
        sinograms.append(sino)
    return Dataset(geometry=geom, images=images, sinograms=sinograms, seed=seed)


def _pack_geometry(geom: FanBeamGeometry) -> bytes:
    out = b""
    for name in GEOMETRY_FIELDS:
        value = getattr(geom, name)
        if name in GEOMETRY_INT_FIELDS:
            out += struct.pack("<q", int(value))
        else:
            out += struct.pack("<d", float(value))
    return out


def _unpack_geometry(buf: bytes) -> FanBeamGeometry:
    values = {}
    for idx, name in enumerate(GEOMETRY_FIELDS):
        chunk = buf[idx * 8 : (idx + 1) * 8]
        if name in GEOMETRY_INT_FIELDS:
            values[name] = struct.unpack("<q", chunk)[0]
        else:
            values[name] = struct.unpack("<d", chunk)[0]
    return FanBeamGeometry(**values)


def write_dataset(path, ds: Dataset) -> None:
    """Write magic, version, geometry block, seed, count, then per-item
    image and sinogram as little-endian float32."""
    geom = ds.geometry
    if len(ds.images) != len(ds.sinograms):
        raise ValueError("images and sinograms must have equal length")
    with open(path, "wb") as fh:
        fh.write(_DS_MAGIC)
        fh.write(struct.pack("<I", _DS_VERSION))
        fh.write(_pack_geometry(geom))
        fh.write(struct.pack("<q", int(ds.seed)))
        fh.write(struct.pack("<I", len(ds.images)))
        for img, sino in zip(ds.images, ds.sinograms):
            img = np.asarray(img, dtype=np.float32)
            sino = np.asarray(sino, dtype=np.float32)
            if img.shape != geom.image_shape:
                raise ValueError(f"image shape {img.shape} != {geom.image_shape}")
            if sino.shape != geom.sinogram_shape:
                raise ValueError(
                    f"sinogram shape {sino.shape} != {geom.sinogram_shape}"
                )
            fh.write(img.astype("<f4").tobytes())
            fh.write(sino.astype("<f4").tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated dataset file while reading {what}")
    return buf


def read_dataset(path) -> Dataset:
    """Inverse of :func:`write_dataset`; raises FormatError on any mismatch."""
    with open(path, "rb") as fh:
        magic = fh.read(len(_DS_MAGIC))
        if magic != _DS_MAGIC:
            raise FormatError(f"bad dataset magic {magic!r}, expected {_DS_MAGIC!r}")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, "version"))
        if version != _DS_VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        geom = _unpack_geometry(_read_exact(fh, 8 * len(GEOMETRY_FIELDS), "geometry"))
        violations = validate(geom)
        if violations:
            raise FormatError("dataset geometry invalid: " + ", ".join(violations))
        (seed,) = struct.unpack("<q", _read_exact(fh, 8, "seed"))
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "image count"))
        img_bytes = geom.image_len * 4
        sino_bytes = geom.sinogram_len * 4
        images = []
        sinograms = []
        for item in range(count):
            img = np.frombuffer(
                _read_exact(fh, img_bytes, f"image {item}"), dtype="<f4"
            ).reshape(geom.image_shape)
            sino = np.frombuffer(
                _read_exact(fh, sino_bytes, f"sinogram {item}"), dtype="<f4"
            ).reshape(geom.sinogram_shape)
            images.append(img.copy())
            sinograms.append(sino.copy())
        if fh.read(1):
            raise FormatError("trailing bytes after last dataset item")
    return Dataset(geometry=geom, images=images, sinograms=sinograms, seed=seed)
