import numpy as np
import pytest

from fcbp import (
    Dataset,
    build_dataset,
    forward_project,
    random_ellipse_phantom,
    read_dataset,
    shepp_logan,
    write_dataset,
)
from fcbp.errors import FormatError


def test_zero_ellipses_gives_blank_image(desk_geom):
    img = random_ellipse_phantom(5, desk_geom, n_ellipses=0)
    assert not img.any()


@pytest.mark.parametrize("seed", [0, 1, 7, 12345])
def test_phantom_values_clipped(desk_geom, seed):
    img = random_ellipse_phantom(seed, desk_geom)
    assert img.min() >= 0.0
    assert img.max() <= 1.0
    assert np.isfinite(img).all()


def test_phantom_deterministic_per_seed(desk_geom):
    a = random_ellipse_phantom(99, desk_geom)
    b = random_ellipse_phantom(99, desk_geom)
    c = random_ellipse_phantom(100, desk_geom)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_shepp_logan_background_zero(default_geom):
    img = shepp_logan(default_geom)
    # Grid corners are outside the skull ellipse.
    assert img[0, 0] == 0.0
    assert img[0, -1] == 0.0
    assert img[-1, 0] == 0.0
    assert img[-1, -1] == 0.0
    assert img.sum() > 0.0


def test_shepp_logan_range(default_geom):
    img = shepp_logan(default_geom)
    assert img.min() == 0.0
    assert img.max() == 1.0


def test_shepp_logan_symmetric_variant_mirrors(default_geom):
    img = shepp_logan(default_geom, symmetric=True)
    assert np.array_equal(img, img[:, ::-1])


def test_build_dataset_injected_blank_phantom(desk_geom, desk_sm):
    ds = build_dataset(
        1, 0, desk_geom, desk_sm, phantom_fn=lambda seed, g: np.zeros(g.image_shape)
    )
    assert not ds.sinograms[0].any()


def test_build_dataset_supports_one_minibatch(desk_geom, desk_sm):
    ds = build_dataset(60, 3, desk_geom, desk_sm)
    assert len(ds) == 60
    assert len(ds.images) == len(ds.sinograms)


def test_dataset_sinograms_regenerate_exactly(desk_geom, desk_sm):
    ds = build_dataset(4, 11, desk_geom, desk_sm)
    for img, sino in zip(ds.images, ds.sinograms):
        again = forward_project(desk_sm, img).astype(np.float32)
        assert np.array_equal(again, sino)


def test_dataset_deterministic(desk_geom, desk_sm):
    a = build_dataset(3, 21, desk_geom, desk_sm)
    b = build_dataset(3, 21, desk_geom, desk_sm)
    for x, y in zip(a.images, b.images):
        assert np.array_equal(x, y)


def test_dataset_round_trip(tmp_path, desk_geom, desk_sm):
    ds = build_dataset(3, 5, desk_geom, desk_sm)
    path = tmp_path / "ds.fcbp"
    write_dataset(path, ds)
    back = read_dataset(path)
    assert back.geometry == ds.geometry
    assert back.seed == ds.seed
    assert len(back) == 3
    for x, y in zip(back.images, ds.images):
        assert np.array_equal(x, y)
    for x, y in zip(back.sinograms, ds.sinograms):
        assert np.array_equal(x, y)


def test_dataset_truncated_file(tmp_path, desk_geom, desk_sm):
    ds = build_dataset(2, 5, desk_geom, desk_sm)
    path = tmp_path / "ds.fcbp"
    write_dataset(path, ds)
    raw = path.read_bytes()
    path.write_bytes(raw[: len(raw) - 100])
    with pytest.raises(FormatError, match="truncated"):
        read_dataset(path)


def test_dataset_bad_magic(tmp_path, desk_geom, desk_sm):
    ds = build_dataset(1, 5, desk_geom, desk_sm)
    path = tmp_path / "ds.fcbp"
    write_dataset(path, ds)
    raw = bytearray(path.read_bytes())
    raw[:4] = b"NOPE"
    path.write_bytes(bytes(raw))
    with pytest.raises(FormatError, match="FCBP"):
        read_dataset(path)


def test_dataset_trailing_bytes_rejected(tmp_path, desk_geom, desk_sm):
    ds = build_dataset(1, 5, desk_geom, desk_sm)
    path = tmp_path / "ds.fcbp"
    write_dataset(path, ds)
    with open(path, "ab") as fh:
        fh.write(b"\x00")
    with pytest.raises(FormatError, match="trailing"):
        read_dataset(path)


def test_write_dataset_rejects_mismatched_shapes(tmp_path, desk_geom):
    ds = Dataset(
        geometry=desk_geom,
        images=[np.zeros((2, 2), np.float32)],
        sinograms=[np.zeros(desk_geom.sinogram_shape, np.float32)],
        seed=0,
    )
    with pytest.raises(ValueError):
        write_dataset(tmp_path / "bad.fcbp", ds)
