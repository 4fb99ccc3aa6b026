import numpy as np
import pytest

from fcbp import (
    FanBeamGeometry,
    detector_center_offset_mm,
    validate,
    view_angle_deg,
)


def test_view_angles_match_acquisition(default_geom):
    assert view_angle_deg(default_geom, 1) == 0.0
    assert view_angle_deg(default_geom, 2) == 4.0
    assert view_angle_deg(default_geom, 90) == pytest.approx(356.0)


@pytest.mark.parametrize("bad_l", [0, -1, 91])
def test_view_angle_rejects_out_of_range(default_geom, bad_l):
    with pytest.raises(IndexError):
        view_angle_deg(default_geom, bad_l)


def test_view_angles_strictly_increasing_and_span(default_geom):
    angles = [view_angle_deg(default_geom, l) for l in range(1, 91)]
    assert all(b > a for a, b in zip(angles, angles[1:]))
    assert angles[0] == 0.0
    assert angles[-1] == pytest.approx(89 * 4.0)


def test_detector_offsets_centered(default_geom):
    assert detector_center_offset_mm(default_geom, 64) == pytest.approx(-0.8)
    assert detector_center_offset_mm(default_geom, 65) == pytest.approx(0.8)
    assert detector_center_offset_mm(default_geom, 1) == pytest.approx(
        -detector_center_offset_mm(default_geom, 128)
    )


def test_detector_offsets_equally_spaced_and_zero_sum(default_geom):
    offsets = np.array(
        [detector_center_offset_mm(default_geom, b) for b in range(1, 129)]
    )
    spacing = np.diff(offsets)
    assert np.allclose(spacing, default_geom.detector_pitch_mm)
    assert offsets.sum() == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("bad_b", [0, 129])
def test_detector_offset_rejects_out_of_range(default_geom, bad_b):
    with pytest.raises(IndexError):
        detector_center_offset_mm(default_geom, bad_b)


def test_validate_default_geometry_ok(default_geom):
    assert validate(default_geom) == []


def test_validate_reports_sdd_sod_violation():
    geom = FanBeamGeometry(source_to_detector_mm=1500.0, source_to_center_mm=2000.0)
    assert "sdd > sod" in validate(geom)


def test_validate_reports_view_count_violation():
    geom = FanBeamGeometry(n_views=0)
    violations = validate(geom)
    assert any("n_views" in v for v in violations)


def test_validate_reports_every_violation():
    geom = FanBeamGeometry(
        source_to_center_mm=-1.0, n_views=0, n_detectors=0, image_rows=0
    )
    violations = validate(geom)
    assert len(violations) >= 4


def test_flat_lengths(default_geom):
    assert default_geom.sinogram_len == 90 * 128
    assert default_geom.image_len == 64 * 64
