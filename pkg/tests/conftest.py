import numpy as np
import pytest

from fcbp import FanBeamGeometry, build_system_matrix, desk_geometry


@pytest.fixture(scope="session")
def default_geom():
    return FanBeamGeometry()


@pytest.fixture(scope="session")
def desk_geom():
    return desk_geometry()


@pytest.fixture(scope="session")
def desk_sm(desk_geom):
    return build_system_matrix(desk_geom)


@pytest.fixture(scope="session")
def default_sm(default_geom):
    return build_system_matrix(default_geom)


@pytest.fixture(scope="session")
def tiny_geom():
    # 4x4 image, 2 views x 4 detectors: small enough for finite differences.
    return FanBeamGeometry(
        n_views=2,
        angular_step_deg=4.0,
        n_detectors=4,
        detector_pitch_mm=20.0,
        image_rows=4,
        image_cols=4,
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
