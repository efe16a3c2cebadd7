import pytest
from hypothesis import HealthCheck, settings

from rhparametrix.surface import SurfaceConfig

# quadrature-backed properties are slow per example
settings.register_profile(
    "default",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture
def one_cut():
    return SurfaceConfig(((-1.0, 1.0),))


@pytest.fixture
def two_cut_symmetric():
    return SurfaceConfig(((-2.0, -1.0), (1.0, 2.0)))


@pytest.fixture
def two_cut_asymmetric():
    return SurfaceConfig(((0.0, 1.0), (2.0, 5.0)))


@pytest.fixture
def three_cut():
    return SurfaceConfig(((-3.0, -2.0), (-1.0, 0.5), (1.5, 3.0)))


@pytest.fixture(autouse=True)
def isolated_user_config(tmp_path, monkeypatch):
    """Keep per-user defaults out of the tests."""
    from rhparametrix import utils

    monkeypatch.setattr(utils, "_PATH_APP_CONFIG", tmp_path / "user-config")
    return tmp_path / "user-config"
