import pytest

from condwalk import fixture_path
from condwalk.models import load_model


@pytest.fixture(scope="session")
def model4():
    """Bundled 4-state chain: states (-1, 1, -3, 7/6), f = identity."""
    return load_model(fixture_path("finite4"))


@pytest.fixture(scope="session")
def chain4(model4):
    return model4.spec


@pytest.fixture(scope="session")
def affine_model():
    """Bundled 1-d affine recursion: a uniform on {-1/2, 1/2}, b ~ U[-1, 1]."""
    return load_model(fixture_path("affine1d"))


@pytest.fixture(scope="session")
def iid_model():
    """Bundled i.i.d. +/-1 walk as a 2-state chain."""
    return load_model(fixture_path("iid_pm1"))


@pytest.fixture(scope="session")
def drift_model():
    """Affine model with E a = 1/2, so r(x) = x and the martingale start
    z = y + x differs from the walk; used to exercise T < T_hat."""
    return load_model({
        "type": "affine1d",
        "a": {"support": [0.5], "probs": [1.0]},
        "b": {"uniform": [-1.0, 1.0]},
        "n_epsilon": 0.1,
    })
