import numpy as np
import pytest

from factorviews.market import AssetDynamics, FactorDynamics, MarketModel
from factorviews.views import ViewSpec, omega_from_tau


def make_small_model(rho=0.8, r_f=0.02):
    """Compact 2-factor / 2-asset model with a full-rank joint loading stack."""
    factors = FactorDynamics(
        theta=np.array([[1.2, 0.3], [0.0, 0.8]]),
        mu=np.array([0.03, -0.01]),
        l_x=np.array([[0.20, 0.05, 0.0, 0.0], [0.04, 0.15, 0.0, 0.0]]),
    )
    assets = AssetDynamics(
        alpha=np.array([0.06, 0.04]),
        beta=np.array([[2.0, 0.5], [-0.3, 1.5]]),
        l_s=np.array([[0.18, 0.02, 0.12, 0.0], [0.03, 0.16, 0.05, 0.10]]),
        r_f=r_f,
    )
    return MarketModel(factors=factors, assets=assets, rho=rho)


def make_filter_model(rho=0.6):
    """1-factor / 2-asset model used by the drift-learning tests."""
    factors = FactorDynamics(
        theta=np.array([[0.5]]),
        mu=np.array([0.02]),
        l_x=np.array([[0.10, 0.0, 0.0]]),
    )
    assets = AssetDynamics(
        alpha=np.array([0.05, 0.03]),
        beta=np.array([[1.0], [0.8]]),
        l_s=np.array([[0.15, 0.10, 0.0], [0.05, 0.02, 0.12]]),
        r_f=0.02,
    )
    return MarketModel(factors=factors, assets=assets, rho=rho)


def make_view(m, tau=0.1, horizon=1.0, y=None, p=None):
    p = np.atleast_2d(p if p is not None else np.array([[1.0, 0.5]]))
    omega = omega_from_tau(m, p, tau, horizon)
    if y is None:
        y = p @ m.factors.mu + 0.02
    return ViewSpec(p=p, omega=omega, y=y, horizon=horizon)


@pytest.fixture
def small_model():
    return make_small_model()


@pytest.fixture
def small_view(small_model):
    return make_view(small_model)


@pytest.fixture
def filter_model():
    return make_filter_model()
