"""Published demo calibration: five ETFs with dividend-yield factors.

The numbers below are a monthly calibration (2005-2019) of five sector ETFs
(broad equity, commodity, corporate bond, real estate, long treasury) with
their trailing 12-month dividend yields as factors: diagonal reversion and
drift-loading matrices, with the full cross-sectional dependence carried by
the joint Cholesky loadings (driver dimension 10).
"""

import numpy as np

from .market import AssetDynamics, FactorDynamics, MarketModel
from .views import ViewSpec, omega_from_tau

ALPHA = np.array([-0.2044, -0.0320, -0.0589, -0.1824, -0.1501])

BETA = np.diag([14.1731, 3.9467, 1.7666, 5.2718, 5.6344])

MU = np.array([0.0200, 0.0068, 0.0265, 0.0429, 0.0235])

THETA = np.diag([0.7412, 0.6080, 0.0677, 0.7872, 0.1751])

L_X = np.array(
    [
        [1.05e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [8.52e-3, 2.92e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1.07e-2, 1.73e-2, 2.39e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [4.08e-2, 1.29e-2, 4.94e-3, 2.64e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [8.31e-4, 1.63e-2, 2.36e-2, 3.63e-3, 7.60e-3, 0.0, 0.0, 0.0, 0.0, 0.0],
    ]
)

L_S = np.array(
    [
        [9.31e-3, -2.65e-2, -1.38e-2, 7.39e-3, -2.03e-3, 1.41e-1, 0.0, 0.0, 0.0, 0.0],
        [2.99e-3, 8.44e-3, -2.70e-3, 1.74e-2, -2.90e-2, 1.04e-1, 1.56e-1, 0.0, 0.0, 0.0],
        [4.22e-3, -9.62e-4, 3.47e-3, 1.47e-3, -4.55e-3, 2.13e-2, -5.13e-3, 6.80e-2, 0.0, 0.0],
        [3.30e-3, -4.49e-2, 1.12e-2, 2.55e-2, -6.98e-3, 1.65e-1, -1.32e-2, 4.91e-2, 1.51e-1, 0.0],
        [-2.07e-2, 4.26e-3, 1.49e-2, 4.06e-4, 4.21e-3, -3.69e-2, -2.62e-2, 8.03e-2, 1.84e-2, 8.83e-2],
    ]
)

#: relative views: equity-vs-commodity yield spread, credit yield level,
#: commodity-vs-treasury yield spread
DEMO_P = np.array(
    [
        [1.0, -1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0, -1.0],
    ]
)


def demo_model(r_f=0.02, rho=1.0):
    """The published five-asset / five-factor demo model."""
    return MarketModel(
        factors=FactorDynamics(theta=THETA, mu=MU, l_x=L_X),
        assets=AssetDynamics(alpha=ALPHA, beta=BETA, l_s=L_S, r_f=r_f),
        rho=rho,
    )


def demo_views(model, tau=0.05, y=None, horizon=1.0):
    """Baseline three-view specification with confidence scalar ``tau``.

    ``y`` defaults to the views implied by the long-run factor means.
    """
    omega = omega_from_tau(model, DEMO_P, tau, horizon)
    if y is None:
        y = DEMO_P @ model.factors.mu
    return ViewSpec(p=DEMO_P, omega=omega, y=y, horizon=horizon)
