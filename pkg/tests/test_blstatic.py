import numpy as np
import pytest

from factorviews.blstatic import bl_moments, bl_policy
from factorviews.control import Preferences
from factorviews.market import AssetDynamics, FactorDynamics, MarketModel
from factorviews.views import ViewSpec


def make_decoupled_model():
    """rho = 0 and beta = 0: the terminal log-return is exactly Gaussian with
    closed-form moments, so the baseline has an analytic oracle."""
    factors = FactorDynamics(
        theta=np.array([[0.9]]), mu=np.array([0.02]), l_x=np.array([[0.1, 0.0, 0.0]])
    )
    assets = AssetDynamics(
        alpha=np.array([0.06, 0.04]),
        beta=np.zeros((2, 1)),
        l_s=np.array([[0.2, 0.05, 0.0], [0.03, 0.18, 0.04]]),
        r_f=0.02,
    )
    return MarketModel(factors=factors, assets=assets, rho=0.0)


class TestClosedFormCase:
    def test_moments(self):
        m = make_decoupled_model()
        v = ViewSpec(p=np.array([[1.0]]), omega=np.array([[0.01]]), y=np.array([0.03]), horizon=1.0)
        s = 0.25
        r_s = np.array([0.1, -0.2])
        res = bl_moments(m, v, s, (r_s, np.array([0.02])), n_nodes=128)
        span = v.horizon - s
        expected_mu = r_s + (m.assets.alpha - 0.5 * np.diag(m.sigma_s)) * span
        np.testing.assert_allclose(res.mu_bl, expected_mu, atol=1e-10)
        np.testing.assert_allclose(res.sigma_bl, span * m.sigma_s, atol=1e-10)

    def test_policy_is_single_period_mean_variance(self):
        m = make_decoupled_model()
        v = ViewSpec(p=np.array([[1.0]]), omega=np.array([[0.01]]), y=np.array([0.03]), horizon=1.0)
        res = bl_moments(m, v, 0.0, (np.zeros(2), np.array([0.02])), n_nodes=128)
        pref = Preferences(gamma=4.0)
        w = bl_policy(res, pref, m.assets.r_f)
        excess = res.mu_bl - m.assets.r_f
        expected = np.linalg.solve(res.sigma_bl, excess) / 4.0
        np.testing.assert_allclose(w, expected, atol=1e-12)


class TestGeneralCase:
    def test_refinement_stability(self, small_model, small_view):
        m, v = small_model, small_view
        state = (np.array([0.05, -0.1]), np.array([0.04, 0.01]))
        coarse = bl_moments(m, v, 0.3, state, n_nodes=256)
        fine = bl_moments(m, v, 0.3, state, n_nodes=512)
        np.testing.assert_allclose(coarse.mu_bl, fine.mu_bl, atol=1e-6)
        np.testing.assert_allclose(coarse.sigma_bl, fine.sigma_bl, atol=1e-6)

    def test_mean_is_affine_in_state_and_view(self, small_model, small_view):
        m, v = small_model, small_view
        s = 0.25
        r0 = np.zeros(2)
        base = bl_moments(m, v, s, (r0, np.zeros(2))).mu_bl
        mid = bl_moments(m, v, s, (r0, np.array([0.03, -0.01]))).mu_bl
        x1 = bl_moments(m, v, s, (r0, np.array([0.06, -0.02]))).mu_bl
        # doubling the state doubles the deviation from the zero-state mean
        np.testing.assert_allclose(x1 - base, 2.0 * (mid - base), atol=1e-9)

    def test_covariance_independent_of_state(self, small_model, small_view):
        m, v = small_model, small_view
        a = bl_moments(m, v, 0.4, (np.zeros(2), np.zeros(2))).sigma_bl
        b = bl_moments(m, v, 0.4, (np.array([1.0, -1.0]), np.array([0.2, 0.1]))).sigma_bl
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_rejects_out_of_range_time(self, small_model, small_view):
        with pytest.raises(ValueError, match="horizon"):
            bl_moments(small_model, small_view, 1.0, (np.zeros(2), np.zeros(2)))

    def test_monte_carlo_agreement(self, small_model, small_view):
        """Terminal log-return moments vs conditional-measure simulation."""
        from factorviews.numerics import TimeGrid
        from factorviews.views import simulate_conditional

        m, v = small_model, small_view
        x0 = np.array([0.05, -0.02])
        res = bl_moments(m, v, 0.0, (np.zeros(2), x0))
        grid = TimeGrid(0.0, 1.0, 100)
        paths = simulate_conditional(m, v, x0, np.ones(2), grid, 20000, seed=17)
        r_T = np.log(paths.prices[:, -1])
        se = np.sqrt(np.diag(res.sigma_bl) / 20000)
        np.testing.assert_array_less(np.abs(r_T.mean(axis=0) - res.mu_bl), 4 * se + 2e-3)
        np.testing.assert_allclose(
            np.cov(r_T, rowvar=False), res.sigma_bl, rtol=0.05, atol=2e-3
        )
