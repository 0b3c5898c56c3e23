"""Online learning of the unknown asset drift intercept alpha.

The intercept ``alpha`` of the asset drift is unknown with a normal prior
``alpha ~ N(alpha0, Gamma0)``.  Stripping the known part of the drift from
the observed log-return and factor increments yields linear observations

    dN1 = alpha dt + L_S dW^Q,     dN2 = L_X dW^Q,

so the posterior mean ``alpha_hat(t)`` follows a Kalman-Bucy filter with a
deterministic error covariance

    Gamma(t) = (Gamma0^{-1} + t * Schur^{-1})^{-1},
    Schur    = Sigma_S - Sigma_SX Sigma_X^{-1} Sigma_SX^T,

independent of the views.  The augmented state ``M = (X^y, alpha_hat)`` is
again linear-Gaussian, so the CRRA control problem is solved by the same
backward Riccati machinery with time-varying diffusion blocks; the optimal
policy gains a third component hedging estimation risk.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .control import _solve_abc, _ss_solver
from .numerics import cholesky
from .views import ConditionalCoeffs


@dataclass(frozen=True)
class DriftPrior:
    """Normal prior ``alpha ~ N(alpha0, Gamma0)`` on the asset drift intercept."""

    alpha0: np.ndarray
    gamma0: np.ndarray

    def __post_init__(self):
        alpha0 = np.atleast_1d(np.asarray(self.alpha0, dtype=float))
        gamma0 = np.atleast_2d(np.asarray(self.gamma0, dtype=float))
        n = alpha0.shape[0]
        if gamma0.shape != (n, n):
            raise ValueError("gamma0 shape must match alpha0")
        if not np.allclose(gamma0, gamma0.T):
            raise ValueError("gamma0 must be symmetric")
        if np.any(np.linalg.eigvalsh(gamma0) <= 0.0):
            raise ValueError("gamma0 must be positive definite")
        object.__setattr__(self, "alpha0", alpha0)
        object.__setattr__(self, "gamma0", gamma0)


def schur_complement(m):
    """Innovation covariance of returns given factor shocks:
    ``Sigma_S - Sigma_SX Sigma_X^{-1} Sigma_SX^T`` (must be PD)."""
    sx = m.sigma_sx
    sch = m.sigma_s - sx @ np.linalg.solve(m.sigma_x, sx.T)
    sch = 0.5 * (sch + sch.T)
    if np.any(np.linalg.eigvalsh(sch) <= 0.0):
        raise ValueError("return/factor Schur complement is not positive definite")
    return sch


def joint_shock_cov(m):
    """Covariance of the stacked observation shocks (returns first, then factors)."""
    sx = m.sigma_sx
    top = np.hstack([m.sigma_s, sx])
    bottom = np.hstack([sx.T, m.sigma_x])
    return np.vstack([top, bottom])


def gamma_t(prior, m, t):
    """Posterior covariance ``Gamma(t)`` of the drift intercept (closed form)."""
    if t < 0.0:
        raise ValueError(f"t must be nonnegative, got {t}")
    sch = schur_complement(m)
    g0_inv = np.linalg.inv(prior.gamma0)
    out = np.linalg.inv(g0_inv + t * np.linalg.inv(sch))
    return 0.5 * (out + out.T)


def precision_split(m):
    """Split the learning precision ``Schur^{-1}`` into its two sources.

    Returns ``(asset_term, factor_term)`` with ``asset_term = Sigma_S^{-1}``
    (learning from returns alone) and ``factor_term`` the extra precision
    from observing correlated factor shocks; their sum equals
    ``Schur^{-1}``.
    """
    ss_inv = np.linalg.inv(m.sigma_s)
    sx = m.sigma_sx
    inner = m.sigma_x - sx.T @ ss_inv @ sx
    factor = ss_inv @ sx @ np.linalg.solve(inner, sx.T @ ss_inv)
    return 0.5 * (ss_inv + ss_inv.T), 0.5 * (factor + factor.T)


def kalman_gain(prior, m, t):
    """Filter gain ``K(t) = Gamma(t) H^T (G G^T)^{-1}``, shape (N, N + d)."""
    g = gamma_t(prior, m, t)
    cov = joint_shock_cov(m)
    h_mat = np.vstack([np.eye(m.n_assets), np.zeros((m.d, m.n_assets))])
    return g @ scipy.linalg.solve(cov, h_mat, assume_a="pos").T


@dataclass(frozen=True)
class FilterPath:
    """Filter output along observed paths.

    Attributes
    ----------
    times : ndarray, shape (n_steps + 1,)
    alpha_hat : ndarray, shape (n_paths, n_steps + 1, N)
    gamma : ndarray, shape (n_steps + 1, N, N)
        Deterministic error covariance (shared across paths).
    """

    times: np.ndarray
    alpha_hat: np.ndarray
    gamma: np.ndarray

    def to_csv(self, path, path_index=0):
        """Write one path's trace: t, alpha_hat entries, diag Gamma."""
        n = self.alpha_hat.shape[2]
        header = ["t"] + [f"alpha_hat_{i}" for i in range(n)] + [f"gamma_{i}{i}" for i in range(n)]
        with open(path, "w", newline="") as fh:
            fh.write("# drift-filter trace: t, posterior mean entries, posterior variance diagonal\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for k, t in enumerate(self.times):
                writer.writerow(
                    [f"{t:.10g}"]
                    + [f"{x:.12g}" for x in self.alpha_hat[path_index, k]]
                    + [f"{x:.12g}" for x in np.diag(self.gamma[k])]
                )


def filter_path(prior, m, v, paths):
    """Run the drift filter along simulated observation paths.

    The observations are built from the paths' own increments: the
    known part of the drift is subtracted from log-return increments
    (``dN1``) and from factor increments (``dN2``), then the posterior mean
    advances by an Euler step of ``d alpha_hat = K(t) (dN - H alpha_hat dt)``.

    Parameters
    ----------
    prior : DriftPrior
    m : MarketModel
        Model with the *reference* alpha (the filter never uses the true
        alpha of the simulated paths).
    v : ViewSpec or None
        When given, the conditional drift coefficients are stripped instead
        of the unconditional ones.
    paths : PathSet

    Returns
    -------
    FilterPath
    """
    grid = paths.grid
    h = grid.h
    nodes = grid.nodes
    n_paths = paths.n_paths
    n, d = m.n_assets, m.d
    coeffs = ConditionalCoeffs(m, v) if v is not None else None
    half_diag = 0.5 * np.diag(m.sigma_s)
    theta_mu0 = m.factors.theta @ m.factors.mu

    alpha_hat = np.empty((n_paths, grid.n_steps + 1, n))
    gammas = np.empty((grid.n_steps + 1, n, n))
    alpha_hat[:, 0] = prior.alpha0
    gammas[0] = prior.gamma0
    log_prices = np.log(paths.prices)
    for k in range(grid.n_steps):
        t = nodes[k]
        if coeffs is not None:
            lam = coeffs.lambda_tilde(t)
            beta_t = coeffs.beta_tilde(t)
            theta_t = coeffs.theta_tilde(t)
            theta_mu_t = coeffs.theta_mu(t)
        else:
            lam = np.zeros(n)
            beta_t = m.assets.beta
            theta_t = m.factors.theta
            theta_mu_t = theta_mu0
        x_k = paths.factors[:, k]
        dn1 = (
            log_prices[:, k + 1]
            - log_prices[:, k]
            - (lam + x_k @ beta_t.T - half_diag) * h
        )
        dn2 = paths.factors[:, k + 1] - x_k - (theta_mu_t - x_k @ theta_t.T) * h
        gain = kalman_gain(prior, m, t)
        innov = np.hstack([dn1 - alpha_hat[:, k] * h, dn2])
        alpha_hat[:, k + 1] = alpha_hat[:, k] + innov @ gain.T
        gammas[k + 1] = gamma_t(prior, m, nodes[k + 1])
    return FilterPath(times=nodes, alpha_hat=alpha_hat, gamma=gammas)


class AugmentedDynamics:
    """Coefficient evaluators for the augmented state ``M = (X^y, alpha_hat)``.

    The state ordering is fixed as factors first, then the drift estimate;
    block extraction by index ranges uses ``d = m.d`` and ``N = m.n_assets``
    throughout.
    """

    def __init__(self, prior, m, v):
        self.prior = prior
        self.model = m
        self.view = v
        self.coeffs = ConditionalCoeffs(m, v)
        self._schur = schur_complement(m)
        self._joint_cov = joint_shock_cov(m)
        self._g_joint = cholesky(self._joint_cov)

    def gamma(self, t):
        return gamma_t(self.prior, self.model, t)

    def kalman(self, t):
        return kalman_gain(self.prior, self.model, t)

    def theta_m(self, t):
        """Augmented reversion block-matrix diag(Theta~(t), 0)."""
        m = self.model
        out = np.zeros((m.d + m.n_assets, m.d + m.n_assets))
        out[: m.d, : m.d] = self.coeffs.theta_tilde(t)
        return out

    def theta_mu_m(self, t):
        """Augmented drift constant (Theta~ mu~; 0)."""
        m = self.model
        return np.concatenate([self.coeffs.theta_mu(t), np.zeros(m.n_assets)])

    def beta_m(self, t):
        """Augmented return loading [beta~(t) | I_N]."""
        m = self.model
        return np.hstack([self.coeffs.beta_tilde(t), np.eye(m.n_assets)])

    def l_m(self, t):
        """Augmented diffusion [shared factor rows; K(t) G] of the joint shocks."""
        m = self.model
        factor_rows = self._g_joint[m.n_assets :, :]
        return np.vstack([factor_rows, self.kalman(t) @ self._g_joint])

    def sigma_m(self, t):
        """Augmented state covariance; block-diagonal because the filter
        update is orthogonal to the factor shocks
        (``L_X G^T K^T = [0 I] H Gamma = 0``)."""
        m = self.model
        g = self.gamma(t)
        out = np.zeros((m.d + m.n_assets, m.d + m.n_assets))
        out[: m.d, : m.d] = m.sigma_x
        out[m.d :, m.d :] = g @ np.linalg.solve(self._schur, g)
        return out

    def sigma_sm(self, t):
        """Cross covariance of returns with the augmented state:
        ``[Sigma_SX, Gamma(t)]`` (the return/estimate cross block collapses
        to Gamma by the gain identity ``L_S G^T K^T = Gamma``)."""
        return np.hstack([self.model.sigma_sx, self.gamma(t)])

    def lambda_tilde(self, t):
        return self.coeffs.lambda_tilde(t)


def augmented_ode_coeffs(prior, m, v):
    """Coefficient provider (same shape as the control module's) for the
    augmented backward system."""
    aug = AugmentedDynamics(prior, m, v)
    ss_solve = _ss_solver(m)
    r_f = m.assets.r_f
    ones = np.ones(m.n_assets)

    def at(t):
        return (
            aug.beta_m(t),
            aug.theta_m(t),
            aug.theta_mu_m(t),
            aug.lambda_tilde(t) - r_f * ones,
            aug.sigma_m(t),
            aug.sigma_sm(t),
            ss_solve,
        )

    return at


def solve_augmented(prior, m, v, pref, grid):
    """Backward solve of the augmented (d + N)-dimensional system.

    Returns a :class:`factorviews.control.RiccatiPath` over the augmented
    state with zero terminal conditions.
    """
    from .control import RiccatiPath

    if abs(grid.t1 - v.horizon) > 1e-10:
        raise ValueError("grid must end at the view horizon")
    dim = m.d + m.n_assets
    at = augmented_ode_coeffs(prior, m, v)
    a, b, c = _solve_abc(at, pref.gamma, m.assets.r_f, grid, np.zeros((dim, dim)), np.zeros(dim))
    return RiccatiPath(grid=grid, a=a, b=b, c=c)


@dataclass(frozen=True)
class AugmentedPolicyEvaluation:
    """Optimal weights under drift uncertainty with three components."""

    t: float
    weights: np.ndarray
    mean_variance: np.ndarray
    factor_hedge: np.ndarray
    estimation_hedge: np.ndarray


def augmented_policy(path, prior, m, v, pref, t, x, alpha_hat):
    """Optimal weights at (t, x, alpha_hat) under drift uncertainty.

    ``pi* = MV + H^x + H^alpha`` where the mean-variance part uses the
    current estimate ``alpha_hat`` in place of the unknown alpha, ``H^x``
    hedges factor risk, and ``H^alpha`` hedges estimation risk through the
    posterior covariance Gamma(t).
    """
    aug = AugmentedDynamics(prior, m, v)
    gamma = pref.gamma
    ss_solve = _ss_solver(m)
    d, n = m.d, m.n_assets
    x = np.asarray(x, dtype=float)
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    a_full = path.a_at(t)
    b_full = path.b_at(t)
    a_xx = a_full[:d, :d]
    a_xa = a_full[:d, d:]
    a_aa = a_full[d:, d:]
    b_x = b_full[:d]
    b_a = b_full[d:]
    ones = np.ones(n)
    mv = ss_solve(alpha_hat + aug.lambda_tilde(t) + aug.coeffs.beta_tilde(t) @ x - m.assets.r_f * ones) / gamma
    hx = ss_solve(m.sigma_sx @ (a_xx @ x + b_x + a_xa @ alpha_hat)) / gamma
    ha = ss_solve(aug.gamma(t) @ (a_aa @ alpha_hat + b_a + a_xa.T @ x)) / gamma
    return AugmentedPolicyEvaluation(
        t=t,
        weights=mv + hx + ha,
        mean_variance=mv,
        factor_hedge=hx,
        estimation_hedge=ha,
    )
