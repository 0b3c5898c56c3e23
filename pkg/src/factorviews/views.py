"""Conditioning the market model on noisy forward-looking views.

A view is a noisy linear reading of the terminal factor state,

    Y = P X(T) + eps,    eps ~ N(0, Omega),

received at time 0.  Conditioning the factor SDE on ``Y = y`` yields another
linear SDE with time-dependent coefficients

    dX^y(t) = Theta~(t) (mu~(t) - X^y(t)) dt + L_X dW(t),

where all the tilde quantities are built from the conditioning kernel

    eta(t) = (P e^{-Theta tau} L_X)^T (P V(tau) P^T + Omega)^{-1},

with ``tau = T - t`` and ``V(tau)`` the conditional covariance of X(T) given
X(t).  Asset drifts pick up the correlated part of the same adjustment:
``alpha~ = alpha + rho L_S eta (y - P(I - e^{-Theta tau}) mu)`` and
``beta~ = beta - rho L_S eta P e^{-Theta tau}``.

The module provides the coefficient evaluators, conditional factor moments
(by integrating the linear moment ODEs), the Girsanov drift adjustment
``k(t, x)``, view-covariance construction from a confidence scalar tau, and
path simulation under the conditional measure.
"""

import json
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from .market import (
    PathSet,
    _as_vector,
    _draw_normals,
    _psd_factor,
    _step_constants,
    _CHUNK,
    cond_factor_cov,
    cond_factor_mean,
    long_run_cov,
)
from .numerics import TimeGrid, integrate_forward, mat_exp


@dataclass(frozen=True)
class ViewSpec:
    """A noisy linear view on the terminal factor state.

    Parameters
    ----------
    p : ndarray, shape (K, d)
        View map.
    omega : ndarray, shape (K, K)
        Symmetric positive-definite view-noise covariance.
    y : ndarray, shape (K,)
        Realized view value.
    horizon : float
        View horizon T in years (equal to the investment horizon).
    """

    p: np.ndarray
    omega: np.ndarray
    y: np.ndarray
    horizon: float

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.p, dtype=float))
        omega = np.atleast_2d(np.asarray(self.omega, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        k = p.shape[0]
        if k < 1:
            raise ValueError("need at least one view")
        if omega.shape != (k, k) or y.shape != (k,):
            raise ValueError("inconsistent view dimensions")
        if not np.allclose(omega, omega.T, atol=1e-12 * max(1.0, np.linalg.norm(omega))):
            raise ValueError("omega must be symmetric")
        if np.any(np.linalg.eigvalsh(0.5 * (omega + omega.T)) <= 0.0):
            raise ValueError("omega must be positive definite")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "y", y)

    @property
    def k(self):
        return self.p.shape[0]

    def with_y(self, y):
        """Copy of this view spec with a different realization."""
        return ViewSpec(p=self.p, omega=self.omega, y=np.asarray(y, dtype=float), horizon=self.horizon)

    def to_dict(self):
        return {
            "p": self.p.tolist(),
            "omega": self.omega.tolist(),
            "y": self.y.tolist(),
            "horizon": self.horizon,
        }

    @classmethod
    def from_dict(cls, doc, model=None):
        """Build from a JSON document; ``tau`` may replace ``omega``.

        When the document carries a confidence scalar ``tau`` instead of an
        explicit ``omega``, a ``model`` is required to construct
        ``omega = tau * P V[X(T)|X(0)] P^T``.
        """
        p = np.asarray(doc["p"], dtype=float)
        horizon = float(doc["horizon"])
        if "omega" in doc:
            omega = np.asarray(doc["omega"], dtype=float)
        elif "tau" in doc:
            if model is None:
                raise ValueError("a model is required to resolve tau into omega")
            omega = omega_from_tau(model, p, float(doc["tau"]), horizon)
        else:
            raise ValueError("view document needs 'omega' or 'tau'")
        return cls(p=p, omega=omega, y=np.asarray(doc["y"], dtype=float), horizon=horizon)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path, model=None):
        with open(path) as fh:
            return cls.from_dict(json.load(fh), model=model)


def omega_from_tau(m, p, tau, T):
    """View-noise covariance ``Omega = tau * P V[X(T)|X(0)] P^T``.

    Parameters
    ----------
    m : MarketModel
    p : ndarray, shape (K, d)
    tau : float
        Confidence scalar (> 0; smaller = more confident views).
    T : float
        View horizon in years.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    p = np.atleast_2d(np.asarray(p, dtype=float))
    omega = tau * (p @ cond_factor_cov(m.factors, 0.0, T) @ p.T)
    omega = 0.5 * (omega + omega.T)
    if np.any(np.linalg.eigvalsh(omega) <= 0.0):
        raise ValueError("resulting omega is not positive definite (dependent view rows?)")
    return omega


class ConditionalCoeffs:
    """Evaluators for the conditional SDE coefficients.

    All evaluators are pure functions of time memoized per time point, since
    they appear inside ODE right-hand sides thousands of times.
    """

    def __init__(self, m, v):
        if v.p.shape[1] != m.d:
            raise ValueError("view map width must equal the factor dimension")
        self.model = m
        self.view = v
        self._sigma = long_run_cov(m.factors)
        self._snapshot = lru_cache(maxsize=None)(self._build_snapshot)

    def _build_snapshot(self, t):
        m, v = self.model, self.view
        tau = v.horizon - t
        if tau < -1e-12:
            raise ValueError(f"t={t} exceeds the view horizon {v.horizon}")
        tau = max(tau, 0.0)
        f = m.factors
        e = mat_exp(-f.theta, tau)
        pe = v.p @ e
        v_tau = self._sigma - e @ self._sigma @ e.T
        inner = v.p @ v_tau @ v.p.T + v.omega
        inner = 0.5 * (inner + inner.T)
        cho = scipy.linalg.cho_factor(inner)
        # eta = (P e^{-Theta tau} L_X)^T inner^{-1}
        eta = scipy.linalg.cho_solve(cho, pe @ f.l_x).T
        surprise0 = v.y - v.p @ (np.eye(m.d) - e) @ f.mu  # y - P(I - e^{-Theta tau}) mu
        theta_tilde = f.theta + f.l_x @ eta @ pe
        theta_mu = f.theta @ f.mu + f.l_x @ eta @ surprise0
        ls_eta = m.rho * (m.assets.l_s @ eta)
        alpha_tilde = m.assets.alpha + ls_eta @ surprise0
        beta_tilde = m.assets.beta - ls_eta @ pe
        return {
            "e": e,
            "pe": pe,
            "eta": eta,
            "theta_tilde": theta_tilde,
            "theta_mu": theta_mu,
            "alpha_tilde": alpha_tilde,
            "beta_tilde": beta_tilde,
        }

    def eta(self, t):
        """Conditioning kernel eta(t), shape (d, K)."""
        return self._snapshot(float(t))["eta"]

    def theta_tilde(self, t):
        """Conditional reversion matrix Theta~(t)."""
        return self._snapshot(float(t))["theta_tilde"]

    def theta_mu(self, t):
        """The product Theta~(t) mu~(t) (no inversion needed)."""
        return self._snapshot(float(t))["theta_mu"]

    def mu_tilde(self, t):
        """Conditional long-term mean mu~(t) = Theta~(t)^{-1} (Theta~ mu~)."""
        snap = self._snapshot(float(t))
        return np.linalg.solve(snap["theta_tilde"], snap["theta_mu"])

    def alpha_tilde(self, t):
        """Conditional asset drift intercept alpha~(t)."""
        return self._snapshot(float(t))["alpha_tilde"]

    def beta_tilde(self, t):
        """Conditional asset factor loading beta~(t)."""
        return self._snapshot(float(t))["beta_tilde"]

    def lambda_tilde(self, t):
        """View-induced asset drift shift lambda~(t) = alpha~(t) - alpha."""
        return self._snapshot(float(t))["alpha_tilde"] - self.model.assets.alpha

    def drift_k(self, t, x):
        """Girsanov drift adjustment k(t, x) = eta(t)(y - P E[X(T)|X(t)=x])."""
        v = self.view
        mean_t = cond_factor_mean(self.model.factors, t, v.horizon, x)
        return self.eta(t) @ (v.y - mean_t @ v.p.T)


def conditional_coeffs(m, v):
    """Bundle of conditional coefficient evaluators for (model, view)."""
    return ConditionalCoeffs(m, v)


def eta(m, v, t):
    """Conditioning kernel eta(t) for (model, view); see ConditionalCoeffs."""
    return ConditionalCoeffs(m, v).eta(t)


def drift_adjustment(c, t, x):
    """Drift adjustment k(t, x); satisfies
    ``Theta~(t)(mu~(t) - x) = Theta(mu - x) + L_X k(t, x)`` identically."""
    return c.drift_k(t, np.asarray(x, dtype=float))


def conditional_moments(m, v, t, x0, t0=0.0, n_steps=None):
    """Mean and covariance of ``X^y(t)`` given ``X^y(t0) = x0``.

    Obtained by integrating the linear moment ODEs

        m' = Theta~(t) mu~(t) - Theta~(t) m,
        V' = -Theta~(t) V - V Theta~(t)^T + Sigma_X,

    forward from ``t0`` with RK4.

    Parameters
    ----------
    m : MarketModel
    v : ViewSpec
    t : float
        Evaluation time, ``t0 <= t <= horizon``.
    x0 : ndarray, shape (d,)
    t0 : float, optional
    n_steps : int, optional
        RK4 steps (default: 10^4 per unit time, at least 100).

    Returns
    -------
    (mean, cov) : (ndarray (d,), ndarray (d, d))
    """
    x0 = _as_vector(np.asarray(x0, dtype=float), "x0")
    if t < t0:
        raise ValueError(f"require t >= t0, got t={t}, t0={t0}")
    if t == t0:
        return x0.copy(), np.zeros((m.d, m.d))
    coeffs = ConditionalCoeffs(m, v)
    d = m.d
    sigma_x = m.sigma_x
    if n_steps is None:
        n_steps = max(100, int(np.ceil(1e4 * (t - t0))))
    grid = TimeGrid(t0, t, n_steps)

    def rhs(s, state):
        mean = state[:d]
        cov = state[d:].reshape(d, d)
        th = coeffs.theta_tilde(s)
        dmean = coeffs.theta_mu(s) - th @ mean
        dcov = -th @ cov - cov @ th.T + sigma_x
        return np.concatenate([dmean, dcov.reshape(-1)])

    state0 = np.concatenate([x0, np.zeros(d * d)])
    path = integrate_forward(rhs, state0, grid)
    mean = path[-1, :d]
    cov = path[-1, d:].reshape(d, d)
    return mean, 0.5 * (cov + cov.T)


def simulate_conditional(m, v, x0, s0, grid, n_paths, seed, path_offset=0):
    """Simulate (factor, price) paths under the conditional measure.

    Each factor step draws ``(X_{k+1}, dW_k)`` *exactly* from their joint
    Gaussian law given ``(X_k, Y = y)`` using closed-form OU covariances; this
    is exact in distribution (sequential conditioning is valid because the
    pair ``(X_{k+1}, dW_k)`` is conditionally independent of the past given
    ``(X_k, Y)``), avoids the stiffness of the conditional drift near the
    horizon, and pins ``X(T)`` exactly as ``Omega -> 0``.  Prices advance by
    log-Euler with the unconditional drift coefficients applied to the
    conditioned shocks, which is the same discretization (to the order of the
    scheme) as Euler with the conditional drift.

    Parameters and RNG conventions match
    :func:`factorviews.market.simulate_joint`.
    """
    x0 = _as_vector(np.asarray(x0, dtype=float), "x0")
    s0 = _as_vector(np.asarray(s0, dtype=float), "s0")
    if np.any(s0 <= 0.0):
        raise ValueError("initial prices must be positive")
    if grid.t1 > v.horizon + 1e-12:
        raise ValueError("grid must end at or before the view horizon")
    f, a = m.factors, m.assets
    d, n, n_drv = m.d, m.n_assets, m.n_drivers
    h = grid.h
    sqrt_h = np.sqrt(h)
    e_h, _, j_h, _ = _step_constants(m, h)
    sigma = long_run_cov(f)
    drift_const = (a.alpha - 0.5 * np.diag(a.sigma_s)) * h
    rho_c = np.sqrt(max(0.0, 1.0 - m.rho**2))
    nodes = grid.nodes

    # per-step conditioning constants
    cov_u = np.block([[j_h @ j_h.T * 0.0, j_h], [j_h.T, h * np.eye(n_drv)]])
    cov_u[:d, :d] = cond_factor_cov(f, 0.0, h)
    e_nodes = [mat_exp(-f.theta, v.horizon - t) for t in nodes]
    gains = []
    cond_factors = []
    pe_nodes = []
    c_nodes = []
    for k in range(grid.n_steps):
        e_k, e_k1 = e_nodes[k], e_nodes[k + 1]
        v_big = sigma - e_k @ sigma @ e_k.T
        s_y = v.p @ v_big @ v.p.T + v.omega
        c_xy = cov_u[:d, :d] @ e_k1.T @ v.p.T
        d_k = scipy.linalg.solve(f.theta, e_k1 - e_k)
        g_k = (v.p @ d_k @ f.l_x).T
        cov_uy = np.vstack([c_xy, g_k])
        gain = scipy.linalg.solve(0.5 * (s_y + s_y.T), cov_uy.T, assume_a="pos").T
        cond_cov = cov_u - gain @ cov_uy.T
        gains.append(gain)
        cond_factors.append(_psd_factor(cond_cov))
        pe_nodes.append(v.p @ e_k)
        c_nodes.append(v.p @ (np.eye(d) - e_k) @ f.mu)

    factors = np.empty((n_paths, grid.n_steps + 1, d))
    log_s = np.empty((n_paths, grid.n_steps + 1, n))
    factors[:, 0] = x0
    log_s[:, 0] = np.log(s0)

    width = (d + n_drv) + n_drv  # [xi for (X, dW) | Y, z2 for the extra driver]
    for lo in range(0, n_paths, _CHUNK):
        hi = min(lo + _CHUNK, n_paths)
        z = _draw_normals(seed, path_offset + lo, hi - lo, grid.n_steps, width)
        x = np.broadcast_to(x0, (hi - lo, d)).copy()
        for k in range(grid.n_steps):
            surprise = v.y - (c_nodes[k] + x @ pe_nodes[k].T)
            u = surprise @ gains[k].T + z[:, k, : d + n_drv] @ cond_factors[k].T
            dw = u[:, d:]
            dw_s = m.rho * dw + (rho_c * sqrt_h) * z[:, k, d + n_drv :]
            log_s[lo:hi, k + 1] = (
                log_s[lo:hi, k] + drift_const + (x @ a.beta.T) * h + dw_s @ a.l_s.T
            )
            x = f.mu + (x - f.mu) @ e_h.T + u[:, :d]
            factors[lo:hi, k + 1] = x

    return PathSet(grid=grid, factors=factors, prices=np.exp(log_s), seed=seed)
