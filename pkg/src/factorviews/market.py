"""Unconditional market model: mean-reverting factors and risky assets.

The factor vector X follows a multivariate Ornstein-Uhlenbeck process

    dX(t) = Theta (mu - X(t)) dt + L_X dW(t),

and asset prices follow

    dS_i(t) / S_i(t) = (alpha_i + beta_i . X(t)) dt + (L_S dW(t))_i,

with a shared N'-dimensional driving Brownian motion.  A correlation scalar
``rho`` in [0, 1] mixes in an independent driver for the asset shocks so that
the instantaneous cross-covariance is ``rho * L_S @ L_X.T`` while the
marginal covariances ``Sigma_X`` and ``Sigma_S`` are unchanged.

This module provides exact Gaussian conditional moments of X and joint path
simulation of (X, S) with the exact OU transition for factors and log-Euler
for prices.
"""

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .numerics import TimeGrid, mat_exp, solve_lyapunov

#: default chunk of simulation paths processed at once (memory control)
_CHUNK = 2048


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _as_vector(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class FactorDynamics:
    """Mean-reverting factor dynamics (Theta, mu, L_X).

    Parameters
    ----------
    theta : ndarray, shape (d, d)
        Reversion matrix; all eigenvalues must have positive real part.
    mu : ndarray, shape (d,)
        Long-run mean.
    l_x : ndarray, shape (d, n_drivers)
        Diffusion loadings with full row rank.
    """

    theta: np.ndarray
    mu: np.ndarray
    l_x: np.ndarray

    def __post_init__(self):
        theta = _as_matrix(self.theta, "theta")
        mu = _as_vector(self.mu, "mu")
        l_x = _as_matrix(self.l_x, "l_x")
        d = theta.shape[0]
        if theta.shape != (d, d):
            raise ValueError("theta must be square")
        if mu.shape != (d,) or l_x.shape[0] != d:
            raise ValueError("inconsistent factor dimensions")
        eigs = np.linalg.eigvals(theta)
        if np.any(eigs.real <= 0.0):
            raise ValueError(f"theta eigenvalues must have positive real part, got {eigs}")
        if np.linalg.matrix_rank(l_x) < d:
            raise ValueError("l_x must have full row rank")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "l_x", l_x)

    @property
    def d(self):
        return self.theta.shape[0]

    @property
    def n_drivers(self):
        return self.l_x.shape[1]

    @property
    def sigma_x(self):
        """Instantaneous factor covariance ``L_X @ L_X.T``."""
        return self.l_x @ self.l_x.T


@dataclass(frozen=True)
class AssetDynamics:
    """Risky-asset drift/diffusion parameters (alpha, beta, L_S, r_f)."""

    alpha: np.ndarray
    beta: np.ndarray
    l_s: np.ndarray
    r_f: float

    def __post_init__(self):
        alpha = _as_vector(self.alpha, "alpha")
        beta = _as_matrix(self.beta, "beta")
        l_s = _as_matrix(self.l_s, "l_s")
        n = alpha.shape[0]
        if beta.shape[0] != n or l_s.shape[0] != n:
            raise ValueError("inconsistent asset dimensions")
        if np.linalg.matrix_rank(l_s) < n:
            raise ValueError("l_s must have full row rank")
        if not self.r_f > 0.0:
            raise ValueError(f"r_f must be positive, got {self.r_f}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "l_s", l_s)

    @property
    def n_assets(self):
        return self.alpha.shape[0]

    @property
    def sigma_s(self):
        """Instantaneous asset covariance ``L_S @ L_S.T``."""
        return self.l_s @ self.l_s.T


@dataclass(frozen=True)
class MarketModel:
    """Joint factor/asset model with shock correlation ``rho``."""

    factors: FactorDynamics
    assets: AssetDynamics
    rho: float = 1.0

    def __post_init__(self):
        if self.factors.n_drivers != self.assets.l_s.shape[1]:
            raise ValueError("factors and assets must share the driver dimension")
        n_drv = self.factors.n_drivers
        if n_drv < max(self.assets.n_assets, self.factors.d):
            raise ValueError("driver dimension must be >= max(n_assets, d)")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")

    @property
    def d(self):
        return self.factors.d

    @property
    def n_assets(self):
        return self.assets.n_assets

    @property
    def n_drivers(self):
        return self.factors.n_drivers

    @property
    def sigma_x(self):
        return self.factors.sigma_x

    @property
    def sigma_s(self):
        return self.assets.sigma_s

    @property
    def sigma_sx(self):
        """Instantaneous asset/factor cross-covariance ``rho * L_S @ L_X.T``."""
        return self.rho * (self.assets.l_s @ self.factors.l_x.T)

    def to_dict(self):
        return {
            "theta": self.factors.theta.tolist(),
            "mu": self.factors.mu.tolist(),
            "l_x": self.factors.l_x.tolist(),
            "alpha": self.assets.alpha.tolist(),
            "beta": self.assets.beta.tolist(),
            "l_s": self.assets.l_s.tolist(),
            "r_f": self.assets.r_f,
            "rho": self.rho,
        }

    @classmethod
    def from_dict(cls, doc):
        factors = FactorDynamics(
            theta=np.asarray(doc["theta"], dtype=float),
            mu=np.asarray(doc["mu"], dtype=float),
            l_x=np.asarray(doc["l_x"], dtype=float),
        )
        assets = AssetDynamics(
            alpha=np.asarray(doc["alpha"], dtype=float),
            beta=np.asarray(doc["beta"], dtype=float),
            l_s=np.asarray(doc["l_s"], dtype=float),
            r_f=float(doc["r_f"]),
        )
        return cls(factors=factors, assets=assets, rho=float(doc.get("rho", 1.0)))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class PathSet:
    """Simulated joint factor/price paths on a uniform grid.

    Attributes
    ----------
    grid : TimeGrid
    factors : ndarray, shape (n_paths, n_steps + 1, d)
    prices : ndarray, shape (n_paths, n_steps + 1, n_assets)
    seed : int
    """

    grid: TimeGrid
    factors: np.ndarray
    prices: np.ndarray
    seed: int

    @property
    def n_paths(self):
        return self.factors.shape[0]


def long_run_cov(f):
    """Stationary covariance Sigma solving ``Theta S + S Theta^T = Sigma_X``."""
    return solve_lyapunov(f.theta, f.sigma_x)


def cond_factor_mean(f, t, T, x):
    """Conditional mean ``E[X(T) | X(t) = x]`` for t <= T.

    Supports a batch of states: ``x`` may have shape (d,) or (n, d).
    """
    if t > T:
        raise ValueError(f"require t <= T, got t={t}, T={T}")
    e = mat_exp(-f.theta, T - t)
    x = np.asarray(x, dtype=float)
    return (np.eye(f.d) - e) @ f.mu + x @ e.T


def cond_factor_cov(f, t, T):
    """Conditional covariance ``V[X(T) | X(t)]`` (independent of the state)."""
    if t > T:
        raise ValueError(f"require t <= T, got t={t}, T={T}")
    sig = long_run_cov(f)
    e = mat_exp(-f.theta, T - t)
    v = sig - e @ sig @ e.T
    return 0.5 * (v + v.T)


def _psd_factor(m):
    """Factor G with ``G @ G.T == m`` for symmetric PSD ``m``.

    Tiny negative eigenvalues from roundoff are clipped to zero.
    """
    m = 0.5 * (m + m.T)
    w, u = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    return u * np.sqrt(w)


def path_rng(seed, path_index, stream=0):
    """Deterministic per-path RNG, independent of total path count."""
    return np.random.default_rng(np.random.SeedSequence((seed, path_index, stream)))


def _draw_normals(seed, first_path, n_paths, n_steps, width):
    """Per-path standard-normal draws with a fixed layout.

    Path ``first_path + i`` always receives the same draws regardless of how
    the ensemble is chunked across calls.
    """
    z = np.empty((n_paths, n_steps, width))
    for i in range(n_paths):
        z[i] = path_rng(seed, first_path + i).standard_normal((n_steps, width))
    return z


def _step_constants(m, h):
    """Exact-transition constants shared by the joint simulator.

    Returns (E_h, J_h, R) with
      E_h = e^{-Theta h},
      J_h = cov(X-innovation, dW) = Theta^{-1}(I - E_h) L_X,
      R   = factor of the residual innovation covariance V_h - J_h J_h^T / h.
    """
    f = m.factors
    e_h = mat_exp(-f.theta, h)
    v_h = cond_factor_cov(f, 0.0, h)
    j_h = scipy.linalg.solve(f.theta, (np.eye(f.d) - e_h) @ f.l_x)
    r = _psd_factor(v_h - (j_h @ j_h.T) / h)
    return e_h, v_h, j_h, r


def simulate_joint(m, x0, s0, grid, n_paths, seed, path_offset=0):
    """Simulate joint (factor, price) paths under the unconditional measure.

    Factors are advanced with the exact Gaussian OU transition; the factor
    innovation is drawn *jointly* with the driving Brownian increment so that
    prices (log-Euler with the shared shocks) carry the exact instantaneous
    cross-covariance.  Per-path RNG streams are derived from
    ``(seed, path_index)`` so individual paths never depend on ``n_paths``;
    ``path_offset`` lets callers stream a large ensemble in chunks while
    reproducing exactly the same paths.

    Parameters
    ----------
    m : MarketModel
    x0 : ndarray, shape (d,)
        Initial factor state.
    s0 : ndarray, shape (n_assets,)
        Initial prices (positive).
    grid : TimeGrid
    n_paths : int
    seed : int
    path_offset : int, optional
        Index of the first path in the ensemble.

    Returns
    -------
    PathSet
    """
    x0 = _as_vector(np.asarray(x0, dtype=float), "x0")
    s0 = _as_vector(np.asarray(s0, dtype=float), "s0")
    if np.any(s0 <= 0.0):
        raise ValueError("initial prices must be positive")
    f, a = m.factors, m.assets
    d, n, n_drv = m.d, m.n_assets, m.n_drivers
    h = grid.h
    sqrt_h = np.sqrt(h)
    e_h, _, j_h, r_fac = _step_constants(m, h)
    j_over_h = j_h / h
    drift_const = (a.alpha - 0.5 * np.diag(a.sigma_s)) * h
    rho_c = np.sqrt(max(0.0, 1.0 - m.rho**2))

    factors = np.empty((n_paths, grid.n_steps + 1, d))
    log_s = np.empty((n_paths, grid.n_steps + 1, n))
    factors[:, 0] = x0
    log_s[:, 0] = np.log(s0)

    for lo in range(0, n_paths, _CHUNK):
        hi = min(lo + _CHUNK, n_paths)
        # fixed draw layout per step: [z_w (n_drv), z_w2 (n_drv), z_xi (d)]
        z = _draw_normals(seed, path_offset + lo, hi - lo, grid.n_steps, 2 * n_drv + d)
        dw = sqrt_h * z[:, :, :n_drv]
        dw_s = m.rho * dw + (rho_c * sqrt_h) * z[:, :, n_drv : 2 * n_drv]
        xi = z[:, :, 2 * n_drv :]
        x = np.broadcast_to(x0, (hi - lo, d)).copy()
        for k in range(grid.n_steps):
            eps = dw[:, k] @ j_over_h.T + xi[:, k] @ r_fac.T
            log_s[lo:hi, k + 1] = (
                log_s[lo:hi, k] + drift_const + (x @ a.beta.T) * h + dw_s[:, k] @ a.l_s.T
            )
            x = f.mu + (x - f.mu) @ e_h.T + eps
            factors[lo:hi, k + 1] = x

    return PathSet(grid=grid, factors=factors, prices=np.exp(log_s), seed=seed)
