"""Static Black-Litterman-style baseline under conditional dynamics.

At a rebalance date ``s`` the static investor treats the remaining horizon as
a single period: the terminal log-return vector ``R(T)`` is Gaussian under
the conditional (view-adjusted) measure with mean ``mu_BL`` and covariance
``sigma_BL`` computed from the time-varying linear dynamics, and the weights
are the familiar single-period mean-variance rule

    pi = (1/gamma) sigma_BL^{-1} (mu_BL - R(s) - r_f (T - s) 1).

All the integrals entering the moments (state transition, conditional factor
mean, its time integral, and the single/double covariance kernels) are
accumulated in one stacked forward RK4 pass on a sub-grid, which is
numerically equivalent to the quadrature formulation but stable under
refinement.
"""

from dataclasses import dataclass

import numpy as np

from .numerics import TimeGrid, integrate_forward
from .views import ConditionalCoeffs


@dataclass(frozen=True)
class BLMoments:
    """Conditional moments of the terminal log-return at a rebalance date.

    Attributes
    ----------
    s : float
        Evaluation time.
    horizon : float
        Remaining horizon ``T - s``.
    r_base : ndarray, shape (N,)
        Log prices ``R(s)`` the mean is anchored at.
    mu_bl : ndarray, shape (N,)
        Conditional mean of ``R(T)``.
    sigma_bl : ndarray, shape (N, N)
        Conditional covariance of ``R(T)``.
    """

    s: float
    horizon: float
    r_base: np.ndarray
    mu_bl: np.ndarray
    sigma_bl: np.ndarray


def bl_moments(m, v, s, state, n_nodes=256):
    """Conditional mean/covariance of the terminal log-return from time ``s``.

    Parameters
    ----------
    m : MarketModel
    v : ViewSpec
    s : float
        Current time, ``0 <= s < horizon``.
    state : (ndarray, ndarray)
        Current log prices ``R(s)`` (shape (N,)) and factors ``X(s)``
        (shape (d,)).
    n_nodes : int, optional
        RK4 steps on the sub-grid [s, T].

    Returns
    -------
    BLMoments
    """
    r_s, x_s = state
    r_s = np.atleast_1d(np.asarray(r_s, dtype=float))
    x_s = np.atleast_1d(np.asarray(x_s, dtype=float))
    T = v.horizon
    if not 0.0 <= s < T:
        raise ValueError(f"require 0 <= s < horizon, got s={s}")
    d, n = m.d, m.n_assets
    coeffs = ConditionalCoeffs(m, v)
    sigma_x = m.sigma_x
    cross_kernel = m.rho * (m.factors.l_x @ m.assets.l_s.T)  # rho L_X L_S^T
    half_diag = 0.5 * np.diag(m.sigma_s)

    # stacked state layout
    sizes = {
        "phi": d * d,      # transition Phi(u) = phi(s, u)
        "mean": d,         # conditional factor mean m(u)
        "mu_j": n,         # integral of the return drift
        "kint": d * d,     # K(u) = int Phi^{-1} Sigma_X Phi^{-T}
        "e1": d * n,       # int K(v) Phi(v)^T beta~(v)^T dv
        "fdbl": n * n,     # lower-triangle double integral of beta~ C beta~^T
        "acum": d * d,     # int Phi(r)^{-1} dr
        "cross": n * n,    # drift/shock cross covariance integral
    }
    offsets = {}
    pos = 0
    for key, size in sizes.items():
        offsets[key] = slice(pos, pos + size)
        pos += size

    def unpack(state_vec):
        return {
            "phi": state_vec[offsets["phi"]].reshape(d, d),
            "mean": state_vec[offsets["mean"]],
            "mu_j": state_vec[offsets["mu_j"]],
            "kint": state_vec[offsets["kint"]].reshape(d, d),
            "e1": state_vec[offsets["e1"]].reshape(d, n),
            "fdbl": state_vec[offsets["fdbl"]].reshape(n, n),
            "acum": state_vec[offsets["acum"]].reshape(d, d),
            "cross": state_vec[offsets["cross"]].reshape(n, n),
        }

    def rhs(u, state_vec):
        parts = unpack(state_vec)
        th = coeffs.theta_tilde(u)
        bt = coeffs.beta_tilde(u)
        phi = parts["phi"]
        phi_inv = np.linalg.solve(phi, np.eye(d))
        out = np.empty_like(state_vec)
        out[offsets["phi"]] = (-th @ phi).reshape(-1)
        out[offsets["mean"]] = coeffs.theta_mu(u) - th @ parts["mean"]
        out[offsets["mu_j"]] = coeffs.alpha_tilde(u) - half_diag + bt @ parts["mean"]
        out[offsets["kint"]] = (phi_inv @ sigma_x @ phi_inv.T).reshape(-1)
        out[offsets["e1"]] = (parts["kint"] @ phi.T @ bt.T).reshape(-1)
        out[offsets["fdbl"]] = (bt @ phi @ parts["e1"]).reshape(-1)
        out[offsets["acum"]] = phi_inv.reshape(-1)
        out[offsets["cross"]] = (bt @ phi @ parts["acum"] @ cross_kernel).reshape(-1)
        return out

    state0 = np.zeros(pos)
    state0[offsets["phi"]] = np.eye(d).reshape(-1)
    state0[offsets["mean"]] = x_s
    final = unpack(integrate_forward(rhs, state0, TimeGrid(s, T, n_nodes))[-1])

    mu_bl = r_s + final["mu_j"]
    sigma_bl = (
        (T - s) * m.sigma_s
        + final["fdbl"]
        + final["fdbl"].T
        + final["cross"]
        + final["cross"].T
    )
    sigma_bl = 0.5 * (sigma_bl + sigma_bl.T)
    return BLMoments(s=s, horizon=T - s, r_base=r_s, mu_bl=mu_bl, sigma_bl=sigma_bl)


def bl_policy(moments, pref, r_f):
    """Single-period mean-variance weights from conditional moments.

    ``pi = (1/gamma) sigma_BL^{-1} (mu_BL - R(s) - r_f (T - s) 1)`` — the
    expected cumulative log-return in excess of the horizon risk-free return.
    """
    excess = moments.mu_bl - moments.r_base - r_f * moments.horizon * np.ones(moments.mu_bl.shape[0])
    return np.linalg.solve(moments.sigma_bl, excess) / pref.gamma
