"""Independent reference implementations used by the test suite.

Everything here is computed from first principles (exact Gaussian transition
algebra and direct HJB evaluation) without reusing the library's ODE
right-hand sides, so agreement is evidence rather than tautology.
"""

import numpy as np
import scipy.linalg

from factorviews.market import cond_factor_cov
from factorviews.numerics import mat_exp


def brute_conditional_moments(m, v, query_times, x0, n_steps=200):
    """Moments of X(t) given X(0) = x0 and Y = y by discrete Gaussian algebra.

    Propagates mean, covariance, and the cross-covariance with X(T) through
    ``n_steps`` exact OU transitions, then conditions on the noisy view in
    one linear-Gaussian update.  Returns ``{t: (mean, cov)}``.
    """
    f = m.factors
    T = v.horizon
    h = T / n_steps
    e_h = mat_exp(-f.theta, h)
    v_h = cond_factor_cov(f, 0.0, h)
    nodes = np.linspace(0.0, T, n_steps + 1)

    means = [np.asarray(x0, dtype=float)]
    covs = [np.zeros((m.d, m.d))]
    for _ in range(n_steps):
        means.append(f.mu + e_h @ (means[-1] - f.mu))
        covs.append(e_h @ covs[-1] @ e_h.T + v_h)

    # cross-covariances cov(X(t_k), X(T)) = V_k (e^{-Theta h})^{(n-k) T}
    crosses = []
    for k in range(n_steps + 1):
        prop = np.linalg.matrix_power(e_h, n_steps - k)
        crosses.append(covs[k] @ prop.T)

    s_mat = v.p @ covs[-1] @ v.p.T + v.omega
    innov = v.y - v.p @ means[-1]
    out = {}
    for t in query_times:
        k = int(round(t / h))
        assert abs(nodes[k] - t) < 1e-12, "query times must lie on the grid"
        gain = crosses[k] @ v.p.T @ np.linalg.inv(s_mat)
        mean = means[k] + gain @ innov
        cov = covs[k] - gain @ v.p @ crosses[k].T
        out[t] = (mean, 0.5 * (cov + cov.T))
    return out


def ou_cov_scalar(theta, sigma2, u, w):
    """cov(X(u), X(w)) of a scalar OU from a deterministic start (diffusion scale sigma)."""
    lo = min(u, w)
    return sigma2 * np.exp(-theta * abs(u - w)) * (1.0 - np.exp(-2.0 * theta * lo)) / (2.0 * theta)


def condition_gaussian(mean, cov, obs_idx, obs_values, obs_noise=None):
    """Condition a joint Gaussian on a subset of coordinates (plus optional noise)."""
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    all_idx = np.arange(mean.shape[0])
    keep = np.setdiff1d(all_idx, obs_idx)
    c_oo = cov[np.ix_(obs_idx, obs_idx)].copy()
    if obs_noise is not None:
        c_oo += obs_noise
    c_ko = cov[np.ix_(keep, obs_idx)]
    gain = c_ko @ np.linalg.inv(c_oo)
    mean_c = mean[keep] + gain @ (np.asarray(obs_values, dtype=float) - mean[obs_idx])
    cov_c = cov[np.ix_(keep, keep)] - gain @ c_ko.T
    return mean_c, 0.5 * (cov_c + cov_c.T)


def ou_pinned_cov_matrix(theta, sigma_x, t_hit, a):
    """Joint mean/cov of ``(B_1(t_hit_1), ..., B_d(t_hit_d))`` for the centered
    OU ``dB = -Theta B dt + L_X dW`` from ``B(0) = a`` (closed form)."""
    d = theta.shape[0]
    t_hit = np.asarray(t_hit, dtype=float)
    sig = scipy.linalg.solve_lyapunov(theta, sigma_x)

    def v_of(u):
        e = mat_exp(-theta, u)
        return sig - e @ sig @ e.T

    mean = np.array([(mat_exp(-theta, t_hit[i]) @ a)[i] for i in range(d)])
    cov = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            lo = min(t_hit[i], t_hit[j])
            # cov(B(u), B(w)) = e^{-Theta (u - lo)} V(lo) e^{-Theta^T (w - lo)}
            block = mat_exp(-theta, t_hit[i] - lo) @ v_of(lo) @ mat_exp(-theta, t_hit[j] - lo).T
            cov[i, j] = block[i, j]
    return mean, 0.5 * (cov + cov.T)


def brute_precision_gain(delta, theta, sigma_x):
    """Posterior-minus-prior precision of X(T) from exact coordinate
    observations at ``T + delta_i``, by direct Gaussian conditioning of the
    stationary law (closed-form covariances, no quadrature)."""
    d = theta.shape[0]
    delta = np.asarray(delta, dtype=float)
    sig = scipy.linalg.solve_lyapunov(theta, sigma_x)
    obs_cov = np.empty((d, d))
    cross = np.empty((d, d))
    for i in range(d):
        for j in range(d):
            lo = min(delta[i], delta[j])
            block = (
                mat_exp(-theta, delta[i] - lo) @ sig @ mat_exp(-theta, delta[j] - lo).T
            )
            obs_cov[i, j] = block[i, j]
        cross[:, i] = (sig @ mat_exp(-theta.T, delta[i]))[:, i]
    obs_cov = 0.5 * (obs_cov + obs_cov.T)
    post = sig - cross @ np.linalg.solve(obs_cov, cross.T)
    post = 0.5 * (post + post.T)
    return np.linalg.inv(post) - np.linalg.inv(sig)


def hjb_residual(coeffs_at, sigma_s, a_nodes, b_nodes, c_nodes, grid, gamma, r_f, k, z, x):
    """HJB residual at grid node ``k`` for the solved (A, b, c) coefficients.

    Evaluates the dynamic-programming equation directly: the time derivative
    of ``g`` comes from a central finite difference of the solved nodes, all
    spatial derivatives are analytic in the quadratic ansatz, and the
    optimal control is recomputed from its first-order condition.  Returns
    ``(residual, value)``.
    """
    h = grid.h
    x = np.asarray(x, dtype=float)

    def g_at(i):
        return 0.5 * x @ a_nodes[i] @ x + x @ b_nodes[i] + c_nodes[i]

    g = g_at(k)
    if 2 <= k <= len(c_nodes) - 3:
        # fourth-order central difference keeps the oracle's own error
        # well below the tolerance even where the coefficients are stiff
        g_t = (-g_at(k + 2) + 8.0 * g_at(k + 1) - 8.0 * g_at(k - 1) + g_at(k - 2)) / (12.0 * h)
    else:
        g_t = (g_at(k + 1) - g_at(k - 1)) / (2.0 * h)
    t = grid.nodes[k]
    beta_t, theta_t, theta_mu_t, excess_t, sigma_x_t, sigma_sx_t, ss_solve = coeffs_at(t)

    value = z ** (1.0 - gamma) / (1.0 - gamma) * np.exp(g)
    grad = a_nodes[k] @ x + b_nodes[k]
    v_z = (1.0 - gamma) * value / z
    v_zz = -gamma * (1.0 - gamma) * value / z**2
    v_x = grad * value
    v_xx = (a_nodes[k] + np.outer(grad, grad)) * value
    v_zx = (1.0 - gamma) / z * grad * value

    excess = excess_t + beta_t @ x
    pi = -np.linalg.solve(sigma_s, excess * v_z + sigma_sx_t @ v_zx) / (z * v_zz)

    residual = (
        g_t * value
        + z * (r_f + pi @ excess) * v_z
        + 0.5 * z**2 * (pi @ sigma_s @ pi) * v_zz
        + z * pi @ (sigma_sx_t @ v_zx)
        + (theta_mu_t - theta_t @ x) @ v_x
        + 0.5 * np.trace(sigma_x_t @ v_xx)
    )
    return residual, value
