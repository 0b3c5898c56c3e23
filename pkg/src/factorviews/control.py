"""Optimal CRRA portfolio choice under conditional (view-adjusted) dynamics.

The value function is ``V(t, z, x) = z^{1-gamma}/(1-gamma) * exp(g(t, x))``
with ``g(t, x) = 0.5 x^T A(t) x + x^T b(t) + c(t)``; (A, b, c) solve a
backward matrix-Riccati / linear / scalar ODE system with zero terminal
conditions.  The optimal policy is

    pi*(t, x) = (1/gamma) Sigma_S^{-1} (alpha~ + beta~ x - r_f 1)
              + (1/gamma) Sigma_S^{-1} Sigma_SX (A(t) x + b(t)),

and, equivalently, the view information can be pushed entirely into the
terminal conditions of a constant-coefficient system (A1, b1) plus explicit
closed-form corrections (A_hat, b_hat) — the "decomposed" form, which also
yields the no-views policy pi_0 and the view adjustment H = pi* - pi_0.

The ODE integrator is a fixed-step backward RK4 with per-step symmetrization
of A and blow-up detection.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .market import simulate_joint
from .numerics import NumericalError, mat_exp
from .views import ConditionalCoeffs, long_run_cov, simulate_conditional

_BLOWUP = 1e12


@dataclass(frozen=True)
class Preferences:
    """CRRA preferences with relative risk aversion ``gamma > 1``."""

    gamma: float

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


def _interp_weights(grid, t):
    """Linear interpolation weights: node index k and fraction w in [0, 1]."""
    if t < grid.t0 - 1e-10 or t > grid.t1 + 1e-10:
        raise ValueError(f"t={t} outside the solved grid [{grid.t0}, {grid.t1}]")
    pos = (t - grid.t0) / grid.h
    k = int(np.clip(np.floor(pos), 0, grid.n_steps - 1))
    return k, pos - k


@dataclass(frozen=True)
class RiccatiPath:
    """Backward-solved value-function coefficients on a grid.

    ``a[k], b[k], c[k]`` hold A, b, c at node ``grid.nodes[k]`` (ascending
    time; the terminal node is the last entry).
    """

    grid: object
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def a_at(self, t):
        k, w = _interp_weights(self.grid, t)
        return (1.0 - w) * self.a[k] + w * self.a[k + 1]

    def b_at(self, t):
        k, w = _interp_weights(self.grid, t)
        return (1.0 - w) * self.b[k] + w * self.b[k + 1]

    def c_at(self, t):
        k, w = _interp_weights(self.grid, t)
        return (1.0 - w) * self.c[k] + w * self.c[k + 1]

    def to_csv(self, path):
        """Write (t, vec(A), b, c) rows, with a schema header comment."""
        d = self.a.shape[1]
        header = (
            ["t"]
            + [f"a_{i}{j}" for i in range(d) for j in range(d)]
            + [f"b_{i}" for i in range(d)]
            + ["c"]
        )
        with open(path, "w", newline="") as fh:
            fh.write("# value-function coefficient path: t, vec(A) row-major, b, c\n")
            writer = csv.writer(fh)
            writer.writerow(header)
            for k, t in enumerate(self.grid.nodes):
                writer.writerow(
                    [f"{t:.10g}"]
                    + [f"{x:.12g}" for x in self.a[k].reshape(-1)]
                    + [f"{x:.12g}" for x in self.b[k]]
                    + [f"{self.c[k]:.12g}"]
                )


@dataclass(frozen=True)
class DecomposedPath:
    """Constant-coefficient solves with view/no-view terminal conditions.

    ``a1, b1`` carry the view information purely through their terminal
    conditions ``A1(T) = -P^T Omega^{-1} P``, ``b1(T) = P^T Omega^{-1} y``;
    ``a0, b0`` have zero terminal conditions (no-views problem).  The full
    coefficients are recovered as ``A = A1 + A_hat``, ``b = b1 + b_hat`` with
    the closed-form corrections evaluated on demand.
    """

    grid: object
    a1: np.ndarray
    b1: np.ndarray
    a0: np.ndarray
    b0: np.ndarray
    model: object
    view: object

    def _interp(self, arr, t):
        k, w = _interp_weights(self.grid, t)
        return (1.0 - w) * arr[k] + w * arr[k + 1]

    def a1_at(self, t):
        return self._interp(self.a1, t)

    def b1_at(self, t):
        return self._interp(self.b1, t)

    def a0_at(self, t):
        return self._interp(self.a0, t)

    def b0_at(self, t):
        return self._interp(self.b0, t)

    def _hat_pieces(self, t):
        f = self.model.factors
        v = self.view
        sigma = long_run_cov(f)
        e = mat_exp(-f.theta, v.horizon - t)
        pe = v.p @ e
        inner = v.p @ (sigma - e @ sigma @ e.T) @ v.p.T + v.omega
        return pe, 0.5 * (inner + inner.T)

    def a_hat(self, t):
        """Closed-form correction A_hat(t) = (P e)^T (P V(tau) P^T + Omega)^{-1} (P e)."""
        pe, inner = self._hat_pieces(t)
        out = pe.T @ scipy.linalg.solve(inner, pe, assume_a="pos")
        return 0.5 * (out + out.T)

    def b_hat(self, t):
        """Closed-form correction b_hat(t) = (P e)^T (...)^{-1} (P(I-e)mu - y)."""
        pe, inner = self._hat_pieces(t)
        f = self.model.factors
        v = self.view
        rhs = v.p @ (np.eye(self.model.d) - mat_exp(-f.theta, v.horizon - t)) @ f.mu - v.y
        return pe.T @ scipy.linalg.solve(inner, rhs, assume_a="pos")

    def q_at(self, t):
        """View-hedging coefficient Q(t) = A1(t) - A0(t) (NSD for gamma > 1)."""
        return self.a1_at(t) - self.a0_at(t)

    def q_vec_at(self, t):
        """View-hedging intercept q(t) = b1(t) - b0(t)."""
        return self.b1_at(t) - self.b0_at(t)


@dataclass(frozen=True)
class PolicyEvaluation:
    """Optimal weights at (t, x) with their additive components."""

    t: float
    x: np.ndarray
    weights: np.ndarray
    mean_variance: np.ndarray
    hedging: np.ndarray
    no_views: Optional[np.ndarray] = None
    adjustment: Optional[np.ndarray] = None


def _solve_abc(coeffs_at, gamma, r_f, grid, terminal_a, terminal_b, terminal_c=0.0):
    """Backward RK4 for the stacked (A, b, c) system.

    ``coeffs_at(t)`` must return a tuple
    ``(beta_t, theta_t, theta_mu_t, excess_t, sigma_x_t, sigma_sx_t, ss_solve)``
    where ``excess_t`` is the drift intercept minus ``r_f * 1`` and
    ``ss_solve`` solves linear systems in Sigma_S.  Returns (a, b, c) arrays
    indexed by ascending grid node.

    ``terminal_b`` may have shape (d,) or (d, n_cols): the linear b-system is
    then integrated for every terminal column at once (the ODE is affine in
    b, so superpositions of columns solve it for superposed terminals); the
    scalar c is tracked against the first column.
    """
    d = terminal_a.shape[0]
    g1 = (1.0 - gamma) / gamma
    batched = terminal_b.ndim == 2

    def derivs(t, a_mat, b_vec):
        beta_t, theta_t, theta_mu_t, excess_t, sigma_x_t, sigma_sx_t, ss_solve = coeffs_at(t)
        if batched:
            excess_t = excess_t[:, None]
            theta_mu_col = theta_mu_t[:, None]
        else:
            theta_mu_col = theta_mu_t
        sol_beta = ss_solve(beta_t)
        sol_sx = ss_solve(sigma_sx_t)
        m_vec = sigma_sx_t @ b_vec + excess_t
        sol_m = ss_solve(m_vec)
        d_mat = g1 * (sigma_sx_t.T @ sol_beta) - theta_t
        quad = sigma_x_t + g1 * (sigma_sx_t.T @ sol_sx)
        da = -(g1 * (beta_t.T @ sol_beta) + a_mat @ quad @ a_mat + a_mat @ d_mat + d_mat.T @ a_mat)
        db = -(
            g1 * ((beta_t.T + a_mat @ sigma_sx_t.T) @ sol_m)
            + (a_mat @ sigma_x_t - theta_t.T) @ b_vec
            + a_mat @ theta_mu_col
        )
        b0 = b_vec[:, 0] if batched else b_vec
        m0 = m_vec[:, 0] if batched else m_vec
        sol_m0 = sol_m[:, 0] if batched else sol_m
        dc = -(
            (1.0 - gamma) * r_f
            + 0.5 * np.trace(sigma_x_t @ a_mat)
            + theta_mu_t @ b0
            + 0.5 * b0 @ sigma_x_t @ b0
            + 0.5 * g1 * (m0 @ sol_m0)
        )
        return da, db, dc

    n = grid.n_steps
    a = np.empty((n + 1, d, d))
    b = np.empty((n + 1,) + terminal_b.shape)
    c = np.empty(n + 1)
    a[n] = 0.5 * (terminal_a + terminal_a.T)
    b[n] = terminal_b
    c[n] = terminal_c
    h = grid.h
    nodes = grid.nodes
    for k in range(n - 1, -1, -1):
        t1 = nodes[k + 1]
        a_k, b_k, c_k = a[k + 1], b[k + 1], c[k + 1]
        da1, db1, dc1 = derivs(t1, a_k, b_k)
        da2, db2, dc2 = derivs(t1 - 0.5 * h, a_k - 0.5 * h * da1, b_k - 0.5 * h * db1)
        da3, db3, dc3 = derivs(t1 - 0.5 * h, a_k - 0.5 * h * da2, b_k - 0.5 * h * db2)
        da4, db4, dc4 = derivs(t1 - h, a_k - h * da3, b_k - h * db3)
        a_new = a_k - (h / 6.0) * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
        a[k] = 0.5 * (a_new + a_new.T)
        b[k] = b_k - (h / 6.0) * (db1 + 2.0 * db2 + 2.0 * db3 + db4)
        c[k] = c_k - (h / 6.0) * (dc1 + 2.0 * dc2 + 2.0 * dc3 + dc4)
        if not (np.all(np.isfinite(a[k])) and np.all(np.isfinite(b[k])) and np.isfinite(c[k])):
            raise NumericalError(f"non-finite Riccati state at t={nodes[k]:.6g}")
        if np.linalg.norm(a[k]) > _BLOWUP:
            raise NumericalError(f"Riccati blow-up detected at t={nodes[k]:.6g}")
    return a, b, c


def _ss_solver(m):
    cho = scipy.linalg.cho_factor(m.sigma_s)
    return lambda rhs: scipy.linalg.cho_solve(cho, rhs)


def conditional_ode_coeffs(m, v):
    """Coefficient provider for the full (view-conditional) ODE system.

    Exposed so independent checks (e.g. HJB-residual tests) can evaluate the
    exact right-hand-side inputs used by the solver.
    """
    coeffs = ConditionalCoeffs(m, v)
    sigma_x = m.sigma_x
    sigma_sx = m.sigma_sx
    ss_solve = _ss_solver(m)
    r_f = m.assets.r_f
    ones = np.ones(m.n_assets)

    def at(t):
        return (
            coeffs.beta_tilde(t),
            coeffs.theta_tilde(t),
            coeffs.theta_mu(t),
            coeffs.alpha_tilde(t) - r_f * ones,
            sigma_x,
            sigma_sx,
            ss_solve,
        )

    return at


def no_views_ode_coeffs(m):
    """Constant coefficient provider for the investor without views."""
    f = m.factors
    sigma_x = m.sigma_x
    sigma_sx = m.sigma_sx
    ss_solve = _ss_solver(m)
    excess = m.assets.alpha - m.assets.r_f * np.ones(m.n_assets)
    theta_mu = f.theta @ f.mu

    def at(_t):
        return (m.assets.beta, f.theta, theta_mu, excess, sigma_x, sigma_sx, ss_solve)

    return at


def solve_no_views(m, pref, grid):
    """Value-function coefficients of the investor without views."""
    at = no_views_ode_coeffs(m)
    a, b, c = _solve_abc(
        at, pref.gamma, m.assets.r_f, grid, np.zeros((m.d, m.d)), np.zeros(m.d)
    )
    return RiccatiPath(grid=grid, a=a, b=b, c=c)


def solve_full(m, v, pref, grid):
    """Solve the conditional-coefficient system with zero terminal conditions."""
    if abs(grid.t1 - v.horizon) > 1e-10:
        raise ValueError("grid must end at the view horizon")
    at = conditional_ode_coeffs(m, v)
    a, b, c = _solve_abc(
        at, pref.gamma, m.assets.r_f, grid, np.zeros((m.d, m.d)), np.zeros(m.d)
    )
    return RiccatiPath(grid=grid, a=a, b=b, c=c)


def solve_decomposed(m, v, pref, grid):
    """Solve the constant-coefficient systems of the decomposition theorem.

    (A1, b1) carry terminal conditions ``A1(T) = -P^T Omega^{-1} P``,
    ``b1(T) = P^T Omega^{-1} y``; (A0, b0) have zero terminals and describe
    the investor without views.
    """
    if abs(grid.t1 - v.horizon) > 1e-10:
        raise ValueError("grid must end at the view horizon")
    at = no_views_ode_coeffs(m)
    r_f = m.assets.r_f
    omega_inv_p = np.linalg.solve(v.omega, v.p)
    term_a1 = -(v.p.T @ omega_inv_p)
    term_b1 = v.p.T @ np.linalg.solve(v.omega, v.y)
    a1, b1, _ = _solve_abc(at, pref.gamma, r_f, grid, term_a1, term_b1)
    a0, b0, _ = _solve_abc(at, pref.gamma, r_f, grid, np.zeros((m.d, m.d)), np.zeros(m.d))
    return DecomposedPath(grid=grid, a1=a1, b1=b1, a0=a0, b0=b0, model=m, view=v)


def _affine_eval(base, mat, x):
    """Evaluate ``base + mat @ x`` for x of shape (d,) or batched (n, d)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return base + mat @ x
    return base + x @ mat.T


def policy(m, v, pref, path, t, x):
    """Optimal portfolio weights at (t, x).

    With a :class:`RiccatiPath` (full form) the mean-variance part uses the
    conditional coefficients ``alpha~, beta~``; with a
    :class:`DecomposedPath` it uses the unconditional ``alpha, beta`` and the
    hedge uses (A1, b1), additionally reporting the no-views policy pi_0 and
    the view adjustment H = pi* - pi_0.

    ``x`` may be a single state (d,) or a batch (n, d).
    """
    gamma = pref.gamma
    ss_solve = _ss_solver(m)
    sigma_sx = m.sigma_sx
    r_f = m.assets.r_f
    ones = np.ones(m.n_assets)

    if isinstance(path, DecomposedPath):
        mv_base = ss_solve(m.assets.alpha - r_f * ones) / gamma
        mv_mat = ss_solve(m.assets.beta) / gamma
        hedge_base = ss_solve(sigma_sx @ path.b1_at(t)) / gamma
        hedge_mat = ss_solve(sigma_sx @ path.a1_at(t)) / gamma
        pi0_base = mv_base + ss_solve(sigma_sx @ path.b0_at(t)) / gamma
        pi0_mat = mv_mat + ss_solve(sigma_sx @ path.a0_at(t)) / gamma
        mv = _affine_eval(mv_base, mv_mat, x)
        hedge = _affine_eval(hedge_base, hedge_mat, x)
        pi0 = _affine_eval(pi0_base, pi0_mat, x)
        weights = mv + hedge
        return PolicyEvaluation(
            t=t,
            x=np.asarray(x, dtype=float),
            weights=weights,
            mean_variance=mv,
            hedging=hedge,
            no_views=pi0,
            adjustment=weights - pi0,
        )

    coeffs = ConditionalCoeffs(m, v)
    mv_base = ss_solve(coeffs.alpha_tilde(t) - r_f * ones) / gamma
    mv_mat = ss_solve(coeffs.beta_tilde(t)) / gamma
    hedge_base = ss_solve(sigma_sx @ path.b_at(t)) / gamma
    hedge_mat = ss_solve(sigma_sx @ path.a_at(t)) / gamma
    mv = _affine_eval(mv_base, mv_mat, x)
    hedge = _affine_eval(hedge_base, hedge_mat, x)
    return PolicyEvaluation(
        t=t,
        x=np.asarray(x, dtype=float),
        weights=mv + hedge,
        mean_variance=mv,
        hedging=hedge,
    )


def value_function(path, pref, t, z, x):
    """Value ``V(t, z, x) = z^{1-gamma}/(1-gamma) exp(g(t, x))`` from a solved path."""
    if not z > 0.0:
        raise ValueError(f"wealth must be positive, got {z}")
    x = np.asarray(x, dtype=float)
    g = 0.5 * x @ path.a_at(t) @ x + x @ path.b_at(t) + path.c_at(t)
    gamma = pref.gamma
    return z ** (1.0 - gamma) / (1.0 - gamma) * np.exp(g)


@dataclass(frozen=True)
class WealthResult:
    """Wealth simulation output.

    Attributes
    ----------
    terminal_wealth : ndarray, shape (n_paths,)
    wealth_at_rebalance : ndarray, shape (n_paths, n_rebalance + 1)
    holdings : ndarray, shape (n_paths, n_rebalance + 1, n_assets)
        Share holdings ``n_i = pi_i Z / S_i`` at each rebalance node.
    rebalance_times : ndarray
    excluded : int
        Count of non-finite / non-positive terminal-wealth paths (excluded
        from the terminal array by masking to NaN).
    """

    terminal_wealth: np.ndarray
    wealth_at_rebalance: np.ndarray
    holdings: np.ndarray
    rebalance_times: np.ndarray
    excluded: int


def wealth_from_paths(m, paths, policy_fn, z0, rebalance_every):
    """Advance wealth along simulated price paths under a policy.

    The wealth follows log-Euler on ``dZ/Z`` with the Brownian shocks
    recovered exactly from the price increments:

        dlog Z = r_f h + w^T (dlog S + 0.5 diag(Sigma_S) h - r_f 1 h)
                 - 0.5 w^T Sigma_S w h.

    Parameters
    ----------
    m : MarketModel
    paths : PathSet
    policy_fn : callable
        ``policy_fn(t, x_batch) -> weights`` with ``x_batch`` of shape
        (n_paths, d) and output (n_paths, n_assets).
    z0 : float
        Initial wealth (> 0).
    rebalance_every : int
        Recompute weights every this many grid steps (1 = every step).

    Returns
    -------
    WealthResult
    """
    if not z0 > 0.0:
        raise ValueError(f"z0 must be positive, got {z0}")
    grid = paths.grid
    if grid.n_steps % rebalance_every != 0:
        raise ValueError("rebalance_every must divide the number of grid steps")
    n_paths = paths.n_paths
    n = m.n_assets
    h = grid.h
    r_f = m.assets.r_f
    sigma_s = m.sigma_s
    half_diag = 0.5 * np.diag(sigma_s)
    nodes = grid.nodes
    n_reb = grid.n_steps // rebalance_every
    reb_idx = np.arange(0, grid.n_steps + 1, rebalance_every)

    log_z = np.full(n_paths, np.log(z0))
    wealth_reb = np.empty((n_paths, n_reb + 1))
    holdings = np.empty((n_paths, n_reb + 1, n))
    log_prices = np.log(paths.prices)
    w = None
    for k in range(grid.n_steps):
        if k % rebalance_every == 0:
            j = k // rebalance_every
            w = np.atleast_2d(policy_fn(nodes[k], paths.factors[:, k]))
            z = np.exp(log_z)
            wealth_reb[:, j] = z
            holdings[:, j] = w * z[:, None] / paths.prices[:, k]
        dls = log_prices[:, k + 1] - log_prices[:, k]
        quad = np.einsum("pi,ij,pj->p", w, sigma_s, w)
        log_z = log_z + r_f * h + np.sum(w * (dls + (half_diag - r_f) * h), axis=1) - 0.5 * quad * h
    z = np.exp(log_z)
    wealth_reb[:, n_reb] = z
    # terminal holdings valued at the final weights held
    holdings[:, n_reb] = w * z[:, None] / paths.prices[:, -1]
    bad = ~np.isfinite(z) | (z <= 0.0)
    terminal = z.copy()
    terminal[bad] = np.nan
    return WealthResult(
        terminal_wealth=terminal,
        wealth_at_rebalance=wealth_reb,
        holdings=holdings,
        rebalance_times=nodes[reb_idx],
        excluded=int(np.sum(bad)),
    )


def simulate_wealth(m, v, pref, policy_source, x0, z0, grid, n_paths, rebalance_every, seed):
    """Simulate market paths and advance wealth under a policy.

    Parameters
    ----------
    m : MarketModel
    v : ViewSpec or None
        When given, paths are simulated under the conditional measure;
        otherwise under the unconditional one.
    pref : Preferences
    policy_source : callable or RiccatiPath or DecomposedPath
        A callable ``(t, x_batch) -> weights`` or a solved coefficient path
        (evaluated through :func:`policy`).
    x0, z0, grid, n_paths, rebalance_every, seed :
        As in the path simulators / :func:`wealth_from_paths`.
    """
    s0 = np.ones(m.n_assets)
    if v is None:
        paths = simulate_joint(m, x0, s0, grid, n_paths, seed)
    else:
        paths = simulate_conditional(m, v, x0, s0, grid, n_paths, seed)
    if callable(policy_source):
        policy_fn = policy_source
    else:
        path_obj = policy_source

        def policy_fn(t, x_batch):
            return policy(m, v, pref, path_obj, t, x_batch).weights

    return wealth_from_paths(m, paths, policy_fn, z0, rebalance_every)
