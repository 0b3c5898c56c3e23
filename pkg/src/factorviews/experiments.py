"""Monte-Carlo experiment harness: CER, frontiers, turnover, sweeps.

Simulates the market under the physical measure, draws a view realization
per path (``y = P X(T) + eps`` by default), and advances wealth for each
strategy over a shared set of paths (common random numbers):

- ``dynamic-views``: the backward-Riccati optimal policy conditioned on the
  path's view realization.  Because the linear coefficient ``b1(t; y)`` is
  affine in ``y``, a single batched solve with K + 1 terminal columns covers
  every path's view.
- ``dynamic-no-views``: the same machinery with zero terminal conditions.
- ``static-bl``: the single-period mean-variance baseline re-evaluated at
  each rebalance date from the conditional horizon moments; the moment mean
  is affine in ``(X(s), y)``, so a basis of moment evaluations per date
  covers every path.

All statistics carry Monte-Carlo standard errors; CER differences between
strategies are computed path-paired to exploit the common random numbers.
"""

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import control
from .blstatic import bl_moments
from .control import Preferences, _solve_abc, _ss_solver, wealth_from_paths
from .market import MarketModel, path_rng, simulate_joint
from .numerics import TimeGrid, cholesky
from .views import ViewSpec, omega_from_tau


class ConfigError(ValueError):
    """Invalid experiment configuration (message names the offending field)."""


_STRATEGIES = ("dynamic-views", "dynamic-no-views", "static-bl")


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration of one experiment run."""

    model: MarketModel
    p: np.ndarray
    tau: Optional[float] = 0.05
    omega: Optional[np.ndarray] = None
    y_mode: str = "sampled"
    y_fixed: Optional[np.ndarray] = None
    gammas: tuple = (5.0,)
    horizon: float = 1.0
    n_rebalance: int = 12
    steps_per_rebalance: int = 20
    n_paths: int = 2000
    seed: int = 0
    z0: float = 1.0
    x0: Optional[np.ndarray] = None
    strategies: tuple = _STRATEGIES
    riccati_steps: int = 2000
    bl_nodes: int = 192

    def validate(self):
        if self.n_paths < 1:
            raise ConfigError("n_paths must be >= 1")
        if not self.strategies:
            raise ConfigError("strategies must be nonempty")
        for s in self.strategies:
            if s not in _STRATEGIES:
                raise ConfigError(f"unknown strategy '{s}' (choose from {_STRATEGIES})")
        if self.omega is None and self.tau is None:
            raise ConfigError("either tau or omega must be given")
        if self.y_mode not in ("sampled", "fixed"):
            raise ConfigError("y_mode must be 'sampled' or 'fixed'")
        if self.y_mode == "fixed" and self.y_fixed is None:
            raise ConfigError("y_fixed is required when y_mode='fixed'")
        if not all(g > 1.0 for g in self.gammas):
            raise ConfigError("all gammas must exceed 1")
        if self.horizon <= 0.0 or self.n_rebalance < 1 or self.steps_per_rebalance < 1:
            raise ConfigError("horizon, n_rebalance and steps_per_rebalance must be positive")
        return self

    def resolve_omega(self):
        if self.omega is not None:
            return np.asarray(self.omega, dtype=float)
        return omega_from_tau(self.model, self.p, self.tau, self.horizon)

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        """Build from a JSON document; the model may be inline or a file path."""
        import os

        model_doc = doc.get("model")
        if model_doc is None:
            raise ConfigError("missing 'model'")
        if isinstance(model_doc, str):
            model = MarketModel.load(os.path.join(base_dir, model_doc))
        else:
            model = MarketModel.from_dict(model_doc)
        views_doc = doc.get("views", {})
        if "p" not in views_doc:
            raise ConfigError("missing 'views.p'")
        y_src = views_doc.get("y", "sampled")
        if isinstance(y_src, str):
            y_mode, y_fixed = y_src, None
        else:
            y_mode, y_fixed = "fixed", np.asarray(y_src, dtype=float)
        kwargs = dict(
            model=model,
            p=np.asarray(views_doc["p"], dtype=float),
            tau=views_doc.get("tau"),
            omega=(np.asarray(views_doc["omega"], dtype=float) if "omega" in views_doc else None),
            y_mode=y_mode,
            y_fixed=y_fixed,
            horizon=float(views_doc.get("horizon", doc.get("horizon", 1.0))),
        )
        for key in (
            "gammas",
            "n_rebalance",
            "steps_per_rebalance",
            "n_paths",
            "seed",
            "z0",
            "strategies",
            "riccati_steps",
            "bl_nodes",
        ):
            if key in doc:
                kwargs[key] = tuple(doc[key]) if key in ("gammas", "strategies") else doc[key]
        if "x0" in doc:
            kwargs["x0"] = np.asarray(doc["x0"], dtype=float)
        try:
            cfg = cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc))
        return cfg.validate()


@dataclass(frozen=True)
class StrategyResult:
    """Per-(strategy, gamma) statistics; every statistic carries its SE."""

    strategy: str
    gamma: float
    mean_return: float
    se_return: float
    std_return: float
    cer_value: float
    cer_se: float
    turnover_value: float
    turnover_se: float
    excluded: int
    terminal_wealth: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ExperimentReport:
    """All strategy results for one configuration."""

    config: ExperimentConfig
    results: tuple

    def get(self, strategy, gamma):
        for r in self.results:
            if r.strategy == strategy and r.gamma == gamma:
                return r
        raise KeyError(f"no result for ({strategy}, gamma={gamma})")


def cer(terminal_wealths, z0, gamma, horizon):
    """Certainty-equivalent return: the constant rate matching expected utility.

    ``r_c = ln(E[(Z_T/z0)^{1-gamma}]) / ((1-gamma) T)``.
    """
    w = np.asarray(terminal_wealths, dtype=float)
    w = w[np.isfinite(w)]
    if np.any(w <= 0.0):
        raise ValueError("terminal wealths must be positive for CRRA utility")
    if not gamma > 1.0:
        raise ValueError("gamma must exceed 1")
    u = (w / z0) ** (1.0 - gamma)
    return float(np.log(np.mean(u)) / ((1.0 - gamma) * horizon))


def _cer_and_se(terminal, z0, gamma, horizon):
    w = terminal[np.isfinite(terminal)]
    u = (w / z0) ** (1.0 - gamma)
    m_u = np.mean(u)
    se_u = np.std(u, ddof=1) / np.sqrt(len(u))
    r_c = np.log(m_u) / ((1.0 - gamma) * horizon)
    se = se_u / (abs(1.0 - gamma) * horizon * m_u)
    return float(r_c), float(se)


def cer_difference(terminal_a, terminal_b, z0, gamma, horizon):
    """Paired CER difference (a minus b) with its delta-method SE.

    Both terminal-wealth arrays must come from the same paths (common random
    numbers); the covariance of the per-path utilities then shrinks the SE.
    """
    ok = np.isfinite(terminal_a) & np.isfinite(terminal_b)
    u_a = (terminal_a[ok] / z0) ** (1.0 - gamma)
    u_b = (terminal_b[ok] / z0) ** (1.0 - gamma)
    n = len(u_a)
    m_a, m_b = np.mean(u_a), np.mean(u_b)
    diff = (np.log(m_a) - np.log(m_b)) / ((1.0 - gamma) * horizon)
    cov = np.cov(u_a, u_b, ddof=1)
    var = (
        cov[0, 0] / (n * m_a**2) + cov[1, 1] / (n * m_b**2) - 2.0 * cov[0, 1] / (n * m_a * m_b)
    ) / ((1.0 - gamma) * horizon) ** 2
    return float(diff), float(np.sqrt(max(var, 0.0)))


def turnover(holdings):
    """Expected total absolute change in share holdings across rebalances.

    Parameters
    ----------
    holdings : ndarray, shape (n_paths, n_dates, n_assets)

    Returns
    -------
    (mean, se)
    """
    per_path = np.sum(np.abs(np.diff(holdings, axis=1)), axis=(1, 2))
    return float(np.mean(per_path)), float(np.std(per_path, ddof=1) / np.sqrt(len(per_path)))


def sample_views(cfg, paths, omega):
    """Per-path view realizations ``y_i = P X_i(T) + eps_i`` (or the fixed y)."""
    k = cfg.p.shape[0]
    if cfg.y_mode == "fixed":
        return np.broadcast_to(np.asarray(cfg.y_fixed, dtype=float), (paths.n_paths, k)).copy()
    l_omega = cholesky(omega)
    ys = paths.factors[:, -1] @ cfg.p.T
    for i in range(paths.n_paths):
        ys[i] += l_omega @ path_rng(cfg.seed, i, stream=1).standard_normal(k)
    return ys


def _dynamic_policy_tables(cfg, pref, omega, with_views):
    """Rebalance-date policy tables for the dynamic strategies.

    Returns ``(mv_base, mv_mat, hedge_mat_nodes, hedge_base_cols_nodes)``
    where the weight at date j for state x and view y is
    ``mv_base + mv_mat @ x + hedge_mat[j] @ x + hedge_cols[j] @ (1, y)``.
    """
    m = cfg.model
    gamma = pref.gamma
    grid_r = TimeGrid(0.0, cfg.horizon, cfg.riccati_steps)
    at = control.no_views_ode_coeffs(m)
    k = cfg.p.shape[0]
    if with_views:
        omega_inv_p = np.linalg.solve(omega, cfg.p)
        term_a = -(cfg.p.T @ omega_inv_p)
        # terminal b columns: zero plus one per view coordinate
        term_b = np.zeros((m.d, k + 1))
        term_b[:, 1:] = cfg.p.T @ np.linalg.inv(omega)
    else:
        term_a = np.zeros((m.d, m.d))
        term_b = np.zeros((m.d, 1))
    a_path, b_path, _ = _solve_abc(at, gamma, m.assets.r_f, grid_r, term_a, term_b)
    # the b-ODE is affine: column 0 (zero terminal) is the particular part and
    # column k carries it too, so the pure y-linear parts are col_k - col_0
    b_path = b_path.copy()
    b_path[:, :, 1:] -= b_path[:, :, :1]

    ss_solve = _ss_solver(m)
    sigma_sx = m.sigma_sx
    mv_base = ss_solve(m.assets.alpha - m.assets.r_f * np.ones(m.n_assets)) / gamma
    mv_mat = ss_solve(m.assets.beta) / gamma
    step = cfg.riccati_steps // cfg.n_rebalance
    if cfg.riccati_steps % cfg.n_rebalance != 0:
        raise ConfigError("riccati_steps must be divisible by n_rebalance")
    hedge_mats = []
    hedge_cols = []
    for j in range(cfg.n_rebalance):
        idx = j * step
        hedge_mats.append(ss_solve(sigma_sx @ a_path[idx]) / gamma)
        hedge_cols.append(ss_solve(sigma_sx @ b_path[idx]) / gamma)
    return mv_base, mv_mat, hedge_mats, hedge_cols


def _bl_policy_tables(cfg, omega):
    """Per-rebalance-date affine maps for the static baseline (gamma-free).

    The weight at date j is ``(1/gamma) (M0[j] + MX[j] @ x + MY[j] @ y)``.
    """
    m = cfg.model
    d, n, k = m.d, m.n_assets, cfg.p.shape[0]
    r0 = np.zeros(n)
    times = np.linspace(0.0, cfg.horizon, cfg.n_rebalance + 1)[:-1]
    tables = []
    for s in times:
        def moments_for(x_s, y_vec):
            v = ViewSpec(p=cfg.p, omega=omega, y=y_vec, horizon=cfg.horizon)
            return bl_moments(m, v, s, (r0, x_s), n_nodes=cfg.bl_nodes)

        base = moments_for(np.zeros(d), np.zeros(k))
        u0 = base.mu_bl
        ux = np.column_stack(
            [moments_for(np.eye(d)[i], np.zeros(k)).mu_bl - u0 for i in range(d)]
        )
        uy = np.column_stack(
            [moments_for(np.zeros(d), np.eye(k)[j]).mu_bl - u0 for j in range(k)]
        )
        sigma_inv = np.linalg.inv(base.sigma_bl)
        m0 = sigma_inv @ (u0 - m.assets.r_f * (cfg.horizon - s) * np.ones(n))
        tables.append((m0, sigma_inv @ ux, sigma_inv @ uy))
    return tables


def run_experiment(cfg):
    """Run all configured strategies over a shared set of market paths."""
    cfg.validate()
    m = cfg.model
    omega = cfg.resolve_omega()
    x0 = np.asarray(cfg.x0, dtype=float) if cfg.x0 is not None else m.factors.mu
    grid = TimeGrid(0.0, cfg.horizon, cfg.n_rebalance * cfg.steps_per_rebalance)
    paths = simulate_joint(m, x0, np.ones(m.n_assets), grid, cfg.n_paths, cfg.seed)
    ys = sample_views(cfg, paths, omega)
    h_reb = cfg.horizon / cfg.n_rebalance

    bl_tables = _bl_policy_tables(cfg, omega) if "static-bl" in cfg.strategies else None
    results = []
    for gamma in cfg.gammas:
        pref = Preferences(gamma=gamma)
        for strategy in cfg.strategies:
            if strategy == "dynamic-views":
                mv_base, mv_mat, h_mats, h_cols = _dynamic_policy_tables(cfg, pref, omega, True)

                def policy_fn(t, x_batch, _m=mv_base, _mm=mv_mat, _hm=h_mats, _hc=h_cols):
                    j = int(round(t / h_reb))
                    b_of_y = _hc[j][:, 0] + ys @ _hc[j][:, 1:].T
                    return _m + x_batch @ (_mm + _hm[j]).T + b_of_y
            elif strategy == "dynamic-no-views":
                mv_base, mv_mat, h_mats, h_cols = _dynamic_policy_tables(cfg, pref, omega, False)

                def policy_fn(t, x_batch, _m=mv_base, _mm=mv_mat, _hm=h_mats, _hc=h_cols):
                    j = int(round(t / h_reb))
                    return _m + x_batch @ (_mm + _hm[j]).T + _hc[j][:, 0]
            else:
                def policy_fn(t, x_batch, _tab=bl_tables, _g=gamma):
                    j = int(round(t / h_reb))
                    m0, mx, my = _tab[j]
                    return (m0 + x_batch @ mx.T + ys @ my.T) / _g

            wealth = wealth_from_paths(m, paths, policy_fn, cfg.z0, cfg.steps_per_rebalance)
            terminal = wealth.terminal_wealth
            ok = np.isfinite(terminal)
            returns = terminal[ok] / cfg.z0 - 1.0
            r_c, r_c_se = _cer_and_se(terminal, cfg.z0, gamma, cfg.horizon)
            tov, tov_se = turnover(wealth.holdings[ok])
            results.append(
                StrategyResult(
                    strategy=strategy,
                    gamma=gamma,
                    mean_return=float(np.mean(returns)),
                    se_return=float(np.std(returns, ddof=1) / np.sqrt(len(returns))),
                    std_return=float(np.std(returns, ddof=1)),
                    cer_value=r_c,
                    cer_se=r_c_se,
                    turnover_value=tov,
                    turnover_se=tov_se,
                    excluded=wealth.excluded,
                    terminal_wealth=terminal,
                )
            )
    return ExperimentReport(config=cfg, results=tuple(results))


@dataclass(frozen=True)
class SweepPoint:
    """One point of a parameter sweep with the paired CER difference."""

    axis: str
    value: float
    delta_cer: float
    delta_cer_se: float
    report: ExperimentReport


def run_sweep(cfg, axis, values, gamma=None):
    """Sweep tau or rho and report paired ΔCER (views minus no-views)."""
    if axis not in ("tau", "rho"):
        raise ConfigError(f"sweep axis must be 'tau' or 'rho', got '{axis}'")
    gamma = gamma if gamma is not None else cfg.gammas[0]
    base = replace(
        cfg, gammas=(gamma,), strategies=("dynamic-views", "dynamic-no-views"), omega=None
    )
    points = []
    for value in values:
        if axis == "tau":
            cfg_v = replace(base, tau=float(value))
        else:
            model_v = MarketModel(
                factors=cfg.model.factors, assets=cfg.model.assets, rho=float(value)
            )
            cfg_v = replace(base, model=model_v)
        report = run_experiment(cfg_v)
        w_v = report.get("dynamic-views", gamma).terminal_wealth
        w_0 = report.get("dynamic-no-views", gamma).terminal_wealth
        diff, se = cer_difference(w_v, w_0, cfg.z0, gamma, cfg.horizon)
        points.append(
            SweepPoint(axis=axis, value=float(value), delta_cer=diff, delta_cer_se=se, report=report)
        )
    return points


def frontier(report):
    """(strategy, gamma, std, mean, se) tuples of terminal return per strategy."""
    return [
        (r.strategy, r.gamma, r.std_return, r.mean_return, r.se_return)
        for r in report.results
    ]


def report_manifest(cfg, extra=None):
    """Manifest document recording the config hash and seed for reproducibility."""
    import hashlib

    payload = {
        "model": cfg.model.to_dict(),
        "p": cfg.p.tolist(),
        "tau": cfg.tau,
        "omega": None if cfg.omega is None else np.asarray(cfg.omega).tolist(),
        "y_mode": cfg.y_mode,
        "y_fixed": None if cfg.y_fixed is None else np.asarray(cfg.y_fixed).tolist(),
        "gammas": list(cfg.gammas),
        "horizon": cfg.horizon,
        "n_rebalance": cfg.n_rebalance,
        "steps_per_rebalance": cfg.steps_per_rebalance,
        "n_paths": cfg.n_paths,
        "z0": cfg.z0,
        "strategies": list(cfg.strategies),
        "riccati_steps": cfg.riccati_steps,
    }
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    doc = {"config_hash": digest, "seed": cfg.seed}
    if extra:
        doc.update(extra)
    return doc
