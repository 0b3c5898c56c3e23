"""Calibration of the factor/asset model from monthly panel data.

Per-factor AR(1) fits give the (diagonal) reversion rates and long-run means,
per-asset OLS of log-returns on the matched factor gives the (diagonal)
drift loadings with the Ito variance correction, and the joint sample
covariance of the fitted innovations — annualized by 1/dt — is
Cholesky-factored and split row-wise into the factor and asset diffusion
loadings (driver dimension N' = d + N).

Input panels are CSV with columns ``date, price_<ticker>..., yield_<ticker>...``,
ISO dates, and decimal yields; rows with any missing value are dropped (the
count is reported).
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .market import AssetDynamics, FactorDynamics, MarketModel
from .numerics import NotPositiveDefiniteError, cholesky


class CalibrationError(ValueError):
    """Raised when a fit violates the model's stationarity/rank requirements."""


@dataclass(frozen=True)
class MonthlyPanel:
    """Aligned monthly observations of asset prices and factor levels.

    Attributes
    ----------
    dates : ndarray
        Observation dates (informational).
    prices : ndarray, shape (T, N)
    factors : ndarray, shape (T, d)
    dt : float
        Years per observation (default 1/12).
    dropped_rows : int
        Rows removed because of missing values.
    asset_names, factor_names : list of str
    """

    dates: np.ndarray
    prices: np.ndarray
    factors: np.ndarray
    dt: float = 1.0 / 12.0
    dropped_rows: int = 0
    asset_names: tuple = ()
    factor_names: tuple = ()

    def __post_init__(self):
        prices = np.atleast_2d(np.asarray(self.prices, dtype=float))
        factors = np.atleast_2d(np.asarray(self.factors, dtype=float))
        if prices.shape[0] != factors.shape[0]:
            raise ValueError("prices and factors must have equal length")
        if np.any(prices <= 0.0):
            raise ValueError("prices must be positive")
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "factors", factors)


def load_panel_csv(path, dt=1.0 / 12.0):
    """Load a monthly panel from CSV (schema in the module docstring)."""
    frame = pd.read_csv(path, comment="#")
    if "date" not in frame.columns:
        raise CalibrationError("CSV must have a 'date' column")
    price_cols = [c for c in frame.columns if c.startswith("price_")]
    yield_cols = [c for c in frame.columns if c.startswith("yield_")]
    if not price_cols or not yield_cols:
        raise CalibrationError("CSV needs price_<ticker> and yield_<ticker> columns")
    before = len(frame)
    frame = frame.dropna(subset=price_cols + yield_cols)
    return MonthlyPanel(
        dates=pd.to_datetime(frame["date"], format="mixed").to_numpy(),
        prices=frame[price_cols].to_numpy(dtype=float),
        factors=frame[yield_cols].to_numpy(dtype=float),
        dt=dt,
        dropped_rows=before - len(frame),
        asset_names=tuple(c[len("price_") :] for c in price_cols),
        factor_names=tuple(c[len("yield_") :] for c in yield_cols),
    )


def _ols(y, regressors):
    """OLS coefficients and residuals for ``y = regressors @ coef + eps``."""
    coef, *_ = np.linalg.lstsq(regressors, y, rcond=None)
    return coef, y - regressors @ coef


def fit_factor_ou(series, dt):
    """Fit a scalar OU process to a factor level series via its AR(1) form.

    ``x_{t+1} = a + b x_t + eps`` maps to ``theta = -ln(b)/dt`` and
    ``mu = a / (1 - b)``; requires ``0 < b < 1``.

    Returns
    -------
    (theta, mu, residuals)
    """
    series = np.asarray(series, dtype=float)
    if series.shape[0] < 24:
        raise CalibrationError("factor series too short (need >= 24 observations)")
    if np.ptp(series) == 0.0:
        raise CalibrationError("constant factor series: AR(1) coefficient undefined")
    x_lag = series[:-1]
    x_next = series[1:]
    coef, resid = _ols(x_next, np.column_stack([np.ones_like(x_lag), x_lag]))
    a_hat, b_hat = coef
    if not 0.0 < b_hat < 1.0:
        raise CalibrationError(
            f"non-stationary AR(1) fit: autoregressive coefficient {b_hat:.6g} outside (0, 1)"
        )
    theta = -np.log(b_hat) / dt
    mu = a_hat / (1.0 - b_hat)
    return float(theta), float(mu), resid


def fit_asset(log_returns, factor_series, dt, sample_var_annualized):
    """Fit one asset's drift parameters by OLS on its matched factor.

    ``r_t = c + b x_{t-1} + eps`` maps to ``beta = b / dt`` and
    ``alpha = c / dt + 0.5 * sample_var_annualized`` (Ito correction).

    Returns
    -------
    (alpha, beta, residuals)
    """
    log_returns = np.asarray(log_returns, dtype=float)
    factor_series = np.asarray(factor_series, dtype=float)
    if log_returns.shape[0] < 24:
        raise CalibrationError("return series too short (need >= 24 observations)")
    if np.ptp(factor_series) == 0.0:
        raise CalibrationError("zero-variance regressor: factor collinear with intercept")
    coef, resid = _ols(log_returns, np.column_stack([np.ones_like(factor_series), factor_series]))
    c_hat, b_hat = coef
    beta = b_hat / dt
    alpha = c_hat / dt + 0.5 * sample_var_annualized
    return float(alpha), float(beta), resid


def joint_diffusion(panel):
    """Diffusion loadings from the annualized joint innovation covariance.

    Innovations are per-factor AR(1) residuals and per-asset OLS residuals
    (factors stacked first); their sample covariance, divided by dt, is
    Cholesky-factored and split into ``L_X`` (first d rows) and ``L_S``
    (last N rows) with driver dimension ``N' = d + N``.
    """
    d = panel.factors.shape[1]
    n = panel.prices.shape[1]
    resids = []
    for j in range(d):
        _, _, r = fit_factor_ou(panel.factors[:, j], panel.dt)
        resids.append(r)
    log_returns = np.diff(np.log(panel.prices), axis=0)
    for i in range(n):
        k = min(i, d - 1)  # assets matched to factors one-to-one where possible
        var_ann = np.var(log_returns[:, i], ddof=1) / panel.dt
        _, _, r = fit_asset(log_returns[:, i], panel.factors[:-1, k], panel.dt, var_ann)
        resids.append(r)
    joint = np.cov(np.column_stack(resids), rowvar=False, ddof=1) / panel.dt
    try:
        l_full = cholesky(joint)
    except NotPositiveDefiniteError as exc:
        raise CalibrationError(
            f"joint innovation covariance is not positive definite (pivot {exc.pivot})"
        ) from exc
    return l_full[:d], l_full[d:]


def calibrate_model(panel, r_f=0.02):
    """Full calibration: returns ``(MarketModel, report_text)``.

    The fitted model has diagonal reversion and drift-loading matrices; all
    cross-sectional dependence lives in the joint Cholesky of the
    innovations.
    """
    d = panel.factors.shape[1]
    n = panel.prices.shape[1]
    if n != d:
        raise CalibrationError(
            "the diagonal specification pairs each asset with one factor; need d == N"
        )
    log_returns = np.diff(np.log(panel.prices), axis=0)

    thetas = np.zeros(d)
    mus = np.zeros(d)
    lines = ["calibration report", "==================", f"observations: {panel.factors.shape[0]}"]
    if panel.dropped_rows:
        lines.append(f"rows dropped for missing values: {panel.dropped_rows}")
    for j in range(d):
        thetas[j], mus[j], _ = fit_factor_ou(panel.factors[:, j], panel.dt)
        name = panel.factor_names[j] if panel.factor_names else str(j)
        lines.append(f"factor {name}: theta={thetas[j]:.4f}, mu={mus[j]:.4f}")

    alphas = np.zeros(n)
    betas = np.zeros(n)
    for i in range(n):
        var_ann = np.var(log_returns[:, i], ddof=1) / panel.dt
        alphas[i], betas[i], _ = fit_asset(
            log_returns[:, i], panel.factors[:-1, i], panel.dt, var_ann
        )
        name = panel.asset_names[i] if panel.asset_names else str(i)
        lines.append(f"asset {name}: alpha={alphas[i]:.4f}, beta={betas[i]:.4f}")

    l_x, l_s = joint_diffusion(panel)
    lines.append(f"driver dimension: {d + n}")

    model = MarketModel(
        factors=FactorDynamics(theta=np.diag(thetas), mu=mus, l_x=l_x),
        assets=AssetDynamics(alpha=alphas, beta=np.diag(betas), l_s=l_s, r_f=r_f),
    )
    return model, "\n".join(lines)
