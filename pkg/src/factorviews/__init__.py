"""Dynamic factor models of asset prices with noisy forward-looking views.

A numpy/scipy library for portfolio choice when an investor holds noisy
views about future factor levels: conditional dynamics, pinned and noisy
mean-reverting bridges, optimal CRRA policies via backward Riccati systems,
Bayesian drift learning, a static mean-variance baseline, calibration from
monthly panels, and a Monte-Carlo experiment harness.
"""

from .blstatic import BLMoments, bl_moments, bl_policy
from .bridges import (
    AlignmentReport,
    Bridge1D,
    ExtensionVector,
    NoisyBridge1D,
    check_alignment,
    mmrb_moments,
    mmrb_target,
    mrb_moments,
    mrb_sde_coeffs,
    noisy_extension,
    precision_gain,
)
from .calibrate import (
    CalibrationError,
    MonthlyPanel,
    calibrate_model,
    fit_asset,
    fit_factor_ou,
    joint_diffusion,
    load_panel_csv,
)
from .control import (
    DecomposedPath,
    PolicyEvaluation,
    Preferences,
    RiccatiPath,
    WealthResult,
    policy,
    simulate_wealth,
    solve_decomposed,
    solve_full,
    solve_no_views,
    value_function,
    wealth_from_paths,
)
from .experiments import (
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    StrategyResult,
    SweepPoint,
    cer,
    cer_difference,
    frontier,
    run_experiment,
    run_sweep,
    turnover,
)
from .learning import (
    AugmentedDynamics,
    AugmentedPolicyEvaluation,
    DriftPrior,
    FilterPath,
    augmented_policy,
    filter_path,
    gamma_t,
    joint_shock_cov,
    kalman_gain,
    precision_split,
    schur_complement,
    solve_augmented,
)
from .market import (
    AssetDynamics,
    FactorDynamics,
    MarketModel,
    PathSet,
    cond_factor_cov,
    cond_factor_mean,
    long_run_cov,
    path_rng,
    simulate_joint,
)
from .numerics import (
    NotPositiveDefiniteError,
    NumericalError,
    TimeGrid,
    cholesky,
    mat_exp,
    solve_lyapunov,
)
from .presets import DEMO_P, demo_model, demo_views
from .views import (
    ConditionalCoeffs,
    ViewSpec,
    conditional_coeffs,
    conditional_moments,
    drift_adjustment,
    eta,
    omega_from_tau,
    simulate_conditional,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentReport",
    "AssetDynamics",
    "AugmentedDynamics",
    "AugmentedPolicyEvaluation",
    "BLMoments",
    "Bridge1D",
    "CalibrationError",
    "ConditionalCoeffs",
    "ConfigError",
    "DEMO_P",
    "DecomposedPath",
    "DriftPrior",
    "ExperimentConfig",
    "ExperimentReport",
    "ExtensionVector",
    "FactorDynamics",
    "FilterPath",
    "MarketModel",
    "MonthlyPanel",
    "NoisyBridge1D",
    "NotPositiveDefiniteError",
    "NumericalError",
    "PathSet",
    "PolicyEvaluation",
    "Preferences",
    "RiccatiPath",
    "StrategyResult",
    "SweepPoint",
    "TimeGrid",
    "ViewSpec",
    "WealthResult",
    "augmented_policy",
    "bl_moments",
    "bl_policy",
    "calibrate_model",
    "cer",
    "cer_difference",
    "check_alignment",
    "cholesky",
    "cond_factor_cov",
    "cond_factor_mean",
    "conditional_coeffs",
    "conditional_moments",
    "demo_model",
    "demo_views",
    "drift_adjustment",
    "eta",
    "filter_path",
    "fit_asset",
    "fit_factor_ou",
    "frontier",
    "gamma_t",
    "joint_diffusion",
    "joint_shock_cov",
    "kalman_gain",
    "precision_split",
    "schur_complement",
    "load_panel_csv",
    "long_run_cov",
    "mat_exp",
    "mmrb_moments",
    "mmrb_target",
    "mrb_moments",
    "mrb_sde_coeffs",
    "noisy_extension",
    "omega_from_tau",
    "path_rng",
    "policy",
    "precision_gain",
    "run_experiment",
    "run_sweep",
    "simulate_conditional",
    "simulate_joint",
    "simulate_wealth",
    "solve_augmented",
    "solve_decomposed",
    "solve_full",
    "solve_lyapunov",
    "solve_no_views",
    "turnover",
    "value_function",
    "wealth_from_paths",
]
