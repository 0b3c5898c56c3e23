"""Command-line entry points for the factorviews toolkit.

Subcommands
-----------
calibrate    fit a model from a monthly CSV panel
simulate     simulate factor/price paths (conditional when views are given)
frontier     mean/std of terminal returns per strategy across gammas
cer          certainty-equivalent returns per strategy
turnover     expected total share turnover per strategy
sweep        ΔCER across a tau or rho grid (--axis tau|rho)
bridge-demo  pinned-bridge coefficients and moments table
filter-demo  drift-filter error statistics on simulated paths

Exit codes: 0 on success, 2 for configuration errors, 3 for numerical
failures.  Outputs are CSV files with a ``#`` schema comment plus a
``manifest.json`` recording the config hash and seed.
"""

import argparse
import csv
import json
import os
import sys

import numpy as np

from .bridges import Bridge1D, mrb_moments, mrb_sde_coeffs
from .calibrate import CalibrationError, calibrate_model, load_panel_csv
from .experiments import (
    ConfigError,
    ExperimentConfig,
    frontier,
    report_manifest,
    run_experiment,
    run_sweep,
)
from .learning import DriftPrior, filter_path, gamma_t
from .market import simulate_joint
from .numerics import NumericalError, TimeGrid
from .presets import demo_model, demo_views
from .views import simulate_conditional

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _write_csv(path, header_comment, columns, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _write_manifest(out_dir, cfg, extra=None):
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(report_manifest(cfg, extra), fh, indent=2)


def _load_config(args):
    if args.config is None:
        cfg = ExperimentConfig(model=demo_model(), p=demo_views(demo_model()).p)
    else:
        with open(args.config) as fh:
            doc = json.load(fh)
        cfg = ExperimentConfig.from_dict(doc, base_dir=os.path.dirname(args.config) or ".")
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.paths is not None:
        updates["n_paths"] = args.paths
    if updates:
        from dataclasses import replace

        cfg = replace(cfg, **updates)
    return cfg.validate()


def _add_common(parser):
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--paths", type=int, default=None, help="number of Monte-Carlo paths")
    parser.add_argument("--out-dir", default=".", help="output directory")


def _cmd_calibrate(args):
    panel = load_panel_csv(args.panel)
    model, report = calibrate_model(panel)
    os.makedirs(args.out_dir, exist_ok=True)
    out = os.path.join(args.out_dir, args.output)
    model.save(out)
    print(report)
    print(f"model written to {out}")
    return EXIT_OK


def _cmd_simulate(args):
    cfg = _load_config(args)
    grid = TimeGrid(0.0, cfg.horizon, cfg.n_rebalance * cfg.steps_per_rebalance)
    m = cfg.model
    x0 = cfg.x0 if cfg.x0 is not None else m.factors.mu
    s0 = np.ones(m.n_assets)
    if args.conditional:
        from .views import ViewSpec

        y = cfg.y_fixed if cfg.y_fixed is not None else cfg.p @ m.factors.mu
        v = ViewSpec(p=cfg.p, omega=cfg.resolve_omega(), y=y, horizon=cfg.horizon)
        paths = simulate_conditional(m, v, x0, s0, grid, cfg.n_paths, cfg.seed)
    else:
        paths = simulate_joint(m, x0, s0, grid, cfg.n_paths, cfg.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for i in range(min(cfg.n_paths, args.max_paths_out)):
        for k, t in enumerate(grid.nodes):
            rows.append(
                [i, f"{t:.6f}"]
                + [f"{x:.8g}" for x in paths.factors[i, k]]
                + [f"{s:.8g}" for s in paths.prices[i, k]]
            )
    cols = (
        ["path", "t"]
        + [f"factor_{j}" for j in range(m.d)]
        + [f"price_{j}" for j in range(m.n_assets)]
    )
    _write_csv(
        os.path.join(args.out_dir, "paths.csv"),
        "simulated paths: path index, time, factor levels, asset prices",
        cols,
        rows,
    )
    _write_manifest(args.out_dir, cfg, {"command": "simulate", "conditional": args.conditional})
    print(f"wrote {os.path.join(args.out_dir, 'paths.csv')}")
    return EXIT_OK


def _run_and_write(args, command):
    cfg = _load_config(args)
    report = run_experiment(cfg)
    os.makedirs(args.out_dir, exist_ok=True)
    if command == "frontier":
        rows = [
            [s, g, f"{std:.6g}", f"{mean:.6g}", f"{se:.6g}"]
            for s, g, std, mean, se in frontier(report)
        ]
        cols = ["strategy", "gamma", "std_return", "mean_return", "se_return"]
        comment = "terminal-return frontier: std and mean of Z_T/z0 - 1 per strategy"
        name = "frontier.csv"
    elif command == "cer":
        rows = [
            [r.strategy, r.gamma, f"{r.cer_value:.6g}", f"{r.cer_se:.6g}", r.excluded]
            for r in report.results
        ]
        cols = ["strategy", "gamma", "cer", "cer_se", "excluded_paths"]
        comment = "certainty-equivalent returns with Monte-Carlo standard errors"
        name = "cer.csv"
    else:
        rows = [
            [r.strategy, r.gamma, f"{r.turnover_value:.6g}", f"{r.turnover_se:.6g}"]
            for r in report.results
        ]
        cols = ["strategy", "gamma", "turnover", "turnover_se"]
        comment = "expected total absolute share turnover per strategy"
        name = "turnover.csv"
    _write_csv(os.path.join(args.out_dir, name), comment, cols, rows)
    _write_manifest(args.out_dir, cfg, {"command": command})
    print(f"wrote {os.path.join(args.out_dir, name)}")
    return EXIT_OK


def _cmd_sweep(args):
    cfg = _load_config(args)
    values = [float(v) for v in args.values.split(",")] if args.values else None
    if values is None:
        values = [0.05, 0.2, 1.0, 5.0] if args.axis == "tau" else [0.0, 0.5, 1.0]
    points = run_sweep(cfg, args.axis, values)
    os.makedirs(args.out_dir, exist_ok=True)
    rows = [
        [p.axis, f"{p.value:.6g}", f"{p.delta_cer:.6g}", f"{p.delta_cer_se:.6g}"]
        for p in points
    ]
    _write_csv(
        os.path.join(args.out_dir, "sweep.csv"),
        "paired CER difference (views minus no-views) across the swept parameter",
        ["axis", "value", "delta_cer", "delta_cer_se"],
        rows,
    )
    _write_manifest(args.out_dir, cfg, {"command": "sweep", "axis": args.axis, "values": values})
    print(f"wrote {os.path.join(args.out_dir, 'sweep.csv')}")
    return EXIT_OK


def _cmd_bridge_demo(args):
    b = Bridge1D(a=args.a, y_target=args.y, theta=args.theta, t_hit=args.horizon)
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for t in np.linspace(0.0, args.horizon, 41)[:-1]:
        th, mu = mrb_sde_coeffs(b, t)
        mean, var = mrb_moments(b, t, t)
        rows.append([f"{t:.4f}", f"{th:.6g}", f"{mu:.6g}", f"{mean:.6g}", f"{var:.6g}"])
    _write_csv(
        os.path.join(args.out_dir, "bridge.csv"),
        "pinned mean-reverting bridge: effective reversion/target and marginal moments",
        ["t", "theta_eff", "mu_eff", "mean", "var"],
        rows,
    )
    print(f"wrote {os.path.join(args.out_dir, 'bridge.csv')}")
    return EXIT_OK


def _cmd_filter_demo(args):
    cfg = _load_config(args)
    m = cfg.model
    prior = DriftPrior(alpha0=m.assets.alpha, gamma0=np.eye(m.n_assets) * args.prior_var)
    grid = TimeGrid(0.0, args.years, int(args.years * 240))
    paths = simulate_joint(m, m.factors.mu, np.ones(m.n_assets), grid, cfg.n_paths, cfg.seed)
    fp = filter_path(prior, m, None, paths)
    errors = fp.alpha_hat - m.assets.alpha
    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for k in range(0, grid.n_steps + 1, max(1, grid.n_steps // 40)):
        t = fp.times[k]
        rmse = np.sqrt(np.mean(errors[:, k] ** 2))
        pred = np.sqrt(np.mean(np.diag(gamma_t(prior, m, t))))
        rows.append([f"{t:.4f}", f"{rmse:.6g}", f"{pred:.6g}"])
    _write_csv(
        os.path.join(args.out_dir, "filter.csv"),
        "drift-filter accuracy: sample RMSE vs predicted posterior std",
        ["t", "rmse", "posterior_std"],
        rows,
    )
    _write_manifest(args.out_dir, cfg, {"command": "filter-demo"})
    print(f"wrote {os.path.join(args.out_dir, 'filter.csv')}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="factorviews",
        description="dynamic portfolio choice with noisy forward-looking views",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="fit a model from a monthly CSV panel")
    p.add_argument("panel", help="CSV with date, price_<t>..., yield_<t>... columns")
    p.add_argument("-o", "--output", default="model.json")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("simulate", help="simulate factor/price paths")
    _add_common(p)
    p.add_argument("--conditional", action="store_true", help="condition paths on the views")
    p.add_argument("--max-paths-out", type=int, default=32, help="paths written to CSV")
    p.set_defaults(func=_cmd_simulate)

    for name in ("frontier", "cer", "turnover"):
        p = sub.add_parser(name, help=f"compute the {name} table")
        _add_common(p)
        p.set_defaults(func=lambda a, _n=name: _run_and_write(a, _n))

    p = sub.add_parser("sweep", help="ΔCER across a parameter grid")
    _add_common(p)
    p.add_argument("--axis", choices=("tau", "rho"), required=True)
    p.add_argument("--values", help="comma-separated grid (defaults per axis)")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("bridge-demo", help="pinned-bridge coefficient table")
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=1.0)
    p.add_argument("--y", type=float, default=1.0)
    p.add_argument("--a", type=float, default=0.0)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=_cmd_bridge_demo)

    p = sub.add_parser("filter-demo", help="drift-filter accuracy table")
    _add_common(p)
    p.add_argument("--years", type=float, default=5.0)
    p.add_argument("--prior-var", type=float, default=0.01)
    p.set_defaults(func=_cmd_filter_demo)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CalibrationError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
