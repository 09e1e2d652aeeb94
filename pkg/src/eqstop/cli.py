"""Batch front-end: solve the named problems, verify strategies, emit data.

Subcommands: solve-variance, solve-meanvariance, verify, figure,
limits-check, simulate.  Exit codes: 0 pass/success, 1 verification fail,
2 input or parameter error, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np
from jsonschema import Draft202012Validator

from . import solvers
from .diffusion import DiffusionModel, PathConfig, sample_symmetric_exit_batch
from .equilibrium import mc_value_functions, run_full_report
from .errors import ConfigError, EqStopError, ParameterConditionError
from .payoff import (
    estimate_values,
    make_mean_variance_problem,
    make_two_equilibria_problem,
    make_variance_problem,
)
from .strategy import ContinuationSet, MixedStrategy

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_INPUT = 2
EXIT_INCONCLUSIVE = 3

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema", "model", "problem", "strategy"],
    "properties": {
        "schema": {"const": 1},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gbm", "wiener"]},
                "mu": {"type": "number"},
                "sigma2": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {
                "name": {"enum": ["variance", "mean-variance", "two-equilibria"]},
                "gamma": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "strategy": {
            "type": "object",
            "additionalProperties": False,
            "required": ["intensity", "continuation"],
            "properties": {
                "intensity": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["zero", "constant"]},
                        "value": {"type": "number", "minimum": 0},
                    },
                },
                "continuation": {
                    "oneOf": [
                        {"const": "all"},
                        {
                            "type": "array",
                            "items": {
                                "type": "array",
                                "items": {"type": "number"},
                                "minItems": 2,
                                "maxItems": 2,
                            },
                        },
                    ]
                },
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lo": {"type": "number"},
                "hi": {"type": "number"},
                "points": {"type": "integer", "minimum": 2},
            },
        },
        "mode": {"enum": ["closed-form", "mc"]},
        "x": {"type": "number"},
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": {"type": "integer", "minimum": 2},
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
}


def load_config(path: str) -> dict:
    with open(path) as fh:
        cfg = json.load(fh)
    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg), key=str)
    if errors:
        raise ConfigError("; ".join(e.message for e in errors))
    if cfg["model"]["kind"] == "gbm" and ("mu" not in cfg["model"] or "sigma2" not in cfg["model"]):
        raise ConfigError("gbm model requires mu and sigma2")
    if cfg["problem"]["name"] == "mean-variance" and "gamma" not in cfg["problem"]:
        raise ConfigError("mean-variance problem requires gamma")
    return cfg


def _build(cfg: dict):
    mdl = cfg["model"]
    model = (
        DiffusionModel.gbm(mdl["mu"], mdl["sigma2"]) if mdl["kind"] == "gbm" else DiffusionModel.wiener()
    )
    prob_cfg = cfg["problem"]
    if prob_cfg["name"] == "variance":
        problem = make_variance_problem()
    elif prob_cfg["name"] == "mean-variance":
        problem = make_mean_variance_problem(prob_cfg["gamma"])
    else:
        problem = make_two_equilibria_problem()
    cont = cfg["strategy"]["continuation"]
    c = ContinuationSet.whole(model.state_interval) if cont == "all" else ContinuationSet(cont)
    intensity = cfg["strategy"]["intensity"]
    if intensity["kind"] == "zero":
        strategy = MixedStrategy.pure(c)
    else:
        strategy = MixedStrategy.constant(intensity.get("value", 0.0), c)
    return model, problem, strategy


def _closed_form_vf(cfg: dict, model, problem, strategy):
    """Closed-form value functions for the recognized strategy shapes, else None."""
    name = cfg["problem"]["name"]
    gamma = cfg["problem"].get("gamma", 1.0)
    ivs = strategy.continuation.intervals
    lam = strategy.intensity_const
    if not ivs:
        return None  # immediate stop everywhere: no value functions needed
    if len(ivs) != 1:
        return None
    lo, hi = ivs[0]
    if cfg["model"]["kind"] == "gbm":
        whole = lo == 0.0 and math.isinf(hi)
        if whole and lam is not None and lam > 0.0 and name in ("variance", "mean-variance"):
            return solvers.gbm_constant_intensity_value_functions(
                name, model.param_mu, model.param_sigma2, lam, gamma
            )
        if lam == 0.0 and math.isfinite(hi):
            return solvers.gbm_window_value_functions(
                problem, model.param_mu, model.param_sigma2, lo, hi
            )
        return None
    if lam == 0.0 and math.isfinite(lo) and math.isfinite(hi):
        return solvers.wiener_window_value_functions(problem, lo, hi)
    return None


def _default_grid(cfg: dict, model, strategy):
    g = cfg.get("grid", {})
    if "lo" in g and "hi" in g:
        lo, hi = g["lo"], g["hi"]
    else:
        ivs = strategy.continuation.intervals
        if ivs and math.isfinite(ivs[-1][1]):
            hi = 1.25 * ivs[-1][1]
            lo = max(0.5 * ivs[0][0], 0.05 * hi) if model.state_interval[0] == 0.0 else -hi
        elif model.state_interval[0] == 0.0:
            lo, hi = 0.1, 10.0
        else:
            lo, hi = -2.0, 2.0
    return np.linspace(lo, hi, int(g.get("points", 100)))


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def cmd_solve_variance(args) -> int:
    try:
        sol = solvers.solve_variance_gbm(args.mu, args.sigma2)
    except ParameterConditionError as exc:
        print(f"error: {exc} (need 2*mu+sigma2<0)", file=sys.stderr)
        return EXIT_INPUT
    print(f"lambda = {sol.lambda_:.12f}")
    print(f"value coefficient (J(x)/x^2) = {sol.j_coefficient:.12f}")
    print(f"psi slope = {sol.psi_slope:.12f}")
    if args.out:
        xs = np.linspace(args.grid_lo, args.grid_hi, args.grid_points)
        _write_csv(args.out, ["x", "J"], [(x, sol.j_coefficient * x * x) for x in xs])
        print(f"wrote {args.out}")
    return EXIT_PASS


def cmd_solve_meanvariance(args) -> int:
    try:
        sol = solvers.solve_mean_variance_gbm(args.mu, args.sigma2, args.gamma)
    except ParameterConditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(f"regime = {sol.regime.value}")
    print(f"xi = {sol.xi:.12f}")
    if sol.regime is solvers.MeanVarianceRegime.THRESHOLD:
        print(f"b = {sol.b:.12f}")
        if args.out:
            xs = np.linspace(0.0, 1.25 * sol.b, args.grid_points)[1:]
            _write_csv(args.out, ["x", "J"], [(x, sol.value(x)) for x in xs])
            print(f"wrote {args.out}")
    return EXIT_PASS


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    model, problem, strategy = _build(cfg)
    grid = _default_grid(cfg, model, strategy)
    mode = cfg.get("mode", "closed-form")
    if mode == "closed-form":
        vf = _closed_form_vf(cfg, model, problem, strategy)
        if vf is None and (
            strategy.continuation.intervals or strategy.continuation.boundary(model.state_interval)
        ):
            if strategy.continuation.intervals:
                print("error: no closed form known for this strategy; use mode=mc", file=sys.stderr)
                return EXIT_INPUT
    else:
        mc = cfg.get("mc", {})
        pc = PathConfig(
            seed=args.seed, dt=mc.get("dt", args.dt), horizon=mc.get("horizon", args.horizon)
        )
        pts = [x for x in grid if strategy.continuation.contains(x)]
        vf = mc_value_functions(
            problem, model, strategy, pts, pc, n_paths=mc.get("paths", args.paths),
            threads=args.threads,
        ) if pts else None

    report = run_full_report(problem, model, strategy, vf, grid)
    payload = {
        "config": cfg,
        **report.to_dict(),
        "runtime_seconds": time.perf_counter() - t0,
        "seed": args.seed,
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
    for name, verdict in report.verdicts.items():
        worst = ""
        if verdict.points:
            bad = [p for p in verdict.points if not p.passed]
            shown = bad[0] if bad else max(verdict.points, key=lambda p: abs(p.residual))
            worst = f" (points={len(verdict.points)}, residual {shown.residual:.3g} at x={shown.x:.6g})"
        print(f"condition {name}: {verdict.overall}{worst}")
    print(f"summary: {report.overall}")
    if report.overall == "pass":
        return EXIT_PASS
    return EXIT_INCONCLUSIVE if report.overall == "inconclusive" else EXIT_FAIL


def cmd_figure(args) -> int:
    if args.name == "fig1":
        sol = solvers.solve_variance_gbm(-0.1, 0.15)
        xs = np.linspace(0.0, 10.0, args.points)
        _write_csv(args.out, ["x", "J"], [(x, sol.j_coefficient * x * x) for x in xs])
    else:
        sol = solvers.solve_mean_variance_gbm(0.07, 0.45, 1.1)
        xs = np.linspace(0.0, 0.5, args.points)[1:]
        _write_csv(args.out, ["x", "J", "diag"], [(x, sol.value(x), x) for x in xs])
    print(f"wrote {args.out}")
    return EXIT_PASS


def cmd_limits_check(args) -> int:
    if args.model == "gbm":
        model = DiffusionModel.gbm(args.mu, args.sigma2)
    else:
        model = DiffusionModel.wiener()
    sig2x = float(model.vol2(args.x))
    print("h, h^2/E[tau_h], E[tau_h^2]/E[tau_h], sigma^2(x)")
    rows = []
    for h in args.h:
        # Resolve the exit time scale: ~1e-3 of E[tau_h] per step.
        dt = max(args.dt_scale * h * h / sig2x, 1e-12)
        pc = PathConfig(seed=args.seed, dt=dt, horizon=args.horizon)
        _, tau = sample_symmetric_exit_batch(model, args.x, h, pc, args.paths, threads=args.threads)
        m1 = float(np.mean(tau))
        m2 = float(np.mean(tau**2))
        rows.append((h, h * h / m1, m2 / m1, sig2x))
        print(f"{h:g}, {h * h / m1:.6g}, {m2 / m1:.6g}, {sig2x:.6g}")
    if args.out:
        _write_csv(args.out, ["h", "h2_over_mean_tau", "mean_tau2_over_mean_tau", "sigma2_x"], rows)
    return EXIT_PASS


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    model, problem, strategy = _build(cfg)
    x = args.x if args.x is not None else cfg.get("x")
    if x is None:
        print("error: provide --x or an x entry in the config", file=sys.stderr)
        return EXIT_INPUT
    mc = cfg.get("mc", {})
    pc = PathConfig(seed=args.seed, dt=mc.get("dt", args.dt), horizon=mc.get("horizon", args.horizon))
    vt = estimate_values(
        problem, model, strategy, x, pc, n_paths=mc.get("paths", args.paths), threads=args.threads
    )
    payload = {
        "x": x,
        "phi": {"estimate": vt.phi.estimate, "std_error": vt.phi.std_error},
        "psi": {"estimate": vt.psi.estimate, "std_error": vt.psi.std_error},
        "j": vt.j,
        "j_std_error": vt.j_std_error,
        "n_paths": vt.phi.n_paths,
        "censored_fraction": vt.phi.censored_fraction,
        "seed": args.seed,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_PASS


def _write_csv(path: str, header, rows) -> None:
    # Full double precision so the figure data round-trips exactly.
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eqstop", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=20240801)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--paths", type=int, default=100_000)
    common.add_argument("--dt", type=float, default=1e-3)
    common.add_argument("--horizon", type=float, default=200.0)
    common.add_argument("--out", type=str, default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-variance", parents=[common], help="variance equilibrium for GBM")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--grid-lo", type=float, default=0.0)
    p.add_argument("--grid-hi", type=float, default=10.0)
    p.add_argument("--grid-points", type=int, default=101)
    p.set_defaults(func=cmd_solve_variance)

    p = sub.add_parser("solve-meanvariance", parents=[common], help="mean-variance regime for GBM")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--grid-points", type=int, default=101)
    p.set_defaults(func=cmd_solve_meanvariance)

    p = sub.add_parser("verify", parents=[common], help="check the equilibrium system for a strategy")
    p.add_argument("--config", type=str, required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("figure", parents=[common], help="emit figure data as CSV")
    p.add_argument("--name", choices=["fig1", "fig2"], required=True)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("limits-check", parents=[common], help="exit-time scaling table over an h ladder")
    p.add_argument("--model", choices=["gbm", "wiener"], default="wiener")
    p.add_argument("--mu", type=float, default=-0.1)
    p.add_argument("--sigma2", type=float, default=0.15)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--h", type=float, action="append", required=True)
    p.add_argument("--dt-scale", type=float, default=1e-3,
                   help="step as a fraction of the expected exit time")
    p.set_defaults(func=cmd_limits_check)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo phi/psi/J for a config")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--x", type=float, default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EqStopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
