"""Batch experiment runner.

Single entry point with one subcommand per experiment:

    bifurcation   branch table mu -> L with residuals
    homogeneous   the scalar flux ODE trajectory
    dispersion    (z, k) sweep of Re h and sigma_min(Id - mu A)
    bounds        sampled verification of the coefficient bounds
    simulate      full PDE run with diagnostics and snapshots
    linear-decay  linearized run, fitted rate vs predicted rate
    entropy       regularized blob run with the entropy certificate

Configuration precedence: built-in defaults < --config JSON file < --set
KEY=VAL overrides (dotted keys reach nested blocks, values parsed as JSON
with a plain-string fallback).  Unknown keys are rejected and every
parameter is validated before any computation starts.  Each run writes its
artifacts plus a manifest.json (resolved config, version, wall time, output
list, summary scalars) into --output-dir; the manifest is written last and
atomically, so its presence marks a completed run.

Exit codes: 0 success, 1 numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .equilibria import (
    asymptotic_L,
    equilibrium_branch,
    homogeneous_flow,
    project_to_manifold,
    solve_L,
)
from .linstab import (
    axis_coefficients,
    bound_budget,
    c0_bound,
    c1_bound,
    c2_bound,
    default_eps,
    default_z_grid,
    dispersion_sweep,
    spectral_abscissa,
)
from .solver import (
    InitSpec,
    SolverAbort,
    SolverConfig,
    fit_decay_rate,
    fit_entropy_growth,
    run,
    write_diagnostics_csv,
    write_snapshot,
)

EXPERIMENTS = ("bifurcation", "homogeneous", "dispersion", "bounds",
               "simulate", "linear-decay", "entropy")


class ConfigError(Exception):
    """Invalid experiment configuration; the message names the offender."""


_INIT_DEFAULTS = {"recipe": "random-smooth", "amplitude": 0.01,
                  "mode_k": [1, 0], "width": 0.7}

DEFAULTS: dict[str, dict] = {
    "bifurcation": {
        "d": 2, "mu_min": 2.0, "mu_max": 4.0, "num": 101, "tol": 1e-12,
    },
    "homogeneous": {
        "d": 2, "mu": 2.5, "L0": 0.01, "t_end": 40.0, "dt": 0.01,
    },
    "dispersion": {
        "d": 2, "mu": 1.0, "gamma": 10.0, "delta": 0.05, "k_max": None,
        "re_max": 2.0, "im_max": 50.0, "z_step": 0.25,
    },
    "bounds": {
        "d": 2, "gamma": 10.0, "eps": None, "num_samples": 1000, "seed": 0,
        "re_max": 2.0, "im_max": 50.0, "kmag_max": 50.0,
    },
    "simulate": {
        "mu": 2.2, "mode": "nonlinear", "gamma": 10.0, "nx": 32, "ntheta": 64,
        "dt": 0.01, "t_end": 40.0, "eps_reg": None, "jeq_angle": 0.0,
        "snapshot_every": 50, "seed": 0, "keep_snapshots": False,
        "dealias": True, "fit_t_min": 5.0, "fit_t_max": None,
        "init": dict(_INIT_DEFAULTS),
    },
    "linear-decay": {
        "mu": 1.5, "gamma": 10.0, "nx": 32, "ntheta": 64, "dt": 0.01,
        "t_end": 30.0, "amplitude": 1.0, "seed": 11, "snapshot_every": 25,
        "fit_t_min": 10.0, "fit_t_max": None, "k_max": None, "delta": 0.05,
    },
    "entropy": {
        "mu": 3.0, "gamma": 10.0, "nx": 32, "ntheta": 128, "dt": 0.01,
        "t_end": 20.0, "eps_reg": 0.1, "width": 0.55, "snapshot_every": 20,
        "seed": 0,
    },
}


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _apply_override(config: dict, key: str, value) -> None:
    parts = key.split(".")
    node = config
    for p in parts[:-1]:
        if p not in node or not isinstance(node[p], dict):
            raise ConfigError(f"unknown config key: {key}")
        node = node[p]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key: {key}")
    node[parts[-1]] = value


def resolve_config(experiment: str, config_path: str | None,
                   overrides: list[str]) -> dict:
    """defaults < config file < --set overrides, with unknown keys rejected."""
    config = copy.deepcopy(DEFAULTS[experiment])
    if config_path is not None:
        try:
            with open(config_path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        declared = loaded.pop("experiment", experiment)
        if declared != experiment:
            raise ConfigError(
                f"config file is for experiment {declared!r}, not {experiment!r}")
        loaded.pop("output_dir", None)  # taken from the command line
        for key, value in loaded.items():
            if isinstance(value, dict):
                for sub, sval in value.items():
                    _apply_override(config, f"{key}.{sub}", sval)
            else:
                _apply_override(config, key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set needs KEY=VAL, got {item!r}")
        key, _, text = item.partition("=")
        _apply_override(config, key.strip(), _parse_value(text))
    validate_config(experiment, config)
    return config


def _need(cond: bool, key: str, what: str) -> None:
    if not cond:
        raise ConfigError(f"invalid value for {key}: {what}")


def _check_solver_common(c: dict) -> None:
    _need(isinstance(c["mu"], (int, float)) and c["mu"] > 0, "mu", "must be > 0")
    _need(c["gamma"] > 0, "gamma", "must be > 0")
    _need(isinstance(c["nx"], int) and c["nx"] >= 4 and c["nx"] % 2 == 0,
          "nx", "must be an even integer >= 4")
    _need(isinstance(c["ntheta"], int) and c["ntheta"] >= 8 and c["ntheta"] % 2 == 0,
          "ntheta", "must be an even integer >= 8")
    _need(c["dt"] > 0, "dt", "must be > 0")
    _need(c["t_end"] > 0, "t_end", "must be > 0")
    _need(isinstance(c["snapshot_every"], int) and c["snapshot_every"] >= 1,
          "snapshot_every", "must be a positive integer")
    _need(isinstance(c["seed"], int), "seed", "must be an integer")


def validate_config(experiment: str, c: dict) -> None:
    if experiment == "bifurcation":
        _need(c["d"] in (2, 3), "d", "must be 2 or 3")
        _need(c["mu_min"] > 0, "mu_min", "must be > 0")
        _need(c["mu_max"] >= c["mu_min"], "mu_max", "must be >= mu_min")
        _need(isinstance(c["num"], int) and c["num"] >= 1, "num",
              "must be a positive integer")
        _need(c["tol"] > 0, "tol", "must be > 0")
    elif experiment == "homogeneous":
        _need(c["d"] in (2, 3), "d", "must be 2 or 3")
        _need(c["mu"] > 0, "mu", "must be > 0")
        _need(c["L0"] >= 0, "L0", "must be >= 0")
        _need(c["t_end"] > 0, "t_end", "must be > 0")
        _need(c["dt"] > 0, "dt", "must be > 0")
    elif experiment == "dispersion":
        _need(c["d"] == 2, "d", "only d = 2 sweeps are wired to the CLI")
        _need(c["mu"] > 0, "mu", "must be > 0")
        _need(c["gamma"] > 0, "gamma", "must be > 0")
        _need(0 < c["delta"] < 1, "delta", "must be in (0, 1)")
        _need(c["k_max"] is None or c["k_max"] > 0, "k_max",
              "must be null or > 0")
        _need(c["re_max"] > 0, "re_max", "must be > 0")
        _need(c["im_max"] > 0, "im_max", "must be > 0")
        _need(c["z_step"] > 0, "z_step", "must be > 0")
    elif experiment == "bounds":
        _need(c["d"] in (2, 3), "d", "must be 2 or 3")
        _need(c["gamma"] > 0, "gamma", "must be > 0")
        _need(c["eps"] is None or 0 < c["eps"] < 1, "eps",
              "must be null or in (0, 1)")
        _need(isinstance(c["num_samples"], int) and c["num_samples"] >= 1,
              "num_samples", "must be a positive integer")
        _need(isinstance(c["seed"], int), "seed", "must be an integer")
        _need(c["re_max"] >= 0, "re_max", "must be >= 0")
        _need(c["im_max"] > 0, "im_max", "must be > 0")
        _need(c["kmag_max"] >= c["gamma"], "kmag_max", "must be >= gamma")
    elif experiment == "simulate":
        _check_solver_common(c)
        _need(c["mode"] in ("nonlinear", "linearized", "regularized"),
              "mode", "must be nonlinear, linearized or regularized")
        if c["mode"] == "regularized":
            _need(c["eps_reg"] is not None and c["eps_reg"] > 0,
                  "eps_reg", "must be > 0 in regularized mode")
        init = c["init"]
        _need(init["recipe"] in ("mode-bump", "random-smooth", "large-blob"),
              "init.recipe", "must be mode-bump, random-smooth or large-blob")
        _need(init["amplitude"] >= 0, "init.amplitude", "must be >= 0")
        _need(isinstance(init["mode_k"], (list, tuple)) and len(init["mode_k"]) == 2
              and all(isinstance(v, int) for v in init["mode_k"]),
              "init.mode_k", "must be a pair of integers")
        _need(init["width"] > 0, "init.width", "must be > 0")
        _need(c["fit_t_min"] >= 0, "fit_t_min", "must be >= 0")
        _need(c["fit_t_max"] is None or c["fit_t_max"] > c["fit_t_min"],
              "fit_t_max", "must be null or > fit_t_min")
    elif experiment == "linear-decay":
        _check_solver_common(c)
        _need(c["amplitude"] > 0, "amplitude", "must be > 0")
        _need(c["fit_t_min"] >= 0, "fit_t_min", "must be >= 0")
        _need(c["fit_t_max"] is None or c["fit_t_max"] > c["fit_t_min"],
              "fit_t_max", "must be null or > fit_t_min")
        _need(c["k_max"] is None or c["k_max"] > 0, "k_max",
              "must be null or > 0")
        _need(0 < c["delta"] < 1, "delta", "must be in (0, 1)")
    elif experiment == "entropy":
        _check_solver_common(c)
        _need(c["eps_reg"] > 0, "eps_reg", "must be > 0")
        _need(c["width"] > 0, "width", "must be > 0")
    else:  # pragma: no cover - guarded by argparse choices
        raise ConfigError(f"unknown experiment {experiment!r}")


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_csv(path: str, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_manifest(outdir: str, experiment: str, config: dict,
                    outputs: list[str], summary: dict, t0: float) -> str:
    manifest = {
        "experiment": experiment,
        "version": __version__,
        "config": config,
        "wall_time_seconds": time.monotonic() - t0,
        "outputs": outputs,
        "summary": summary,
    }
    path = os.path.join(outdir, "manifest.json")
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return path


# ---------------------------------------------------------------------------
# experiment runners: each returns (outputs, summary)
# ---------------------------------------------------------------------------

def _run_bifurcation(c: dict, outdir: str):
    d = c["d"]
    mus = np.linspace(c["mu_min"], c["mu_max"], c["num"])
    branch = equilibrium_branch(mus, d, tol=c["tol"])
    rows = [(mu, L, asymptotic_L(float(mu), d), res)
            for mu, L, res in zip(branch.mu, branch.L, branch.residual)]
    path = os.path.join(outdir, "branch.csv")
    _write_csv(path, "mu,L_solved,L_asymptotic,residual", rows)
    ordered = branch.L[branch.mu > d]
    summary = {
        "num_rows": len(rows),
        "max_residual": float(branch.residual.max()) if len(rows) else 0.0,
        "monotone_above_threshold": bool(np.all(np.diff(ordered) > 0))
        if ordered.size > 1 else True,
    }
    return [path], summary


def _run_homogeneous(c: dict, outdir: str):
    J0 = np.zeros(c["d"])
    J0[0] = c["L0"]
    traj = homogeneous_flow(c["mu"], J0, t_end=c["t_end"], dt=c["dt"])
    path = os.path.join(outdir, "homogeneous.csv")
    _write_csv(path, "t,L", zip(traj.t, traj.L))
    L_limit = solve_L(c["mu"], c["d"]) if c["mu"] > c["d"] else 0.0
    summary = {
        "L_end": float(traj.L[-1]),
        "L_limit": L_limit,
        "gap": abs(float(traj.L[-1]) - L_limit),
    }
    return [path], summary


def _run_dispersion(c: dict, outdir: str):
    z_values = default_z_grid(delta=c["delta"], re_max=c["re_max"],
                              im_max=c["im_max"], step=c["z_step"])
    sweep = dispersion_sweep(c["mu"], c["gamma"], c["d"],
                             z_values=z_values, k_max=c["k_max"],
                             delta=c["delta"])
    rows = []
    for i, k in enumerate(sweep.k_vectors):
        for j, z in enumerate(sweep.z_values):
            rows.append((z.real, z.imag, k[0], k[1],
                         sweep.sigma_min[i, j], sweep.re_h[i, j]))
    path = os.path.join(outdir, "dispersion.csv")
    _write_csv(path, "z_re,z_im,k1,k2,min_singular,re_h", rows)
    below = int(np.count_nonzero(sweep.re_h < 0.2))
    summary = {
        "min_re_h": sweep.min_re_h,
        "min_singular": sweep.min_sigma,
        "max_inv_norm": sweep.max_inv_norm,
        "num_points": len(rows),
        "num_below_one_fifth": below,
        "flagged": bool(below > 0),
        "argmin_h_z": [sweep.argmin_h[0].real, sweep.argmin_h[0].imag],
        "argmin_h_k": list(map(float, sweep.argmin_h[1])),
    }
    return [path], summary


def _run_bounds(c: dict, outdir: str):
    d = c["d"]
    eps = default_eps(d) if c["eps"] is None else c["eps"]
    budget = bound_budget(c["gamma"], d, eps)
    rng = np.random.default_rng(c["seed"])
    n = c["num_samples"]
    z = rng.uniform(0.0, c["re_max"], n) + 1j * rng.uniform(-c["im_max"], c["im_max"], n)
    kmag = rng.uniform(c["gamma"], c["kmag_max"], n)
    rows = []
    worst = {"c0": -math.inf, "c1": -math.inf, "c2": -math.inf}
    for zi, ki in zip(z, kmag):
        c0, c1, c2 = axis_coefficients(complex(zi), float(ki), d)
        b0 = c0_bound(float(ki), d)
        b1 = c1_bound(float(ki), d)
        b2 = c2_bound(float(ki), d, eps)
        rows.append((zi.real, zi.imag, ki, c0.real, abs(c1), d * abs(c2),
                     b0, b1, d * b2))
        worst["c0"] = max(worst["c0"], c0.real - b0)
        worst["c1"] = max(worst["c1"], abs(c1) - b1)
        worst["c2"] = max(worst["c2"], d * abs(c2) - d * b2)
    path = os.path.join(outdir, "bounds.csv")
    _write_csv(path, "z_re,z_im,kmag,re_c0,abs_c1,d_abs_c2,"
                     "bound_c0,bound_c1,bound_d_c2", rows)
    summary = {
        "eps": eps,
        "alpha2": budget.alpha2,
        "phi0": budget.phi0,
        "phi2": budget.phi2,
        "max_violation_c0": worst["c0"],
        "max_violation_c1": worst["c1"],
        "max_violation_c2": worst["c2"],
        "num_samples": n,
        "all_bounds_hold": bool(max(worst.values()) <= 0.0),
    }
    return [path], summary


def _solver_config(c: dict, mode: str, init: InitSpec) -> SolverConfig:
    return SolverConfig(
        mu=c["mu"], mode=mode, gamma=c["gamma"], nx=c["nx"],
        ntheta=c["ntheta"], dt=c["dt"], t_end=c["t_end"],
        eps_reg=c.get("eps_reg"), jeq_angle=c.get("jeq_angle", 0.0),
        init=init, snapshot_every=c["snapshot_every"], seed=c["seed"],
        keep_snapshots=c.get("keep_snapshots", False),
        dealias=c.get("dealias", True))


def _write_run_outputs(outdir: str, result) -> list[str]:
    paths = [os.path.join(outdir, "diagnostics.csv")]
    write_diagnostics_csv(paths[0], result.series)
    cfg = result.config
    for i, (t, values) in enumerate(result.snapshots):
        base = os.path.join(outdir, f"snapshot_{i:04d}")
        raw, meta = write_snapshot(base, values, gamma=cfg.gamma, mu=cfg.mu,
                                   t=t, mode=cfg.mode)
        paths.extend([raw, meta])
    return paths


def _run_simulate(c: dict, outdir: str):
    init = InitSpec(recipe=c["init"]["recipe"], amplitude=c["init"]["amplitude"],
                    mode_k=tuple(c["init"]["mode_k"]), width=c["init"]["width"])
    cfg = _solver_config(c, c["mode"], init)
    result = run(cfg)
    paths = _write_run_outputs(outdir, result)
    s = result.series
    summary = {
        "mass_initial": float(s.mass[0]),
        "mass_drift_rel": float(np.max(np.abs(s.mass / s.mass[0] - 1.0)))
        if s.mass[0] != 0 else float(np.max(np.abs(s.mass - s.mass[0]))),
        "dist_final": float(s.dist[-1]),
    }
    if c["mode"] != "linearized":
        J0bar = np.array([s.jbar_x[0], s.jbar_y[0]])
        Jinf = np.array([s.jbar_x[-1], s.jbar_y[-1]])
        if cfg.mu > 2.0 and np.linalg.norm(J0bar) > 0:
            J1 = project_to_manifold(cfg.mu, J0bar)
            summary["J1"] = [float(J1[0]), float(J1[1])]
            summary["J_infty"] = [float(Jinf[0]), float(Jinf[1])]
            summary["J_gap"] = float(np.linalg.norm(J1 - Jinf))
    t_max = c["fit_t_max"] if c["fit_t_max"] is not None else c["t_end"]
    try:
        rate, r2 = fit_decay_rate(s, c["fit_t_min"], t_max, column="dist")
        summary["dist_rate"] = rate
        summary["dist_r2"] = r2
    except ValueError:
        summary["dist_rate"] = None
        summary["dist_r2"] = None
    return paths, summary


def _run_linear_decay(c: dict, outdir: str):
    init = InitSpec(recipe="random-smooth", amplitude=c["amplitude"])
    cfg = _solver_config(c, "linearized", init)
    result = run(cfg)
    paths = _write_run_outputs(outdir, result)
    s = result.series
    t_max = c["fit_t_max"] if c["fit_t_max"] is not None else c["t_end"]
    rate, r2 = fit_decay_rate(s, c["fit_t_min"], t_max, column="l2")
    predicted = spectral_abscissa(c["mu"], c["gamma"], 2, c["k_max"],
                                  delta=c["delta"])
    summary = {
        "rate_measured": rate,
        "rate_predicted": predicted,
        "ratio": rate / predicted if predicted != 0 else math.inf,
        "fit_r2": r2,
        "l2_monotone": bool(np.all(np.diff(s.l2) <= 1e-10)),
    }
    return paths, summary


def _run_entropy(c: dict, outdir: str):
    init = InitSpec(recipe="large-blob", width=c["width"])
    cfg = _solver_config(c, "regularized", init)
    result = run(cfg)
    paths = _write_run_outputs(outdir, result)
    s = result.series
    fit = fit_entropy_growth(s)
    summary = {
        "c": fit.c,
        "C": fit.C,
        "max_violation": fit.max_violation,
        "entropy_initial": float(s.entropy[0]),
        "entropy_final": float(s.entropy[-1]),
        "mass_drift_rel": float(np.max(np.abs(s.mass / s.mass[0] - 1.0))),
    }
    return paths, summary


_RUNNERS = {
    "bifurcation": _run_bifurcation,
    "homogeneous": _run_homogeneous,
    "dispersion": _run_dispersion,
    "bounds": _run_bounds,
    "simulate": _run_simulate,
    "linear-decay": _run_linear_decay,
    "entropy": _run_entropy,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vicsekbgk",
        description="kinetic alignment model: experiments and sweeps")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                metavar="|".join(EXPERIMENTS))
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", default=None, metavar="PATH",
                       help="JSON config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                       dest="overrides", help="override one config entry")
        p.add_argument("--output-dir", default=".", metavar="PATH",
                       help="directory for artifacts (created if missing)")
        p.add_argument("--quiet", action="store_true",
                       help="suppress progress output")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    experiment = args.experiment
    try:
        config = resolve_config(experiment, args.config, args.overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    t0 = time.monotonic()
    outdir = args.output_dir
    os.makedirs(outdir, exist_ok=True)
    try:
        outputs, summary = _RUNNERS[experiment](config, outdir)
    except SolverAbort as exc:
        _write_manifest(outdir, experiment, config, [],
                        {"error": str(exc), "last_valid_time": exc.t}, t0)
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    manifest_path = _write_manifest(outdir, experiment, config,
                                    [os.path.basename(p) for p in outputs],
                                    summary, t0)
    if not args.quiet:
        for path in outputs:
            print(f"wrote {path}")
        print(f"wrote {manifest_path}")
        for key, value in summary.items():
            print(f"  {key}: {value}")
    return 0
