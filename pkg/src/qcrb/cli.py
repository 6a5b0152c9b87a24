"""Command-line front end.

    qcrb <task> [--config FILE | --scenario NAME] [--out FILE] [--seed N]
         [--threads N] [--param NAME] [--grid NAME:MIN:MAX:POINTS]

Tasks: qfi-rate, qfi-finite, cfi, oracle-wtd, scan, validate.  Flags
override config-file fields; the environment variable QCRB_SEED is the
lowest-precedence seed source.  Results go to a CSV table (deterministic
bytes for a fixed seed and thread count) with a JSON metadata sidecar
carrying the resolved config, code version and wall time.
"""

import argparse
import copy
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, liouvillian, qfi, scenarios, trajectories
from .errors import (
    DimensionMismatch,
    InvalidParameter,
    NonHermitianHamiltonian,
    QcrbError,
    SchemaError,
    StepTooLarge,
)
from .model import load_model

TASKS = ("qfi-rate", "qfi-finite", "cfi", "oracle-wtd", "scan", "validate")
CSV_SIGNATURE = "# qcrb v1"
_CONFIG_ERRORS = (SchemaError, DimensionMismatch, NonHermitianHamiltonian,
                  InvalidParameter, ValueError, KeyError)

DEFAULT_STENCIL = {"h_rel": 1e-4, "h_min": 1e-5}


def _resolve_model(config):
    spec = config.get("model")
    if not isinstance(spec, dict):
        raise SchemaError("config must carry a 'model' object")
    if "builtin" in spec:
        return load_model({"builtin": spec["builtin"],
                           "params": spec.get("params", {})})
    if "path" in spec:
        with open(spec["path"]) as handle:
            return load_model(json.load(handle))
    if "document" in spec:
        return load_model(spec["document"])
    raise SchemaError("model must carry 'builtin', 'path' or 'document'")


def _stencil(config):
    opts = {**DEFAULT_STENCIL, **(config.get("stencil") or {})}
    return qfi.StencilConfig(opts["h_rel"], opts["h_min"])


def _est_indices(model, config):
    names = config.get("est_params")
    if isinstance(names, str):
        names = [names]
    if not names:
        raise SchemaError("est_params is required for this task")
    return [(name, model.params.index(name)) for name in names]


def _sub_seed(seed, *key):
    return int(np.random.SeedSequence((seed,) + key).generate_state(1)[0])


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # shortest exact decimal, plain for numpy scalars
    return str(value)


def _row(model_values, names, est_param, estimate, scan_param="", scan_value=None):
    meta = estimate.meta
    flags = meta.get("flags", [])
    return {
        "scan_param": scan_param,
        "scan_value": scan_value,
        **{name: float(v) for name, v in zip(names, model_values)},
        "est_param": est_param,
        "method": estimate.method,
        "value": estimate.value,
        "std_error": estimate.std_error,
        "T": meta.get("T"),
        "n_traj": meta.get("n_traj"),
        "h": meta.get("h", meta.get("h_alpha")),
        "flags": "|".join(flags) if flags else "",
    }


def _write_csv(path, names, rows):
    columns = (["scan_param", "scan_value"] + list(names)
               + ["est_param", "method", "value", "std_error", "T",
                  "n_traj", "h", "flags"])
    lines = [CSV_SIGNATURE, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_format(row.get(col)) for col in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def _write_meta(path, config, seed, wall_time):
    meta = {
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time_s": wall_time,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "notes": {"initial_state": "records and finite-time runs start from "
                                   "the steady state unless the model says "
                                   "otherwise"},
    }
    Path(path).with_suffix(".meta").write_text(json.dumps(meta, indent=2) + "\n")


# --- task runners ---------------------------------------------------------

def _run_qfi_rate(model, config, threads):
    stencil = _stencil(config)
    pairs = _est_indices(model, config)
    indices = [idx for _, idx in pairs]
    matrix = qfi.qfi_rate_matrix(model, model.params, indices, stencil)
    rows = []
    for i, (name_i, _) in enumerate(pairs):
        for j, (name_j, _) in enumerate(pairs):
            if j < i:
                continue
            est = matrix[i, j]
            label = name_i if i == j else f"{name_i};{name_j}"
            rows.append(_row(model.params.values, model.params.names, label, est))
    return rows


def _run_qfi_finite(model, config, threads):
    stencil = _stencil(config)
    t_final = config.get("T")
    if t_final is None:
        raise SchemaError("T is required for qfi-finite")
    rho0 = liouvillian.resolve_initial_state(model)
    rows = []
    for name, idx in _est_indices(model, config):
        est = qfi.finite_time_qfi(model, model.params, rho0, float(t_final),
                                  idx, idx, stencil)
        rows.append(_row(model.params.values, model.params.names, name, est))
    return rows


def _cfi_for(model, config, scheme, name, idx, seed, threads):
    opts = config.get("scheme") or {}
    return trajectories.cfi_rate(
        model, model.params, idx, scheme,
        T=float(config.get("T", 500.0)),
        n_traj=int(config.get("n_traj", 1000)),
        burn_in=config.get("burn_in"),
        seed=seed,
        h=config.get("h"),
        phi=float(opts.get("phi", 0.0) or 0.0),
        dt=opts.get("dt"),
        threads=threads,
    )


def _run_cfi(model, config, threads):
    opts = config.get("scheme") or {}
    scheme = opts.get("type")
    if scheme not in ("counting", "homodyne"):
        raise SchemaError("scheme.type must be 'counting' or 'homodyne'")
    seed = config.get("seed")
    if seed is None:
        raise SchemaError("seed required for Monte-Carlo task")
    rows = []
    for k, (name, idx) in enumerate(_est_indices(model, config)):
        est = _cfi_for(model, config, scheme, name, idx,
                       _sub_seed(int(seed), 0, k), threads)
        rows.append(_row(model.params.values, model.params.names, name, est))
    return rows


def _run_oracle_wtd(model, config, threads):
    if tuple(model.params.names) != ("delta", "omega", "kappa"):
        raise SchemaError("oracle-wtd applies to the two-level model only")
    delta, omega, kappa = model.params.values
    rows = []
    for name, idx in _est_indices(model, config):
        est = trajectories.wtd_fisher_oracle(delta, omega, kappa, idx)
        rows.append(_row(model.params.values, model.params.names, name, est))
    return rows


_SCAN_METHODS = ("qfi-rate", "cfi-counting", "cfi-homodyne", "oracle-wtd")


def _run_scan(model, config, threads):
    axis = config.get("scan")
    if not axis:
        raise SchemaError("scan task requires a 'scan' axis")
    for key in ("param", "min", "max", "points"):
        if key not in axis:
            raise SchemaError(f"scan axis missing {key!r}")
    points = int(axis["points"])
    lo, hi = float(axis["min"]), float(axis["max"])
    if points < 1 or not (np.isfinite(lo) and np.isfinite(hi)):
        raise SchemaError("scan bounds must be finite with points >= 1")
    methods = config.get("methods") or ["qfi-rate"]
    for method in methods:
        if method not in _SCAN_METHODS:
            raise SchemaError(f"unknown scan method {method!r}")
    mc = any(method.startswith("cfi-") for method in methods)
    seed = config.get("seed")
    if mc and seed is None:
        raise SchemaError("seed required for Monte-Carlo task")

    scan_param = axis["param"]
    axis_idx = model.params.index(scan_param)
    grid = np.linspace(lo, hi, points)
    stencil = _stencil(config)
    pairs = _est_indices(model, config)

    rows = []
    for g, value in enumerate(grid):
        values = model.params.values.copy()
        values[axis_idx] = value
        point = model.params.with_values(values)
        point_model = _rebind(model, point)
        for mi, method in enumerate(methods):
            for k, (name, idx) in enumerate(pairs):
                if method == "qfi-rate":
                    est = qfi.qfi_rate(point_model, point, idx, idx, stencil)
                elif method == "oracle-wtd":
                    d, om, ka = point.values
                    est = trajectories.wtd_fisher_oracle(d, om, ka, idx)
                else:
                    scheme = method.split("-", 1)[1]
                    est = _cfi_for(point_model, config, scheme, name, idx,
                                   _sub_seed(int(seed), g, mi, k), threads)
                rows.append(_row(point.values, model.params.names, name, est,
                                 scan_param, float(value)))
    return rows


def _rebind(model, params):
    from dataclasses import replace
    return replace(model, params=params)


_RUNNERS = {
    "qfi-rate": _run_qfi_rate,
    "qfi-finite": _run_qfi_finite,
    "cfi": _run_cfi,
    "oracle-wtd": _run_oracle_wtd,
    "scan": _run_scan,
}


# --- validation -----------------------------------------------------------

def validate(config):
    """Report schema and precondition violations without running anything."""
    diagnostics = []
    task = config.get("task")
    if task not in TASKS or task == "validate":
        diagnostics.append(f"unknown or missing task {task!r}")
        return diagnostics
    try:
        model = _resolve_model(config)
    except Exception as exc:
        diagnostics.append(f"model error: {type(exc).__name__}: {exc}")
        return diagnostics

    needs_est = task in ("qfi-rate", "qfi-finite", "cfi", "oracle-wtd", "scan")
    if needs_est:
        try:
            _est_indices(model, config)
        except Exception as exc:
            diagnostics.append(f"est_params error: {exc}")

    methods = config.get("methods") or []
    mc = task == "cfi" or (task == "scan"
                           and any(m.startswith("cfi-") for m in methods))
    if mc and config.get("seed") is None:
        diagnostics.append("seed required for Monte-Carlo task")

    if task == "cfi":
        opts = config.get("scheme") or {}
        if opts.get("type") not in ("counting", "homodyne"):
            diagnostics.append("scheme.type must be 'counting' or 'homodyne'")
    if task == "scan":
        axis = config.get("scan") or {}
        missing = [k for k in ("param", "min", "max", "points") if k not in axis]
        if missing:
            diagnostics.append(f"scan axis missing {missing}")
        else:
            if not (np.isfinite(axis["min"]) and np.isfinite(axis["max"])):
                diagnostics.append("scan bounds must be finite")
            if int(axis["points"]) < 1:
                diagnostics.append("scan points must be >= 1")
        for method in methods:
            if method not in _SCAN_METHODS:
                diagnostics.append(f"unknown scan method {method!r}")

    homodyne = ((task == "cfi" and (config.get("scheme") or {}).get("type")
                 == "homodyne") or (task == "scan" and "cfi-homodyne" in methods))
    dt = (config.get("scheme") or {}).get("dt")
    if homodyne and dt is not None:
        bound = _min_homodyne_bound(model, config)
        if bound is not None and dt > bound:
            diagnostics.append(
                f"StepTooLarge: homodyne dt {dt:.3g} exceeds the bound "
                f"{bound:.3g} for this model/scan")

    if mc and not diagnostics:
        try:
            gap = liouvillian.spectral_gap(model)
            if float(config.get("T", 500.0)) * gap < 100.0:
                diagnostics.append(
                    f"record length T below 100 relaxation times (gap {gap:.3g})")
        except QcrbError as exc:
            diagnostics.append(f"{type(exc).__name__}: {exc}")
    return diagnostics


def _min_homodyne_bound(model, config):
    try:
        if config.get("task") == "scan":
            axis = config["scan"]
            idx = model.params.index(axis["param"])
            bounds = []
            for value in np.linspace(float(axis["min"]), float(axis["max"]),
                                     int(axis["points"])):
                values = model.params.values.copy()
                values[idx] = value
                bounds.append(trajectories.homodyne_step_bound(
                    _rebind(model, model.params.with_values(values)), None))
            return min(bounds)
        return trajectories.homodyne_step_bound(model, None)
    except QcrbError:
        return None


# --- entry point ----------------------------------------------------------

def run(config, threads=1):
    """Execute a validated config; writes the CSV table and its sidecar."""
    model = _resolve_model(config)
    task = config.get("task")
    if task not in _RUNNERS:
        raise SchemaError(f"unknown task {task!r}")
    start = time.perf_counter()
    rows = _RUNNERS[task](model, config, threads)
    out = config.get("out") or "qcrb_results.csv"
    _write_csv(out, model.params.names, rows)
    _write_meta(out, config, config.get("seed"), time.perf_counter() - start)
    return out


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qcrb",
        description="Fisher-information limits for continuously monitored "
                    "open quantum systems")
    parser.add_argument("task", choices=TASKS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--scenario", help="bundled scenario name "
                                           "(e.g. fig2-delta)")
    parser.add_argument("--out", help="output CSV path")
    parser.add_argument("--seed", type=int, help="master seed (overrides "
                                                 "config and QCRB_SEED)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--param", help="estimated parameter name "
                                        "(overrides est_params)")
    parser.add_argument("--grid", help="scan override NAME:MIN:MAX:POINTS")
    return parser


def _assemble_config(args):
    config = {}
    if args.scenario:
        config = scenarios.scenario(args.scenario)
    if args.config:
        with open(args.config) as handle:
            loaded = json.load(handle)
        if not isinstance(loaded, dict):
            raise SchemaError("config file must hold a JSON object")
        config = {**config, **loaded}
    if not config and args.task != "validate":
        raise SchemaError("either --config or --scenario is required")
    config = copy.deepcopy(config)
    if args.task != "validate":
        config["task"] = args.task
    if args.out:
        config["out"] = args.out
    if args.param:
        config["est_params"] = [args.param]
    if args.grid:
        parts = args.grid.split(":")
        if len(parts) != 4:
            raise SchemaError("--grid expects NAME:MIN:MAX:POINTS")
        config["scan"] = {"param": parts[0], "min": float(parts[1]),
                          "max": float(parts[2]), "points": int(parts[3])}
    if args.seed is not None:
        config["seed"] = args.seed
    elif config.get("seed") is None and os.environ.get("QCRB_SEED"):
        config["seed"] = int(os.environ["QCRB_SEED"])
    return config


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = _assemble_config(args)
    except _CONFIG_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1

    if args.task == "validate":
        if not config:
            print("nothing to validate: provide --config or --scenario",
                  file=sys.stderr)
            return 1
        diagnostics = validate(config)
        for line in diagnostics:
            print(line)
        return 0

    diagnostics = validate(config)
    if diagnostics:
        for line in diagnostics:
            print(line, file=sys.stderr)
        return 1
    try:
        out = run(config, threads=max(1, args.threads))
    except _CONFIG_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except QcrbError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
