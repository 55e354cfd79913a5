"""Command-line entry point: ``fbmlab <command> [options]``.

Exit status: 0 on success, 2 when an argument or the parameter regime is
invalid, 1 on numerical failure (divergence, non-convergence, factorization).
Option values come from the command line, then ``--config`` (flat
``key=value`` lines), then defaults; ``FBMLAB_SEED`` overrides the seed.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time

import numpy as np

from . import report
from .errors import (ConfigError, DivergenceError, DomainError, EmbeddingError, FactorizationError,
                     RegimeError, SingularityError)
from .fbm import ModelParams, TimeGrid, generate_path, path_to_bytes, path_to_csv

COMMANDS = ("simulate", "localtime", "mean", "var", "e-value", "rate", "mean-divergence",
            "divergence-probe", "edwards", "tails", "verify-bounds", "accept")

# option name -> (type, default); shared by the parser and the config file reader
OPTIONS = {
    "d": (int, 2),
    "hurst": (float, 0.5),
    "T": (float, 1.0),
    "eps": (str, "0.1"),
    "gamma": (float, 0.0),
    "g": (str, "0"),
    "seed": (int, 0),
    "threads": (int, None),
    "format": (str, "json"),
    "output": (str, None),
    "n": (int, 512),
    "paths": (int, 10_000),
    "path_index": (int, 0),
    "method": (str, "fast"),
    "rel_tol": (float, 1e-6),
    "max_cells": (int, 2_000_000),
    "k_min": (int, 2),
    "k_max": (int, 12),
    "levels": (int, 10),
    "N": (str, "0.05,0.1,0.15,0.2"),
    "center": (str, None),
    "samples": (int, 10_000),
    "suite": (str, "fast"),
}

CHOICES = {
    "format": ("csv", "json", "bin"),
    "method": ("dense", "fast"),
    "center": ("none", "quadrature_mean"),
    "suite": ("fast", "full"),
}


class UsageError(Exception):
    """Invalid options (exit status 2)."""


def _floats(text: str, name: str) -> list:
    try:
        vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--{name} expects comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"--{name} needs at least one value")
    return vals


def read_config(path: str) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment; keys use ``-`` or ``_``."""
    out = {}
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in OPTIONS:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r}")
        typ = OPTIONS[key][0]
        try:
            out[key] = typ(value)
        except ValueError:
            raise UsageError(f"{path}:{lineno}: {key} expects {typ.__name__}, got {value!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    helps = {
        "simulate": "sample one fBm path",
        "localtime": "per-path L_eps, centered value and Edwards weights",
        "mean": "E(L_eps) by 1D quadrature",
        "var": "Var(L_eps) = E_{eps,eps} by cubature",
        "e-value": "covariance integral E_{eps,gamma}",
        "rate": "Delta(eps) ladder and log-log slope",
        "mean-divergence": "E(L_eps) against ln(1/eps) at H = 1/d",
        "divergence-probe": "growth of truncated E_00 under refinement",
        "edwards": "Monte Carlo E[exp(-g L)] per coupling g",
        "tails": "empirical lower tails of the centered local time",
        "verify-bounds": "sampled sup ratios of the kernel inequalities",
        "accept": "run the acceptance suite",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", default=None, help="flat key=value file; flags take precedence")
        for key, (typ, _) in OPTIONS.items():
            flag = "--" + key.replace("_", "-")
            kwargs = {"dest": key, "default": None, "type": typ}
            if key in CHOICES:
                kwargs["choices"] = CHOICES[key]
            p.add_argument(flag, **kwargs)
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    """Merge flags over the config file over defaults and apply ``FBMLAB_SEED``."""
    cfg = read_config(ns.config) if ns.config else {}
    opts = {}
    for key, (_, default) in OPTIONS.items():
        val = getattr(ns, key)
        opts[key] = val if val is not None else cfg.get(key, default)
        if key in CHOICES and opts[key] is not None and opts[key] not in CHOICES[key]:
            raise UsageError(f"{key} must be one of {CHOICES[key]}, got {opts[key]!r}")
    env = os.environ.get("FBMLAB_SEED")
    if env is not None:
        try:
            opts["seed"] = int(env)
        except ValueError:
            raise UsageError(f"FBMLAB_SEED must be an integer, got {env!r}") from None
    if opts["seed"] < 0:
        raise UsageError("seed must be non-negative")
    if opts["threads"] is not None and opts["threads"] < 1:
        raise UsageError("threads must be >= 1")
    opts["command"] = ns.command
    return opts


def _params(o) -> ModelParams:
    return ModelParams(o["d"], o["hurst"], o["T"])


def _single_eps(o) -> float:
    vals = _floats(o["eps"], "eps")
    if len(vals) != 1:
        raise UsageError(f"{o['command']} takes a single --eps value")
    return vals[0]


def _quad_cfg(o):
    from .quadrature import QuadConfig
    return QuadConfig(rel_tol=o["rel_tol"], max_cells=o["max_cells"])


def _need_format(o, allowed):
    """Reject output formats the command cannot produce."""
    if o["format"] not in allowed:
        raise UsageError(f"{o['command']} supports --format {'/'.join(allowed)}, got {o['format']}")


def _quad_payload(operation, params, eps, gamma, res, cfg) -> dict:
    return {
        "operation": operation,
        "params": params.as_dict(),
        "eps": eps,
        "gamma": gamma,
        "value": res.value,
        "error": res.abs_error_estimate,
        "cells": res.cells,
        "converged": res.converged,
        "region_breakdown": res.region_breakdown,
        "config": {"rel_tol": cfg.rel_tol, "max_cells": cfg.max_cells,
                   "softening_exponent": cfg.softening_exponent},
        "elapsed_ms": res.elapsed_ms,
    }


def _curve_payload(operation, params, xs, ys, **extra) -> dict:
    out = {"operation": operation, "params": params.as_dict(),
           "points": [{"eps": float(x), "value": float(y)} for x, y in zip(xs, ys)]}
    out.update(extra)
    return out


def _write(o, payload, schema, csv_header=None, csv_rows=None):
    if o["format"] == "csv":
        if csv_header is None:
            raise UsageError(f"{o['command']} has no CSV form; use --format json")
        text = report.csv_text(csv_header, csv_rows)
    else:
        report.validate(payload, schema)
        text = report.to_json(payload)
    report.emit(text, o["output"])


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(o):
    params = _params(o)
    path = generate_path(params, TimeGrid(o["n"], params.T), o["seed"], o["path_index"], o["method"])
    if o["format"] == "bin":
        report.emit(path_to_bytes(path), o["output"])
    elif o["format"] == "csv":
        report.emit(path_to_csv(path), o["output"])
    else:
        payload = {"params": params.as_dict(), "n": path.grid.n, "seed": path.seed,
                   "path_index": path.path_index, "method": path.method,
                   "t": path.grid.points, "values": path.values}
        _write(o, payload, "path")


def cmd_localtime(o):
    from .kernels import mean_local_time
    from .localtime import clamped_exp
    from .montecarlo import local_time_samples
    _need_format(o, ("csv", "json"))
    params = _params(o)
    eps = _floats(o["eps"], "eps")
    gs = _floats(o["g"], "g")
    if any(g < 0 for g in gs):
        raise DomainError("coupling constants must be non-negative")
    L = local_time_samples(params, eps, o["n"], o["paths"], o["seed"], o["threads"], o["method"])
    means = [mean_local_time(params, e) for e in eps]
    centered = o["center"] == "quadrature_mean"
    header = ["path_index", "epsilon", "L_eps", "L_eps_centered"] + [f"edwards_weight_g{g:g}" for g in gs]
    rows = []
    for i in range(L.shape[0]):
        for k, e in enumerate(eps):
            c = L[i, k] - means[k]
            x = c if centered else L[i, k]
            rows.append([i, e, L[i, k], c] + [float(clamped_exp(-g * x)[0]) for g in gs])
    if o["format"] == "json":
        payload = {"params": params.as_dict(), "header": header, "rows": rows}
        report.emit(report.to_json(payload), o["output"])
    else:
        report.emit(report.csv_text(header, rows), o["output"])


def cmd_mean(o):
    from .kernels import mean_asymptotic, mean_local_time
    params = _params(o)
    eps = _single_eps(o)
    t0 = time.perf_counter()
    value = mean_local_time(params, eps)
    try:
        asym = mean_asymptotic(params, eps)
    except RegimeError:
        asym = None
    payload = {"operation": "mean", "params": params.as_dict(), "eps": eps, "value": value,
               "asymptotic": asym, "elapsed_ms": 1e3 * (time.perf_counter() - t0)}
    _write(o, payload, "scalar_result", ["eps", "value"], [[eps, value]])


def _quad_command(o, operation, eps, gamma):
    from .quadrature import compute_E
    params = _params(o)
    cfg = _quad_cfg(o)
    res = compute_E(eps, gamma, params, cfg)
    payload = _quad_payload(operation, params, eps, gamma, res, cfg)
    _write(o, payload, "quad_result", ["eps", "gamma", "value", "error"],
           [[eps, gamma, res.value, res.abs_error_estimate]])
    if not res.converged:
        print(f"warning: cubature stopped at {res.cells} cells before reaching rel_tol", file=sys.stderr)
        return 1
    return 0


def cmd_var(o):
    eps = _single_eps(o)
    return _quad_command(o, "var", eps, eps)


def cmd_e_value(o):
    eps = _single_eps(o)
    if o["gamma"] < 0:
        raise DomainError("gamma must be non-negative")
    return _quad_command(o, "e-value", eps, o["gamma"])


def cmd_rate(o):
    from .quadrature import rate_curve
    params = _params(o)
    if o["k_min"] > o["k_max"]:
        raise UsageError("k-min must not exceed k-max")
    ladder = [2.0**-k for k in range(o["k_min"], o["k_max"] + 1)]
    rc = rate_curve(params, ladder, _quad_cfg(o))
    payload = _curve_payload("rate", params, rc.eps, rc.delta, slope=rc.slope,
                             K_ratios=rc.K_ratios, errors=rc.errors, converged=rc.converged,
                             positive=rc.positive, decreasing=rc.decreasing,
                             elapsed_ms=rc.elapsed_ms)
    _write(o, payload, "curve", ["eps", "value"], zip(rc.eps, rc.delta))
    return 0 if all(rc.converged) else 1


def cmd_mean_divergence(o):
    from .quadrature import mean_divergence_curve
    params = _params(o)
    eps = _floats(o["eps"], "eps")
    ladder = eps if len(eps) > 1 else None
    pairs, slope = mean_divergence_curve(params, ladder)
    xs, ys = zip(*pairs)
    payload = _curve_payload("mean-divergence", params, xs, ys, slope=slope)
    _write(o, payload, "curve", ["eps", "value"], pairs)


def cmd_divergence_probe(o):
    from .quadrature import divergence_probe
    params = _params(o)
    rep = divergence_probe(params, levels=o["levels"])
    payload = _curve_payload("divergence-probe", params, rep.cutoffs, rep.partial,
                             verdict=rep.verdict, increments=rep.increments,
                             increment_ratios=rep.increment_ratios, elapsed_ms=rep.elapsed_ms)
    _write(o, payload, "curve", ["eps", "value"], zip(rep.cutoffs, rep.partial))


def _spec(o, default_center):
    from .montecarlo import ExperimentSpec
    return ExperimentSpec(_params(o), _single_eps(o), o["n"], o["paths"], tuple(_floats(o["g"], "g")),
                          o["center"] or default_center, o["seed"], method=o["method"])


def cmd_edwards(o):
    from .montecarlo import edwards_curve, run_experiment
    params = _params(o)
    spec = _spec(o, "quadrature_mean" if params.dH >= 1.0 - 1e-12 else "none")
    rep = run_experiment(spec, workers=o["threads"])
    curve = edwards_curve(spec, report=rep)
    payload = rep.to_dict()
    payload["statistics"] = payload["statistics"] + [
        {"name": "edwards", "g": g, "mean": e.mean, "std_error": e.std_error, "n_paths": e.n_paths,
         "n_batches": e.n_batches, "seed": e.seed, "saturated_fraction": e.saturated_fraction}
        for g, e in curve["uncentered"] if spec.center_mode != "none"]
    rows = []
    for kind, pts in curve.items():
        rows += [[kind, g, e.mean, e.std_error] for g, e in pts]
    _write(o, payload, "experiment_report", ["curve", "g", "mean", "std_error"], rows)


def cmd_tails(o):
    from .montecarlo import tail_probe
    spec = _spec(o, "quadrature_mean")
    if spec.center_mode != "quadrature_mean":
        raise UsageError("tails requires --center quadrature_mean")
    res = tail_probe(spec, _floats(o["N"], "N"), workers=o["threads"])
    payload = {"spec": res["spec"], "statistics": [], "floors": res["floors"], "tails": res["tails"],
               "elapsed_ms": res["elapsed_ms"]}
    _write(o, payload, "experiment_report", ["N", "count", "probability", "std_error"],
           [[r["N"], r["count"], r["probability"], r["std_error"]] for r in res["tails"]])


def cmd_verify_bounds(o):
    from .bounds import kernel_checks, run_all, power_integral_sweep
    params = _params(o)
    reps = power_integral_sweep() + run_all(params, o["samples"], o["seed"])
    reps += kernel_checks(params, 10 * o["samples"], o["seed"])
    _write(o, reps, "bound_report", ["check", "sup_ratio"], [[r["check"], r["sup_ratio"]] for r in reps])
    return 0 if all(math.isfinite(r["sup_ratio"]) for r in reps) else 1


def cmd_accept(o):
    from .acceptance import run_suite
    results = run_suite(o["suite"], workers=o["threads"],
                        progress=lambda r: print(r.line(), file=sys.stderr, flush=True))
    passed = all(r.passed for r in results)
    payload = {"suite": o["suite"], "passed": passed, "criteria": [r.to_dict() for r in results]}
    if o["format"] == "json":
        _write(o, payload, "acceptance_report")
    else:
        rows = [[r.number, r.name, "pass" if r.passed else "fail", r.tolerance, r.runtime_s]
                for r in results]
        report.emit(report.csv_text(["criterion", "name", "status", "tolerance", "runtime_s"], rows),
                    o["output"])
    return 0 if passed else 1


HANDLERS = {
    "simulate": cmd_simulate,
    "localtime": cmd_localtime,
    "mean": cmd_mean,
    "var": cmd_var,
    "e-value": cmd_e_value,
    "rate": cmd_rate,
    "mean-divergence": cmd_mean_divergence,
    "divergence-probe": cmd_divergence_probe,
    "edwards": cmd_edwards,
    "tails": cmd_tails,
    "verify-bounds": cmd_verify_bounds,
    "accept": cmd_accept,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve(ns)
        if opts["format"] == "bin" and opts["command"] != "simulate":
            raise UsageError("--format bin is only available for simulate")
        code = HANDLERS[opts["command"]](opts)
        return int(code or 0)
    except (UsageError, DomainError, RegimeError, ConfigError) as exc:
        print(f"fbmlab {ns.command}: error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, SingularityError, FactorizationError, EmbeddingError,
            FloatingPointError) as exc:
        print(f"fbmlab {ns.command}: numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
