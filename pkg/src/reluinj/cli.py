"""Command-line front end: capacity, sequence, evaluate, sweep, simulate.

Settings come from built-in defaults, then an optional JSON config file with
flat keys named like the long options (``alpha1``, ``max_layers``, ...), then
the command line.  Exit status: 0 success, 2 configuration error, 3 numerical
failure (with a JSON diagnostic on stderr).
"""

import argparse
import json
import logging
import math
import sys
from dataclasses import fields

from . import report
from .kernels import DomainError
from .mc_lab import WORKERS_ENV, AnnealSchedule, phase_sweep
from .objective import InjectivityMode, Method, NetworkProfile, SaddleVariables, evaluate
from .solver import SolverConfig, SolverError, capacity_root, minimal_sequence, saddle_solve
from .special_math import gauss_grid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

SOLVER_KEYS = tuple(f.name for f in fields(SolverConfig))
COMMON_KEYS = ("mode", "method", "output", "format", "plot", "compat_gamma_sph", "grid_nodes") + SOLVER_KEYS
COMMAND_KEYS = {
    "capacity": ("layers", "alpha1", "prefix"),
    "sequence": ("max_layers", "alpha1"),
    "evaluate": ("alphas", "r", "gamma_bar", "gamma", "nu", "c3", "input"),
    "sweep": ("prefix", "alpha_grid", "c3"),
    "simulate": ("n", "prefix", "alpha_grid", "trials", "seed", "restarts", "workers", "stages",
                 "steps_per_stage"),
}
DEFAULTS = {"mode": "weak", "method": "plain", "format": "pretty", "compat_gamma_sph": "corrected",
            "grid_nodes": 200, "trials": 50, "seed": 0, "restarts": 4, "n": 40}


class ConfigError(ValueError):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="reluinj", description="Injectivity capacity bounds for deep ReLU networks.")
    sub = p.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", help="JSON file with flat keys named like the long options")
        sp.add_argument("--mode", choices=["weak", "strong"], default=S)
        sp.add_argument("--method", choices=["plain", "lifted"], default=S)
        sp.add_argument("--output", default=S, help="write here instead of stdout")
        sp.add_argument("--format", choices=["json", "csv", "pretty"], default=S)
        sp.add_argument("--plot", default=S, help="also render a figure to this file")
        sp.add_argument("--compat-gamma-sph", dest="compat_gamma_sph", choices=["corrected", "printed"], default=S)
        sp.add_argument("--grid-nodes", dest="grid_nodes", type=int, default=S)
        sp.add_argument("--objective-tol", dest="objective_tol", type=float, default=S)
        sp.add_argument("--var-tol", dest="var_tol", type=float, default=S)
        sp.add_argument("--max-iters", dest="max_iters", type=int, default=S)
        sp.add_argument("--multistarts", type=int, default=S)
        sp.add_argument("--rng-seed", dest="rng_seed", type=int, default=S)
        sp.add_argument("--alpha-bracket-factor", dest="alpha_bracket_factor", type=float, default=S)
        sp.add_argument("--c3-tol", dest="c3_tol", type=float, default=S)
        sp.add_argument("-v", "--verbose", action="store_true")
        return sp

    sp = common(sub.add_parser("capacity", help="last-layer capacity bound for a given prefix"))
    sp.add_argument("--layers", type=int, default=S)
    sp.add_argument("--alpha1", type=float, default=S)
    sp.add_argument("--prefix", type=float, nargs="+", default=S, help="alpha_1..alpha_{l-1}")

    sp = common(sub.add_parser("sequence", help="minimally admissible expansion sequence"))
    sp.add_argument("--max-layers", dest="max_layers", type=int, default=S)
    sp.add_argument("--alpha1", type=float, default=S)

    sp = common(sub.add_parser("evaluate", help="objective breakdown at given saddle variables"))
    sp.add_argument("--input", default=S, help="JSON output of a previous capacity/evaluate run")
    sp.add_argument("--alphas", type=float, nargs="+", default=S)
    sp.add_argument("--r", type=float, nargs="*", default=S)
    sp.add_argument("--gamma-bar", dest="gamma_bar", type=float, nargs="+", default=S)
    sp.add_argument("--gamma", type=float, nargs="*", default=S)
    sp.add_argument("--nu", type=float, default=S)
    sp.add_argument("--c3", type=float, default=S)

    sp = common(sub.add_parser("sweep", help="saddle value against the last-layer expansion"))
    sp.add_argument("--prefix", type=float, nargs="*", default=S)
    sp.add_argument("--alpha-grid", dest="alpha_grid", type=float, nargs="+", default=S)
    sp.add_argument("--c3", type=float, default=S, help="fix c3 instead of maximising over it")

    sp = common(sub.add_parser("simulate", help="Monte Carlo feasibility-witness frequencies"))
    sp.add_argument("--n", type=int, default=S)
    sp.add_argument("--prefix", type=float, nargs="*", default=S)
    sp.add_argument("--alpha-grid", dest="alpha_grid", type=float, nargs="+", default=S)
    sp.add_argument("--trials", type=int, default=S)
    sp.add_argument("--seed", type=int, default=S)
    sp.add_argument("--restarts", type=int, default=S)
    sp.add_argument("--workers", type=int, default=S, help=f"process pool size (capped by ${WORKERS_ENV})")
    sp.add_argument("--stages", type=int, default=S)
    sp.add_argument("--steps-per-stage", dest="steps_per_stage", type=int, default=S)
    return p


def load_config(command, path=None, overrides=None):
    """Merge defaults, a JSON config file and command-line overrides."""
    allowed = set(COMMON_KEYS) | set(COMMAND_KEYS[command])
    cfg = {k: v for k, v in DEFAULTS.items() if k in allowed}
    if path:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        if data.get("command", command) != command:
            raise ConfigError(f"config file is for command '{data['command']}', not '{command}'")
        data.pop("command", None)
        for key in data:
            if key not in allowed:
                raise ConfigError(f"unknown config key '{key}' for command '{command}'")
        cfg.update(data)
    cfg.update(overrides or {})
    return cfg


def _require(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise ConfigError(f"missing required field '{k}'")


def _solver_config(cfg):
    kw = {k: cfg[k] for k in SOLVER_KEYS if cfg.get(k) is not None}
    try:
        return SolverConfig(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid solver settings: {exc}") from None


def _grid(cfg):
    try:
        return gauss_grid(int(cfg["grid_nodes"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid grid_nodes: {exc}") from None


def _enums(cfg):
    try:
        return InjectivityMode.parse(cfg["mode"]), Method.parse(cfg["method"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _printed(cfg):
    if cfg["compat_gamma_sph"] not in ("corrected", "printed"):
        raise ConfigError("compat_gamma_sph must be 'corrected' or 'printed'")
    return cfg["compat_gamma_sph"] == "printed"


def _provenance(cfg):
    return {"grid_nodes": int(cfg["grid_nodes"]), "compat_gamma_sph": cfg["compat_gamma_sph"]}


# --- commands ---------------------------------------------------------------------

def cmd_capacity(cfg):
    mode, method = _enums(cfg)
    config, grid, printed = _solver_config(cfg), _grid(cfg), _printed(cfg)
    prefix = cfg.get("prefix")
    if prefix:
        prefix = [float(a) for a in prefix]
        if cfg.get("layers") is not None and int(cfg["layers"]) != len(prefix) + 1:
            raise ConfigError(f"'layers' is {cfg['layers']} but 'prefix' has {len(prefix)} entries")
        res = capacity_root(prefix, mode, method, config, grid=grid, printed_gamma_sph=printed)
    else:
        _require(cfg, "layers", "alpha1")
        layers = int(cfg["layers"])
        if layers < 2:
            raise ConfigError("'layers' must be at least 2")
        res = minimal_sequence(layers, cfg["alpha1"], mode, method, config, grid, printed)[-1]
    payload = dict(command="capacity", **res.to_dict(), **_provenance(cfg))
    header = ["layers", "alpha_bound", "relative_expansion", "residual", "converged", "c3", "mode", "method"]
    rows = [[len(res.alphas), res.alpha_bound, res.relative_expansion, res.residual, res.converged,
             res.vars_at_opt.c3, mode.value, method.value]]
    diag = None if res.converged else {"error": "NotConverged", "residual": res.residual,
                                       "certificate": list(res.certificate)}
    return payload, header, rows, diag, None


def cmd_sequence(cfg):
    mode, method = _enums(cfg)
    _require(cfg, "max_layers", "alpha1")
    results = minimal_sequence(int(cfg["max_layers"]), float(cfg["alpha1"]), mode, method, _solver_config(cfg),
                               _grid(cfg), _printed(cfg))
    alphas = [r.alpha_bound for r in results]
    exps = [r.relative_expansion for r in results]
    payload = {"command": "sequence", "mode": mode.value, "method": method.value, "alphas": alphas,
               "expansions": exps, "results": [r.to_dict() if r.vars_at_opt else None for r in results],
               **_provenance(cfg)}
    header = ["quantity"] + [f"layer_{i}" for i in range(1, len(alphas) + 1)]
    rows = [["alpha"] + alphas, ["expansion"] + exps]
    bad = [i + 1 for i, r in enumerate(results) if not r.converged]
    diag = {"error": "NotConverged", "layers": bad} if bad else None
    plot = (lambda path: report.plot_sequence(path, alphas, exps))
    return payload, header, rows, diag, plot


def _vars_from(cfg):
    if cfg.get("input"):
        try:
            with open(cfg["input"]) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read input {cfg['input']}: {exc}") from None
        try:
            alphas = data["alphas"]
            vars = SaddleVariables.from_dict(data["vars"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"input {cfg['input']} lacks field {exc}") from None
        for key in ("mode", "grid_nodes", "compat_gamma_sph"):
            if key in data:
                cfg[key] = data[key]
        return alphas, vars
    _require(cfg, "alphas", "gamma_bar", "nu")
    try:
        vars = SaddleVariables(r=cfg.get("r") or (), gamma_bar=cfg["gamma_bar"], gamma=cfg.get("gamma") or (),
                               nu=cfg["nu"], c3=cfg.get("c3"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg["alphas"], vars


def cmd_evaluate(cfg):
    alphas, vars = _vars_from(cfg)
    mode, _ = _enums(cfg)
    try:
        profile = NetworkProfile(alphas, mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if vars.layers != profile.layers:
        raise ConfigError(f"variables describe {vars.layers} layers but 'alphas' has {profile.layers}")
    bd = evaluate(profile, vars, _grid(cfg), _printed(cfg))
    method = "plain" if vars.c3 is None else "lifted"
    payload = {"command": "evaluate", "alphas": list(profile.alphas), "mode": mode.value, "method": method,
               "vars": vars.to_dict(), "breakdown": bd.to_dict(), "total": bd.total, **_provenance(cfg)}
    header = ["term", "value"]
    rows = [[f"layer_{i + 1}", t] for i, t in enumerate(bd.layer_terms)]
    rows += [["last_layer", bd.last_layer_term], ["nu_term", bd.nu_term], ["constant", bd.constant_term],
             ["total", bd.total]]
    return payload, header, rows, None, None


def cmd_sweep(cfg):
    mode, method = _enums(cfg)
    _require(cfg, "alpha_grid")
    config, grid, printed = _solver_config(cfg), _grid(cfg), _printed(cfg)
    prefix = tuple(float(a) for a in cfg.get("prefix") or ())
    rows, start = [], None
    for a in sorted(float(x) for x in cfg["alpha_grid"]):
        try:
            profile = NetworkProfile(prefix + (a,), mode)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        rep = saddle_solve(profile, method, config, start=start, grid=grid, printed_gamma_sph=printed,
                           c3=cfg.get("c3"))
        start = rep.vars
        rows.append([a, rep.value, rep.vars.c3, rep.converged])
    header = ["alpha_l", "phi0", "c3", "converged"]
    payload = {"command": "sweep", "prefix": list(prefix), "mode": mode.value, "method": method.value,
               "rows": [dict(zip(header, r)) for r in rows], **_provenance(cfg)}
    plot = (lambda path: report.plot_sweep(path, [r[0] for r in rows], [r[1] for r in rows],
                                           f"{mode.value} {method.value}"))
    return payload, header, rows, None, plot


def cmd_simulate(cfg):
    mode, _ = _enums(cfg)
    _require(cfg, "alpha_grid")
    kw = {k: cfg[k] for k in ("stages", "steps_per_stage") if cfg.get(k) is not None}
    try:
        schedule = AnnealSchedule(**kw)
        table = phase_sweep(int(cfg["n"]), cfg.get("prefix") or (), cfg["alpha_grid"], mode, int(cfg["trials"]),
                            int(cfg["seed"]), int(cfg["restarts"]), schedule, cfg.get("workers") or 1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    header = ["alpha_l", "trials", "witnesses", "frequency"]
    rows = [[r.alpha_l, r.trials, r.witnesses, r.frequency] for r in table]
    payload = {"command": "simulate", "n": int(cfg["n"]), "prefix": list(cfg.get("prefix") or ()),
               "mode": mode.value, "seed": int(cfg["seed"]), "rows": [r.to_dict() for r in table]}
    plot = (lambda path: report.plot_phase(path, [r.alpha_l for r in table], [r.frequency for r in table],
                                           f"n={cfg['n']} {mode.value}"))
    return payload, header, rows, None, plot


COMMANDS = {"capacity": cmd_capacity, "sequence": cmd_sequence, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep, "simulate": cmd_simulate}


def _fail(code, kind, message, stream):
    stream.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=stderr)
    try:
        cfg = load_config(args.command, args.config, overrides)
        if cfg.get("format") not in ("json", "csv", "pretty"):
            raise ConfigError("format must be one of json, csv, pretty")
        payload, header, rows, diag, plot = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "ConfigError", str(exc), stderr)
    except (SolverError, DomainError, ArithmeticError) as exc:
        return _fail(EXIT_NUMERIC, type(exc).__name__, str(exc), stderr)

    text = report.render(cfg["format"], payload, header, rows)
    if cfg.get("output"):
        with open(cfg["output"], "w") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    if cfg.get("plot") and plot is not None:
        plot(cfg["plot"])
    if diag is not None:
        stderr.write(json.dumps(diag) + "\n")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
