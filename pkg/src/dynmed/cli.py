"""Command-line front end: ``dynmed <command> [options]``.

Every run writes ``manifest.json`` to the output directory with the full
configuration, the seed, the package version and a SHA-256 hash of the
configuration. Passing that manifest back through ``--params`` reproduces
the run; explicit flags override values read from it.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__, bellman, benchmark, device, simulate, welfare
from .errors import (
    DegenerateError,
    DomainError,
    Infeasible,
    NonConvergence,
    OptimalityViolation,
    RegimeError,
    SlopeSignError,
    ValidationError,
)
from .model import PARAM_KEYS, derive, validate

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SIG = 12
FMT = f".{SIG}g"

CANONICAL = {"p": 0.75, "q": 0.25, "g": 1.0, "b": -1.0, "w": 1.0, "r": 1.0, "delta": 0.9, "beta": 0.5}

# per-command options and their defaults; None means "not applicable unless given"
COMMON_DEFAULTS = {"grid_n": bellman.DEFAULT_N, "tol": bellman.DEFAULT_TOL, "seed": 0}
COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
    "derive": {},
    "benchmark": {"variant": "pure"},
    "solve": {"verify": False, "oracle_step": 1e-2, "tol_gap": 5e-3},
    "policy": {},
    "simulate": {"u0": None, "horizon": None, "paths": 10_000, "dump": 0},
    "welfare": {"delta_star": False, "delta_star_tol": 1e-3},
    "sweep": {"deltas": None},
}


class InputError(Exception):
    """Bad command-line or configuration input."""


def _round(obj):
    """Round floats to 12 significant digits for stable, exact-enough output."""
    if isinstance(obj, (bool, type(None), str, int)) and not isinstance(obj, np.integer):
        return obj
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, FMT))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, dict):
        return {str(k): _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_round(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_round(obj), indent=2, sort_keys=True) + "\n"


def config_hash(config: dict) -> str:
    blob = json.dumps(_round(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path} must contain a JSON object")
    return data


def build_config(args: argparse.Namespace) -> dict:
    """Merge manifest/params file, defaults and explicit flags into one config."""
    command = args.command
    base: dict[str, Any] = {}
    params: dict[str, Any] = dict(CANONICAL)
    if args.params:
        data = _read_json(args.params)
        if "config" in data and isinstance(data["config"], dict):
            base = dict(data["config"])
            params.update(base.pop("params", {}))
        elif "params" in data and isinstance(data["params"], dict):
            params.update(data["params"])
        else:
            params.update({k: v for k, v in data.items() if k in PARAM_KEYS})
    for k in PARAM_KEYS:
        val = getattr(args, f"param_{k}", None)
        if val is not None:
            params[k] = val

    opts = {**COMMON_DEFAULTS, **COMMAND_DEFAULTS[command]}
    for k in opts:
        if k in base:
            opts[k] = base[k]
        val = getattr(args, k, None)
        if val is not None:
            opts[k] = val
    if opts["grid_n"] < 101:
        raise InputError("--grid-n must be at least 101")
    if opts["tol"] <= 0:
        raise InputError("--tol must be positive")
    return {"command": command, "params": params, **opts}


def write_manifest(out: Path, config: dict) -> dict:
    manifest = {
        "config": config,
        "seed": config["seed"],
        "version": __version__,
        "config_hash": config_hash(config),
    }
    (out / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return manifest


def _emit(out: Path, name: str, payload: dict) -> None:
    text = dumps(payload)
    (out / name).write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def _solve(dq, config):
    grid = bellman.make_grid(dq, config["grid_n"])
    return bellman.policy_evaluate(dq, grid, tol=config["tol"])


def cmd_derive(config, out: Path) -> int:
    dq = derive(validate(config["params"]))
    _emit(out, "derived.json", {"params": dq.params.to_dict(), **dq.to_dict()})
    return EXIT_OK


def cmd_benchmark(config, out: Path) -> int:
    dq = derive(validate(config["params"]))
    ppe = benchmark.ppe_payoff_set(dq)
    payload: dict[str, Any] = {
        "regime": dq.regime.value,
        "ppe_set": {"degenerate": ppe.degenerate, "worker_interval": list(ppe.worker_interval),
                    "vertices": [list(v) for v in ppe.vertices], "pareto_optimal": list(ppe.pareto_optimal)},
        "automaton": None,
    }
    if dq.benchmark_nondegenerate:
        auto = benchmark.build_automaton(dq, config["variant"])
        payload["automaton"] = auto.to_dict()
        payload.update({"gamma": auto.gamma, "W_N": auto.W_N})
    _emit(out, "benchmark.json", payload)
    return EXIT_OK


def write_F_csv(path: Path, F) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["U", "F"])
        for u, f in zip(F.nodes, F.values):
            wr.writerow([format(float(u), FMT), format(float(f), FMT)])


def cmd_solve(config, out: Path) -> int:
    dq = derive(validate(config["params"]))
    if not dq.mediation_nontrivial:
        (out / "F.csv").write_text("U,F\n0,0\n", encoding="utf-8")
        _emit(out, "report.json", {
            "degenerate": True,
            "note": f"delta={dq.params.delta} < delta_lo={dq.delta_lo}: mediated payoff set is {{(0,0)}}, F = 0 on {{0}}",
        })
        return EXIT_OK
    F = _solve(dq, config)
    write_F_csv(out / "F.csv", F)
    lin = F.nodes <= dq.U_I * (1 + 1e-12)
    report: dict[str, Any] = {
        "degenerate": False,
        "grid_n": F.grid.n,
        "iterations": F.iterations,
        "last_change": F.last_change,
        "error_bound": F.error_bound,
        "F_at": {name: F(val) for name, val in sorted(F.grid.distinguished.items())} | {"U_bar": F(dq.U_bar)},
        "linear_segment_slope": dq.v_bar / dq.params.w if dq.benchmark_nondegenerate else None,
        "linear_segment_max_error": (float(np.max(np.abs(F.values[lin] - dq.v_bar / dq.params.w * F.nodes[lin])))
                                     if dq.benchmark_nondegenerate else None),
        "shape": bellman.shape_report(dq, F),
    }
    code = EXIT_OK
    if config["verify"]:
        step = config["oracle_step"]
        rep = bellman.verify_policy_optimality(dq, F, tol_gap=config["tol_gap"], prob_step=step,
                                               util_step=step, raise_on_fail=False)
        report["oracle"] = rep.summary()
        with open(out / "oracle.json", "w", encoding="utf-8") as fh:
            fh.write(dumps(list(rep.rows())))
        if not rep.passed:
            code = EXIT_NUMERIC
    _emit(out, "report.json", report)
    return code


def cmd_policy(config, out: Path) -> int:
    dq = derive(validate(config["params"]))
    if not dq.mediation_nontrivial:
        raise DegenerateError("mediated payoff set is degenerate; no device to tabulate")
    grid = bellman.make_grid(dq, config["grid_n"])
    rows = device.policy_table(dq, grid.nodes)
    device.write_policy_csv(out / "policy.csv", rows, FMT)
    _emit(out, "policy.json", {"rows": len(rows), "regions": sorted({r["region"] for r in rows})})
    return EXIT_OK


def cmd_simulate(config, out: Path) -> int:
    dq = derive(validate(config["params"]))
    if not dq.mediation_nontrivial:
        raise DegenerateError("mediated payoff set is degenerate; nothing to simulate")
    F = _solve(dq, config)
    U0 = config["u0"] if config["u0"] is not None else device.initial_utility(dq, F)
    if config["paths"] < 1:
        raise InputError("--paths must be at least 1")
    stats, traj = simulate.simulate(dq, U0, config["horizon"], config["paths"], config["seed"],
                                    n_record=config["dump"])
    payload = stats.to_dict()
    payload["F_at_U0"] = F(stats.U0)
    if traj is not None:
        simulate.write_trajectories_csv(out / "trajectories.csv", traj, dq, FMT)
    _emit(out, "stats.json", payload)
    return EXIT_OK


def cmd_welfare(config, out: Path) -> int:
    prm = validate(config["params"])
    dq = derive(prm)
    F = _solve(dq, config) if dq.mediation_nontrivial else None
    rep = welfare.welfare_report(dq, F)
    payload = rep.to_dict()
    if config["delta_star"]:
        ds = welfare.find_delta_star(prm, tol=config["delta_star_tol"], grid_n=config["grid_n"])
        payload["delta_star"] = ds.delta_star
        (out / "delta_star.json").write_text(dumps(ds.to_dict()), encoding="utf-8")
    _emit(out, "welfare.json", payload)
    return EXIT_OK


def cmd_sweep(config, out: Path) -> int:
    deltas = config["deltas"]
    if not deltas:
        raise InputError("sweep needs a non-empty --deltas list")
    prm = validate(config["params"])
    rows = welfare.antifolk_sweep(prm, deltas, grid_n=config["grid_n"], tol=config["tol"])
    welfare.write_sweep_csv(out / "sweep.csv", rows, FMT)
    _emit(out, "sweep.json", {"rows": len(rows), "kappa_witness": welfare.kappa_witness(rows)})
    return EXIT_OK


COMMANDS = {
    "derive": cmd_derive,
    "benchmark": cmd_benchmark,
    "solve": cmd_solve,
    "policy": cmd_policy,
    "simulate": cmd_simulate,
    "welfare": cmd_welfare,
    "sweep": cmd_sweep,
}


def _delta_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad delta list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="JSON file with parameters, or a manifest.json from an earlier run")
    for k in PARAM_KEYS:
        common.add_argument(f"--{k}", dest=f"param_{k}", type=float, default=None, help=f"override parameter {k}")
    common.add_argument("--grid-n", dest="grid_n", type=int, default=None, help="grid nodes (>= 101)")
    common.add_argument("--tol", type=float, default=None, help="value-iteration tolerance")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=".", help="output directory (default: current directory)")

    parser = argparse.ArgumentParser(prog="dynmed", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dynmed {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("derive", parents=[common], help="closed-form constants and regime")
    p = sub.add_parser("benchmark", parents=[common], help="no-mediation PPE set and automaton")
    p.add_argument("--variant", choices=("pure", "mixed"), default=None)
    p = sub.add_parser("solve", parents=[common], help="value function F on the grid")
    p.add_argument("--verify", action="store_const", const=True, default=None, help="run the brute-force oracle")
    p.add_argument("--oracle-step", dest="oracle_step", type=float, default=None)
    p.add_argument("--tol-gap", dest="tol_gap", type=float, default=None)
    sub.add_parser("policy", parents=[common], help="optimal device table over the grid")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo runs of the device")
    p.add_argument("--u0", type=float, default=None, help="initial promise (default: optimal for beta)")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--paths", type=int, default=None)
    p.add_argument("--dump", type=int, default=None, help="number of paths to write to trajectories.csv")
    p = sub.add_parser("welfare", parents=[common], help="first best, mediated value and gap")
    p.add_argument("--delta-star", dest="delta_star", action="store_const", const=True, default=None,
                   help="also search the cutoff delta*")
    p.add_argument("--delta-star-tol", dest="delta_star_tol", type=float, default=None)
    p = sub.add_parser("sweep", parents=[common], help="anti-folk gap over a list of discount factors")
    p.add_argument("--deltas", type=_delta_list, default=None, help="comma-separated discount factors")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = build_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_manifest(out, config)
        return COMMANDS[args.command](config, out)
    except (NonConvergence, OptimalityViolation, Infeasible, SlopeSignError, DegenerateError, RegimeError) as exc:
        print(f"dynmed: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValidationError, DomainError, ValueError, OSError) as exc:
        print(f"dynmed: input error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
