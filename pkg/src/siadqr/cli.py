"""Command-line entry point.

Exit status is 0 on success, 2 for invalid configurations or arguments and
3 for input/output failures (unreadable, unwritable or malformed files).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import DEFAULT_BETA, InvalidConfig
from .datagen import ScenarioConfig, export_trial, gen_trial
from .experiment import (DEFAULT_GAMMA, DataError, _penalty_from, _read_toml, _solver_from,
                         diagnose, run_experiment, shipped_configs, solve_file, spec_from_mapping)
from .penalties import PenaltyKind

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3

SOLVER_TEMPLATES = {
    "SIAD": {"method": "SIAD"},
    "SUB": {"method": "Subgradient", "step0": 0.5},
    "HBAD": {"method": "HBAD", "mu": 0.1, "sigma": DEFAULT_BETA / 0.1},
    "ADMM": {"method": "VanillaADMM", "sigma": 1.0},
}
_SCENARIO_ALIASES = {"1": "S1_2_4", "2": "S1_2_4", "4": "S1_2_4", "3": "S3",
                     "S1": "S1_2_4", "S2": "S1_2_4", "S4": "S1_2_4"}


def _scenario_name(text: str) -> str:
    return _SCENARIO_ALIASES.get(text.upper(), text.upper())


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="siadqr", description="Sparse penalised quantile regression.")
    sub = ap.add_subparsers(dest="command", required=True)

    sc = sub.add_parser("scenario", help="run a seeded simulation experiment")
    sc.add_argument("--config", help="TOML file or bundled config name")
    sc.add_argument("--scenario", help="S1_2_4 (aliases 1, 2, 4) or S3 (alias 3)")
    sc.add_argument("--penalty", type=str.upper, choices=["MCP", "SCAD"])
    sc.add_argument("--tau", type=float)
    sc.add_argument("--lambda", dest="lam", type=float)
    sc.add_argument("--gamma", type=float)
    sc.add_argument("--c", type=float)
    sc.add_argument("--beta", type=float)
    sc.add_argument("--iters", type=int)
    sc.add_argument("--trace-stride", type=int)
    sc.add_argument("--trials", type=int)
    sc.add_argument("--seed", type=int)
    sc.add_argument("--n", type=int)
    sc.add_argument("--P", type=int)
    sc.add_argument("--s", type=int)
    sc.add_argument("--s-values", type=_int_list)
    sc.add_argument("--solvers", help="comma-separated solver names, e.g. SIAD,SUB,HBAD,ADMM")
    sc.add_argument("--workers", type=int, default=1)
    sc.add_argument("--out", required=True, help="output directory")

    so = sub.add_parser("solve", help="solve a problem stored as CSV (y, x1, ..., xP)")
    so.add_argument("--input", required=True)
    so.add_argument("--tau", type=float, required=True)
    so.add_argument("--penalty", type=str.upper, choices=["MCP", "SCAD"], default="MCP")
    so.add_argument("--lambda", dest="lam", type=float, default=0.055)
    so.add_argument("--gamma", type=float)
    so.add_argument("--method", default="SIAD",
                    choices=["SIAD", "HBAD", "VanillaADMM", "Subgradient"])
    so.add_argument("--iters", type=int, default=5000)
    so.add_argument("--c", type=float)
    so.add_argument("--beta", type=float)
    so.add_argument("--sigma0", type=float)
    so.add_argument("--mu", type=float)
    so.add_argument("--sigma", type=float)
    so.add_argument("--step0", type=float)
    so.add_argument("--no-stopping", action="store_true")
    so.add_argument("--output", help="write the solution JSON here instead of stdout")

    dg = sub.add_parser("diagnose", help="re-run monitors over trace CSV files")
    dg.add_argument("traces", nargs="+")
    dg.add_argument("--window", type=int, nargs=2, default=(1000, 10000), metavar=("K_LO", "K_HI"))

    ex = sub.add_parser("export", help="write one generated trial as CSV plus truth sidecar")
    ex.add_argument("--scenario", default="S1_2_4")
    ex.add_argument("--n", type=int, default=100)
    ex.add_argument("--P", type=int, default=300)
    ex.add_argument("--tau", type=float, default=0.7)
    ex.add_argument("--s", type=int)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--out", required=True)

    sub.add_parser("configs", help="list bundled experiment configs")
    return ap


def _scenario_doc(args) -> dict:
    doc = _read_toml(args.config) if args.config else {
        "experiment": {}, "scenario": {}, "penalty": {},
        "solver": {"SIAD": dict(SOLVER_TEMPLATES["SIAD"]), "SUB": dict(SOLVER_TEMPLATES["SUB"])}}
    for key in ("experiment", "scenario", "penalty", "solver"):
        doc.setdefault(key, {})
    exp, scen, pen, solvers = doc["experiment"], doc["scenario"], doc["penalty"], doc["solver"]

    for flag, key in (("iters", "iters"), ("trace_stride", "trace_stride"),
                      ("trials", "trials"), ("seed", "seed")):
        if getattr(args, flag) is not None:
            exp[key] = getattr(args, flag)
    if args.scenario is not None:
        scen["kind"] = _scenario_name(args.scenario)
    for flag in ("tau", "n", "P", "s"):
        if getattr(args, flag) is not None:
            scen[flag] = getattr(args, flag)
    if args.s_values is not None:
        scen["s_values"] = args.s_values
    if args.penalty is not None and args.penalty != str(pen.get("kind", "MCP")).upper():
        pen["kind"] = args.penalty
        pen["gamma"] = DEFAULT_GAMMA[PenaltyKind(args.penalty)]
    if args.lam is not None:
        pen["lambda"] = args.lam
    if args.gamma is not None:
        pen["gamma"] = args.gamma

    if args.solvers:
        wanted = [s.strip() for s in args.solvers.split(",") if s.strip()]
        picked = {}
        for name in wanted:
            if name in solvers:
                picked[name] = solvers[name]
            elif name in SOLVER_TEMPLATES:
                picked[name] = dict(SOLVER_TEMPLATES[name])
            else:
                raise InvalidConfig(f"unknown solver {name!r}; known: "
                                    f"{sorted(set(solvers) | set(SOLVER_TEMPLATES))}")
        doc["solver"] = solvers = picked
    for sec in solvers.values():
        if sec.get("method", "SIAD") == "SIAD":
            if args.c is not None:
                sec["c"] = args.c
            if args.beta is not None:
                sec["beta"] = args.beta
    return doc


def _cmd_scenario(args) -> int:
    spec = spec_from_mapping(_scenario_doc(args))
    doc = run_experiment(spec, args.out, workers=max(1, args.workers))
    for cell, per_solver in doc["cells"].items():
        for solver, agg in per_solver.items():
            print(f"{cell:>6} {solver:<14} k={agg['final_k']:<6} "
                  f"mse={agg['final_mean_mse']:.6g} acc={agg['final_mean_accuracy']:.4f}")
    print(f"wrote {Path(args.out) / 'summary.csv'}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    sec = {"method": args.method}
    for flag in ("c", "beta", "sigma0", "mu", "sigma", "step0"):
        if getattr(args, flag) is not None:
            sec[flag] = getattr(args, flag)
    kind = PenaltyKind(args.penalty)
    penalty = _penalty_from({"kind": kind.value, "lambda": args.lam,
                             "gamma": args.gamma if args.gamma is not None else DEFAULT_GAMMA[kind]})
    entry = _solver_from(args.method, sec, penalty,
                         {"iters": args.iters, "trace_stride": args.iters,
                          "check_stopping": not args.no_stopping})
    entry.config.validate()
    if not 0 < args.tau < 1:
        raise InvalidConfig(f"tau must lie in (0, 1), got {args.tau}")
    doc = solve_file(args.input, entry, args.tau, output=args.output)
    if args.output is None:
        print(json.dumps(doc, indent=1))
    else:
        print(f"{doc['termination']} after {doc['iterations']} iterations; wrote {args.output}")
    return EXIT_OK


def _cmd_diagnose(args) -> int:
    out = [diagnose(p, window=tuple(args.window)) for p in args.traces]
    print(json.dumps(out if len(out) > 1 else out[0], indent=1))
    return EXIT_OK


def _cmd_export(args) -> int:
    try:
        cfg = ScenarioConfig(scenario=_scenario_name(args.scenario), n=args.n, P=args.P,
                             tau=args.tau, s=args.s, seed=args.seed)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    csv_path, side = export_trial(gen_trial(cfg), args.out)
    print(f"wrote {csv_path} and {side}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {"scenario": _cmd_scenario, "solve": _cmd_solve, "diagnose": _cmd_diagnose,
                "export": _cmd_export,
                "configs": lambda _a: print("\n".join(shipped_configs())) or EXIT_OK}
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidConfig, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
