"""Seeded experiment runner, file-based solving and trace post-processing.

Outputs are plain CSV/JSON and are byte-identical for identical inputs,
regardless of how many worker processes run the trials.
"""
from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import diagnostics as diag
from .baselines import (BaselineConfig, Variant, hbad_solve, subgradient_solve,
                        vanilla_admm_solve)
from .core import (DEFAULT_BETA, TRACE_COLUMNS, InvalidConfig, ProblemInstance, SolveResult,
                   SolverConfig, solve)
from .datagen import GeneratedTrial, Scenario, ScenarioConfig, gen_trial
from .penalties import PenaltyKind, PenaltyParams

__all__ = [
    "DataError",
    "SolverEntry",
    "ExperimentSpec",
    "TrialOutcome",
    "DEFAULT_GAMMA",
    "shipped_configs",
    "load_spec",
    "spec_from_mapping",
    "run_solver",
    "run_experiment",
    "write_trace",
    "read_trace",
    "read_problem_csv",
    "solve_file",
    "diagnose",
    "max_excursion",
]

DEFAULT_GAMMA = {PenaltyKind.MCP: 2.1, PenaltyKind.SCAD: 3.1}
DEFAULT_LAMBDA = 0.055
SIAD = "SIAD"
_METHODS = (SIAD, Variant.HBAD.value, Variant.VANILLA_ADMM.value, Variant.SUBGRADIENT.value)


class DataError(ValueError):
    """Malformed or non-finite input data."""


SolverLike = Union[SolverConfig, BaselineConfig]


@dataclass(frozen=True)
class SolverEntry:
    name: str
    config: SolverLike

    @property
    def method(self) -> str:
        if isinstance(self.config, SolverConfig):
            return SIAD
        return self.config.variant.value


@dataclass
class ExperimentSpec:
    """A scenario, a list of named solvers and the trial/seed layout.

    ``s_values`` turns a scenario-3 spec into a sweep; each value becomes a
    separate cell named ``s<value>``. ``zero_response`` replaces ``y`` by
    zeros, which is handy for smoke tests.
    """

    scenario: ScenarioConfig
    solvers: list[SolverEntry]
    trials: int = 1
    base_seed: int = 0
    name: str = "experiment"
    s_values: tuple[int, ...] | None = None
    zero_response: bool = False
    threshold: float = 1e-2

    def validate(self) -> None:
        if self.trials < 1:
            raise InvalidConfig("trials must be >= 1")
        if not self.solvers:
            raise InvalidConfig("at least one solver is required")
        names = [s.name for s in self.solvers]
        if len(set(names)) != len(names):
            raise InvalidConfig(f"solver names must be unique: {names}")
        for entry in self.solvers:
            if not entry.name or any(c in entry.name for c in "/\\ "):
                raise InvalidConfig(f"bad solver name {entry.name!r}")
            entry.config.validate()
        if self.s_values is not None and self.scenario.scenario is not Scenario.S3:
            raise InvalidConfig("s_values only applies to scenario S3")
        for cfg in self.cells().values():
            _ = cfg.signal_set()

    def cells(self) -> dict[str, ScenarioConfig]:
        if self.s_values is None:
            return {"main": self.scenario}
        out = {}
        for s in self.s_values:
            try:
                out[f"s{s}"] = replace(self.scenario, s=int(s))
            except ValueError as exc:
                raise InvalidConfig(str(exc)) from None
        return out


@dataclass
class TrialOutcome:
    cell: str
    solver: str
    trial: int
    seed: int
    rows: list[list]
    termination: str
    iterations: int
    min_lemma7_slack: float
    threshold_iter: int | None
    w: np.ndarray = field(repr=False)


# ---------------------------------------------------------------- configs

def shipped_configs() -> list[str]:
    """Names of the experiment configs bundled with the package."""
    root = resources.files("siadqr") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _read_toml(source) -> dict:
    path = Path(source)
    if not path.exists() and str(source) in shipped_configs():
        text = (resources.files("siadqr") / "configs" / f"{source}.toml").read_text()
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise InvalidConfig(f"{source}: {exc}") from None


def _take(section: dict, key: str, default, where: str, cast=float):
    if key not in section:
        return default
    val = section.pop(key)
    try:
        return cast(val) if val is not None else None
    except (TypeError, ValueError):
        raise InvalidConfig(f"[{where}] {key}: cannot interpret {val!r}") from None


def _no_leftovers(section: dict, where: str) -> None:
    if section:
        raise InvalidConfig(f"[{where}] unknown keys: {sorted(section)}")


def _penalty_from(section: Mapping) -> PenaltyParams:
    sec = dict(section)
    try:
        kind = PenaltyKind(str(sec.pop("kind", "MCP")).upper())
    except ValueError:
        raise InvalidConfig("[penalty] kind must be MCP or SCAD") from None
    lam = _take(sec, "lambda", DEFAULT_LAMBDA, "penalty")
    gam = _take(sec, "gamma", DEFAULT_GAMMA[kind], "penalty")
    _no_leftovers(sec, "penalty")
    try:
        return PenaltyParams(kind, lam, gam)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None


def _solver_from(name: str, section: Mapping, penalty: PenaltyParams, exp: Mapping) -> SolverEntry:
    where = f"solver.{name}"
    sec = dict(section)
    method = str(sec.pop("method", name))
    if method not in _METHODS:
        raise InvalidConfig(f"[{where}] method must be one of {_METHODS}, got {method!r}")
    common = dict(max_iters=_take(sec, "iters", exp["iters"], where, int),
                  trace_stride=_take(sec, "trace_stride", exp["trace_stride"], where, int),
                  check_stopping=_take(sec, "check_stopping", exp["check_stopping"], where, bool))
    if method == SIAD:
        cfg = SolverConfig(penalty=penalty,
                           c=_take(sec, "c", 0.5, where),
                           beta=_take(sec, "beta", DEFAULT_BETA, where),
                           sigma0=_take(sec, "sigma0", 1.0, where),
                           eps1=_take(sec, "eps1", 1e-3, where),
                           eps2=_take(sec, "eps2", 1e-3, where),
                           burn_in=_take(sec, "burn_in", 0, where, int), **common)
    else:
        cfg = BaselineConfig(variant=Variant(method), penalty=penalty,
                             fixed_mu=_take(sec, "mu", None, where),
                             fixed_sigma=_take(sec, "sigma", None, where),
                             step0=_take(sec, "step0", None, where),
                             step_decay=_take(sec, "step_decay", 0.5, where),
                             eps1=_take(sec, "eps1", 1e-3, where),
                             eps2=_take(sec, "eps2", 1e-3, where), **common)
    _no_leftovers(sec, where)
    return SolverEntry(name, cfg)


def spec_from_mapping(doc: Mapping[str, Any]) -> ExperimentSpec:
    """Build and validate an :class:`ExperimentSpec` from parsed TOML."""
    doc = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in doc.items()}
    exp = doc.pop("experiment", {})
    scen = doc.pop("scenario", {})
    pen = doc.pop("penalty", {})
    solvers = doc.pop("solver", {})
    _no_leftovers(doc, "top level")

    exp_vals = dict(name=_take(exp, "name", "experiment", "experiment", str),
                    trials=_take(exp, "trials", 1, "experiment", int),
                    base_seed=_take(exp, "seed", 0, "experiment", int),
                    threshold=_take(exp, "threshold", 1e-2, "experiment"))
    run_defaults = dict(iters=_take(exp, "iters", 5000, "experiment", int),
                        trace_stride=_take(exp, "trace_stride", 1, "experiment", int),
                        check_stopping=_take(exp, "check_stopping", True, "experiment", bool))
    _no_leftovers(exp, "experiment")

    s_values = scen.pop("s_values", None)
    zero = bool(scen.pop("zero_response", False))
    try:
        scenario = ScenarioConfig(
            scenario=Scenario(str(scen.pop("kind", "S1_2_4"))),
            n=_take(scen, "n", 100, "scenario", int),
            P=_take(scen, "P", 300, "scenario", int),
            tau=_take(scen, "tau", 0.7, "scenario"),
            s=_take(scen, "s", (s_values or [None])[0], "scenario",
                    lambda v: int(v)),
            noise_scale=_take(scen, "noise_scale", 0.7, "scenario"),
            xi_sd=_take(scen, "xi_sd", 1e-3, "scenario"),
            seed=exp_vals["base_seed"])
    except ValueError as exc:
        raise InvalidConfig(f"[scenario] {exc}") from None
    _no_leftovers(scen, "scenario")

    penalty = _penalty_from(pen)
    if not isinstance(solvers, Mapping) or not solvers:
        raise InvalidConfig("at least one [solver.NAME] section is required")
    entries = [_solver_from(name, sec, penalty, run_defaults) for name, sec in solvers.items()]
    spec = ExperimentSpec(scenario=scenario, solvers=entries,
                          s_values=tuple(int(s) for s in s_values) if s_values else None,
                          zero_response=zero, **exp_vals)
    spec.validate()
    return spec


def load_spec(source) -> ExperimentSpec:
    """Load a spec from a TOML path or the name of a bundled config."""
    return spec_from_mapping(_read_toml(source))


# ---------------------------------------------------------------- running

def run_solver(entry: SolverEntry | SolverLike, prob: ProblemInstance, truth=None, *,
               active_set=None, threshold: float = 1e-2, callback=None) -> SolveResult:
    """Dispatch to the solver matching the config type."""
    cfg = entry.config if isinstance(entry, SolverEntry) else entry
    kw = dict(active_set=active_set, threshold=threshold, callback=callback)
    if isinstance(cfg, SolverConfig):
        return solve(prob, cfg, truth, **kw)
    if cfg.variant is Variant.HBAD:
        return hbad_solve(prob, cfg, truth, **kw)
    if cfg.variant is Variant.VANILLA_ADMM:
        return vanilla_admm_solve(prob, cfg, truth, **kw)
    return subgradient_solve(prob, cfg, truth, **kw)


def _make_trial(cfg: ScenarioConfig, zero_response: bool) -> GeneratedTrial:
    trial = gen_trial(cfg)
    if zero_response:
        trial.y = np.zeros_like(trial.y)
    return trial


def _run_job(job) -> TrialOutcome:
    cell, cfg, entry, trial_idx, zero, threshold = job
    trial = _make_trial(cfg, zero)
    prob = ProblemInstance(trial.X, trial.y, trial.tau)
    res = run_solver(entry, prob, trial.w_true, active_set=trial.active_set, threshold=threshold)
    return TrialOutcome(cell=cell, solver=entry.name, trial=trial_idx, seed=cfg.seed,
                        rows=[rec.as_row() for rec in res.trace],
                        termination=res.termination.value, iterations=res.iterations,
                        min_lemma7_slack=res.min_lemma7_slack,
                        threshold_iter=res.threshold_iter, w=res.w)


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % v


def write_trace(rows: Sequence[Sequence], path) -> Path:
    path = Path(path)
    lines = [",".join(TRACE_COLUMNS)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")
    return path


def read_trace(path) -> dict[str, np.ndarray]:
    """Read a trace CSV into a mapping of column arrays."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != TRACE_COLUMNS:
                raise DataError(f"{path}:1: unexpected trace header")
            data = [[float(x) for x in row] for row in reader if row]
    except OSError as exc:
        raise OSError(f"cannot read trace {path}: {exc.strerror or exc}") from exc
    arr = np.array(data, dtype=float).reshape(-1, len(TRACE_COLUMNS))
    return {name: arr[:, j] for j, name in enumerate(TRACE_COLUMNS)}


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _summarise(outcomes: list[TrialOutcome]) -> list[list]:
    """Per-iteration trial means, carrying each trial's last value forward."""
    kcol = TRACE_COLUMNS.index("k")
    mcol = TRACE_COLUMNS.index("mse")
    acol = TRACE_COLUMNS.index("accuracy")
    ocol = TRACE_COLUMNS.index("objective")
    grid = sorted({int(r[kcol]) for o in outcomes for r in o.rows})
    series = []
    for o in outcomes:
        ks = np.array([r[kcol] for r in o.rows], dtype=float)
        vals = np.array([[r[mcol], r[acol], r[ocol]] for r in o.rows], dtype=float)
        series.append((ks, vals))
    out = []
    for k in grid:
        picked = []
        for ks, vals in series:
            idx = int(np.searchsorted(ks, k, side="right")) - 1
            if idx >= 0:
                picked.append(vals[idx])
        if not picked:
            continue
        m = np.mean(np.array(picked), axis=0)
        out.append([k, len(picked), float(m[0]), float(m[1]), float(m[2])])
    return out


def run_experiment(spec: ExperimentSpec, out_dir, workers: int = 1) -> dict:
    """Run every (cell, solver, trial) job and write traces plus summaries.

    Layout under ``out_dir``::

        traces/<cell>/<solver>/trial_<i>.csv
        summary.csv    cell, solver, k, trials, mean_mse, mean_accuracy, mean_objective
        summary.json   final per-solver aggregates

    Returns the summary document that is also written as JSON.
    """
    spec.validate()
    out_dir = Path(out_dir)
    jobs = []
    for cell, cfg in spec.cells().items():
        for entry in spec.solvers:
            for t in range(spec.trials):
                jobs.append((cell, cfg.with_seed(spec.base_seed + t), entry, t,
                             spec.zero_response, spec.threshold))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_job, jobs))
    else:
        outcomes = [_run_job(j) for j in jobs]

    width = max(3, len(str(spec.trials - 1)))
    groups: dict[tuple[str, str], list[TrialOutcome]] = {}
    for o in outcomes:
        write_trace(o.rows, out_dir / "traces" / o.cell / o.solver / f"trial_{o.trial:0{width}d}.csv")
        groups.setdefault((o.cell, o.solver), []).append(o)

    lines = ["cell,solver,k,trials,mean_mse,mean_accuracy,mean_objective"]
    doc: dict[str, Any] = {"name": spec.name, "trials": spec.trials,
                           "base_seed": spec.base_seed, "cells": {}}
    for (cell, solver), outs in groups.items():
        rows = _summarise(outs)
        lines += [",".join([cell, solver] + [_fmt(v) for v in row]) for row in rows]
        final = rows[-1]
        slacks = [o.min_lemma7_slack for o in outs if math.isfinite(o.min_lemma7_slack)]
        doc["cells"].setdefault(cell, {})[solver] = {
            "final_k": final[0],
            "final_mean_mse": final[2],
            "final_mean_accuracy": final[3],
            "final_mean_objective": final[4],
            "per_trial_final_mse": [o.rows[-1][TRACE_COLUMNS.index("mse")] for o in outs],
            "mean_iterations": float(np.mean([o.iterations for o in outs])),
            "converged_trials": sum(o.termination == "Converged" for o in outs),
            "min_lemma7_slack": min(slacks) if slacks else math.nan,
        }
    _write_text(out_dir / "summary.csv", "\n".join(lines) + "\n")
    _write_text(out_dir / "summary.json", json.dumps(_jsonable(doc), indent=1) + "\n")
    return doc


# ---------------------------------------------------------------- files

def read_problem_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Parse a ``y, x1, ..., xP`` CSV with a header row.

    Raises :class:`DataError` naming the offending line for ragged rows,
    unparsable or non-finite entries.
    """
    path = Path(path)
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or len(header) < 2:
            raise DataError(f"{path}:1: header needs a y column and at least one feature")
        width = len(header)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise DataError(f"{path}:{line}: expected {width} fields, found {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise DataError(f"{path}:{line}: cannot parse {bad.strip()!r} as a number") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{line}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    return data[:, 1:], data[:, 0]


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def solve_file(input_csv, entry: SolverEntry | SolverLike, tau: float, output=None) -> dict:
    """Solve the problem stored in ``input_csv`` and return a solution document.

    The document holds ``w``, ``termination``, ``iterations``, the final
    ``kkt`` residuals and the objective value. It is also written as JSON when
    ``output`` is given.
    """
    X, y = read_problem_csv(input_csv)
    try:
        prob = ProblemInstance(X, y, tau)
    except ValueError as exc:
        raise DataError(f"{input_csv}: {exc}") from None
    cfg = entry.config if isinstance(entry, SolverEntry) else entry
    res = run_solver(cfg, prob)
    kkt = diag.kkt_residual(res.w, res.z, res.psi, prob, cfg.penalty)
    doc = {
        "method": SolverEntry("x", cfg).method,
        "n": prob.n,
        "P": prob.P,
        "tau": tau,
        "termination": res.termination.value,
        "iterations": res.iterations,
        "objective": diag.objective(res.w, prob, cfg.penalty),
        "kkt": {"primal": kkt.primal, "dual_w": kkt.dual_w, "dual_z": kkt.dual_z},
        "w": [float(v) + 0.0 for v in res.w],
    }
    if output is not None:
        _write_text(Path(output), json.dumps(_jsonable(doc), indent=1) + "\n")
    return doc


# ---------------------------------------------------------------- traces

def max_excursion(trace, column: str = "exact_lagrangian", k_min: int = 0) -> float:
    """Largest increase between consecutive logged values with ``k > k_min``."""
    k = diag._column(trace, "k")
    v = diag._column(trace, column)
    keep = (k > k_min) & np.isfinite(v)
    v = v[keep]
    if v.size < 2:
        return math.nan
    return float(np.max(np.diff(v)))


def diagnose(trace_path, window: tuple[int, int] = (1000, 10000)) -> dict:
    """Re-evaluate the monitors recorded in a trace file.

    Reports the dual-difference slack extremes, the rate fits available in
    ``window`` and the largest late exact-Lagrangian increase.
    """
    tr = read_trace(trace_path)
    slack = tr["lemma7_slack"][np.isfinite(tr["lemma7_slack"])]
    out: dict[str, Any] = {
        "path": str(trace_path),
        "rows": int(tr["k"].size),
        "last_k": int(tr["k"][-1]) if tr["k"].size else 0,
        "min_lemma7_slack": float(slack.min()) if slack.size else math.nan,
        "lemma7_violations": int(np.sum(slack < -1e-8)),
        "max_late_excursion": max_excursion(tr, k_min=window[0]),
        "final_objective": float(tr["objective"][-1]) if tr["k"].size else math.nan,
        "rates": {},
    }
    for q in ("dw_sq", "sigma_primal_sq", "subgrad_bound"):
        try:
            fit = diag.rate_fit(tr, q, *window)
        except ValueError:
            continue
        out["rates"][q] = {"slope": fit.slope, "r2": fit.r2, "n_points": fit.n_points}
    return _jsonable(out)
