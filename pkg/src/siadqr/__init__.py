"""Sparse quantile regression with MCP/SCAD penalties via smoothing ADMM."""
from .baselines import (BaselineConfig, Variant, hbad_solve, subgradient_solve,
                        vanilla_admm_solve)
from .core import (InvalidConfig, IterationRecord, ProblemInstance, SolveResult, SolverConfig,
                   SolverState, Termination, TRACE_COLUMNS, solve)
from .datagen import Scenario, ScenarioConfig, gen_trial
from .diagnostics import kkt_residual, rate_fit
from .experiment import ExperimentSpec, SolverEntry, load_spec, run_experiment, solve_file
from .penalties import PenaltyKind, PenaltyParams, penalty_prox

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig", "Variant", "hbad_solve", "subgradient_solve", "vanilla_admm_solve",
    "InvalidConfig", "IterationRecord", "ProblemInstance", "SolveResult", "SolverConfig",
    "SolverState", "Termination", "TRACE_COLUMNS", "solve",
    "Scenario", "ScenarioConfig", "gen_trial",
    "kkt_residual", "rate_fit",
    "ExperimentSpec", "SolverEntry", "load_spec", "run_experiment", "solve_file",
    "PenaltyKind", "PenaltyParams", "penalty_prox",
]
