"""Comparison solvers: fixed-parameter smoothing ADMM, plain ADMM, subgradient method."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .core import (InvalidConfig, IterationRecord, ProblemInstance, SolveResult, SolverConfig,
                   Termination, _metrics, _run_admm)
from .penalties import PenaltyParams, penalty_subgradient_interval

__all__ = ["Variant", "BaselineConfig", "hbad_solve", "vanilla_admm_solve",
           "subgradient_solve", "hbad_as_siad_config"]


class Variant(str, enum.Enum):
    HBAD = "HBAD"
    VANILLA_ADMM = "VanillaADMM"
    SUBGRADIENT = "Subgradient"


@dataclass
class BaselineConfig:
    variant: Variant
    penalty: PenaltyParams
    max_iters: int = 5000
    fixed_mu: Optional[float] = None
    fixed_sigma: Optional[float] = None
    step0: Optional[float] = None
    step_decay: float = 0.5
    trace_stride: int = 1
    check_stopping: bool = True
    eps1: float = 1e-3
    eps2: float = 1e-3

    def __post_init__(self):
        self.variant = Variant(self.variant)

    def validate(self) -> None:
        needs = {
            Variant.HBAD: {"fixed_mu", "fixed_sigma"},
            Variant.VANILLA_ADMM: {"fixed_sigma"},
            Variant.SUBGRADIENT: {"step0"},
        }[self.variant]
        for name in ("fixed_mu", "fixed_sigma", "step0"):
            val = getattr(self, name)
            if name in needs:
                if val is None or not (math.isfinite(val) and val > 0):
                    raise InvalidConfig(f"{self.variant.value} needs a positive {name}")
            elif val is not None:
                raise InvalidConfig(f"{name} does not apply to {self.variant.value}")
        if self.max_iters < 1 or self.trace_stride < 1:
            raise InvalidConfig("max_iters and trace_stride must be >= 1")


def hbad_as_siad_config(cfg: BaselineConfig) -> SolverConfig:
    """SIAD configuration whose schedules stay frozen at the HBAD constants."""
    return SolverConfig(penalty=cfg.penalty, c=1.0, beta=cfg.fixed_sigma * cfg.fixed_mu,
                        sigma0=cfg.fixed_sigma, max_iters=cfg.max_iters, eps1=cfg.eps1,
                        eps2=cfg.eps2, burn_in=cfg.max_iters + 1,
                        trace_stride=cfg.trace_stride, check_stopping=cfg.check_stopping)


def hbad_solve(prob: ProblemInstance, cfg: BaselineConfig, truth=None, **kw) -> SolveResult:
    """Smoothing ADMM with smoothing level and penalty parameter held fixed."""
    if cfg.variant is not Variant.HBAD:
        raise InvalidConfig("hbad_solve needs an HBAD config")
    cfg.validate()
    scfg = hbad_as_siad_config(cfg)
    scfg.validate(enforce_beta=False)
    return _run_admm(prob, scfg, exact_z=False, truth=truth, **kw)


def vanilla_admm_solve(prob: ProblemInstance, cfg: BaselineConfig, truth=None, **kw) -> SolveResult:
    """Multi-block ADMM on the exact check loss with a fixed penalty parameter.

    No convergence guarantee; oscillating traces are expected for MCP.
    """
    if cfg.variant is not Variant.VANILLA_ADMM:
        raise InvalidConfig("vanilla_admm_solve needs a VanillaADMM config")
    cfg.validate()
    scfg = SolverConfig(penalty=cfg.penalty, c=1.0, beta=1.0, sigma0=cfg.fixed_sigma,
                        max_iters=cfg.max_iters, eps1=cfg.eps1, eps2=cfg.eps2,
                        burn_in=cfg.max_iters + 1, trace_stride=cfg.trace_stride,
                        check_stopping=cfg.check_stopping)
    scfg.validate(enforce_beta=False)
    return _run_admm(prob, scfg, exact_z=True, truth=truth, **kw)


def _check_subgradient(u, tau):
    # tau - 1[u < 0], with the midpoint tau - 1/2 at the kink
    return np.where(u > 0, tau, np.where(u < 0, tau - 1.0, tau - 0.5))


def subgradient_solve(prob: ProblemInstance, cfg: BaselineConfig, truth=None, *,
                      active_set=None, threshold: float = 1e-2, callback=None) -> SolveResult:
    """Decaying-step subgradient method on the penalised objective.

    Steps are ``step0 / (k + 1) ** step_decay``. The returned coefficients and
    the logged objective/metrics refer to the best iterate seen so far.
    """
    if cfg.variant is not Variant.SUBGRADIENT:
        raise InvalidConfig("subgradient_solve needs a Subgradient config")
    cfg.validate()
    pen = cfg.penalty
    X, y, tau, n = prob.X, prob.y, prob.tau, prob.n
    truth = None if truth is None else np.asarray(truth, dtype=float)
    w = np.zeros(prob.P)
    xw = np.zeros(n)
    best_w = w.copy()
    best_obj = diag.objective(w, prob, pen, xw=xw)
    trace = []
    nan = math.nan
    for k in range(cfg.max_iters):
        u = y - xw
        lo, hi = penalty_subgradient_interval(w, pen)
        s = -(X.T @ _check_subgradient(u, tau)) / n + 0.5 * (lo + hi)
        step = cfg.step0 / (k + 1) ** cfg.step_decay
        w = w - step * s
        xw = X @ w
        obj = diag.objective(w, prob, pen, xw=xw)
        if obj < best_obj:
            best_obj, best_w = obj, w.copy()
        kk = k + 1
        if kk % cfg.trace_stride == 0 or kk == cfg.max_iters:
            mse, acc = _metrics(best_w, truth, active_set, threshold)
            trace.append(IterationRecord(
                k=kk, sigma=nan, mu=nan, objective=best_obj, smoothed_lagrangian=nan,
                exact_lagrangian=nan, primal_res=nan, dw_sq=float(step * step * (s @ s)),
                dz_sq=nan, dpsi_sq=nan, lemma7_slack=nan, subgrad_bound=nan,
                mse=mse, accuracy=acc))
    return SolveResult(w=best_w, z=y - X @ best_w, psi=np.zeros(n), trace=trace,
                       termination=Termination.MAX_ITERS, iterations=cfg.max_iters)
