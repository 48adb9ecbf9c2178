"""Smoothing ADMM with an increasing penalty parameter (SIAD).

Each iteration raises the penalty ``sigma = c * sqrt(k + 1)``, lowers the
smoothing level ``mu = beta / sigma``, sweeps the coefficients one at a time
through the penalty's proximal map, takes the closed-form smoothed z-step and
finishes with a dual ascent step on the constraint ``z + X w = y``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from . import diagnostics as diag
from ._kernels import coordinate_sweep
from .penalties import PenaltyParams
from .smoothing import prox_abs, prox_smoothed_abs

__all__ = [
    "ProblemInstance",
    "SolverConfig",
    "SolverState",
    "IterationRecord",
    "Termination",
    "SolveResult",
    "sigma_schedule",
    "mu_schedule",
    "w_coordinate_target",
    "w_sweep",
    "z_update",
    "dual_update",
    "stopping_check",
    "solve",
    "TRACE_COLUMNS",
]

DEFAULT_BETA = math.sqrt(3.0)
REFRESH_EVERY = 1000


class InvalidConfig(ValueError):
    pass


@dataclass
class ProblemInstance:
    """Design ``X`` (n x P), response ``y`` and quantile level ``tau``."""

    X: np.ndarray
    y: np.ndarray
    tau: float
    col_sqnorms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.asfortranarray(np.asarray(self.X, dtype=float))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=float).ravel())
        if X.ndim != 2:
            raise InvalidConfig("X must be two-dimensional")
        if X.shape[0] != y.size:
            raise InvalidConfig(f"X has {X.shape[0]} rows but y has {y.size} entries")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise InvalidConfig("X and y must be finite")
        if not 0.0 < self.tau < 1.0:
            raise InvalidConfig(f"tau must lie in (0, 1), got {self.tau}")
        self.X, self.y = X, y
        self.col_sqnorms = np.einsum("ij,ij->j", X, X)
        if np.any(self.col_sqnorms <= 0):
            zero = np.flatnonzero(self.col_sqnorms <= 0)
            raise InvalidConfig(f"design columns {zero.tolist()} are identically zero")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def P(self) -> int:
        return self.X.shape[1]


@dataclass
class SolverConfig:
    penalty: PenaltyParams
    c: float = 0.5
    beta: float = DEFAULT_BETA
    sigma0: float = 1.0
    max_iters: int = 5000
    eps1: float = 1e-3
    eps2: float = 1e-3
    burn_in: int = 0
    trace_stride: int = 1
    check_stopping: bool = True

    def validate(self, enforce_beta: bool = True) -> None:
        for name in ("c", "beta", "sigma0", "eps1", "eps2"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0):
                raise InvalidConfig(f"{name} must be positive and finite, got {val}")
        if enforce_beta and self.beta < DEFAULT_BETA - 1e-12:
            raise InvalidConfig(f"beta must be at least sqrt(3), got {self.beta}")
        if self.max_iters < 1 or self.trace_stride < 1 or self.burn_in < 0:
            raise InvalidConfig("max_iters and trace_stride must be >= 1, burn_in >= 0")


@dataclass
class SolverState:
    """Iterate ``(w, z, psi)`` with its schedule values and one step of history.

    ``r`` caches ``X @ w``. ``*_prev`` hold the previous iterate (``None``
    before the first step).
    """

    w: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    sigma: float
    mu: float
    k: int
    r: np.ndarray
    w_prev: Optional[np.ndarray] = None
    z_prev: Optional[np.ndarray] = None
    psi_prev: Optional[np.ndarray] = None
    sigma_prev: Optional[float] = None
    mu_prev: Optional[float] = None

    @classmethod
    def zeros(cls, prob: ProblemInstance, sigma: float, mu: float) -> "SolverState":
        return cls(w=np.zeros(prob.P), z=np.zeros(prob.n), psi=np.zeros(prob.n),
                   sigma=sigma, mu=mu, k=0, r=np.zeros(prob.n))

    def copy(self) -> "SolverState":
        def cp(a):
            return None if a is None else a.copy()
        return SolverState(w=self.w.copy(), z=self.z.copy(), psi=self.psi.copy(),
                           sigma=self.sigma, mu=self.mu, k=self.k, r=self.r.copy(),
                           w_prev=cp(self.w_prev), z_prev=cp(self.z_prev),
                           psi_prev=cp(self.psi_prev), sigma_prev=self.sigma_prev,
                           mu_prev=self.mu_prev)


@dataclass
class IterationRecord:
    k: int
    sigma: float
    mu: float
    objective: float
    smoothed_lagrangian: float
    exact_lagrangian: float
    primal_res: float
    dw_sq: float
    dz_sq: float
    dpsi_sq: float
    lemma7_slack: float
    subgrad_bound: float
    mse: float = math.nan
    accuracy: float = math.nan

    def as_row(self) -> list:
        return [getattr(self, f.name) for f in fields(self)]


TRACE_COLUMNS = [f.name for f in fields(IterationRecord)]


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxIters"


@dataclass
class SolveResult:
    w: np.ndarray
    z: np.ndarray
    psi: np.ndarray
    trace: list
    termination: Termination
    iterations: int
    threshold_iter: Optional[int] = None
    min_lemma7_slack: float = math.nan
    final_state: Optional[SolverState] = None


def sigma_schedule(k: int, cfg: SolverConfig) -> float:
    """Penalty parameter used in iteration ``k`` (0-based)."""
    if k < cfg.burn_in:
        return cfg.sigma0
    return max(cfg.sigma0, cfg.c * math.sqrt(k + 1))


def mu_schedule(sigma: float, cfg: SolverConfig) -> float:
    return cfg.beta / sigma


def w_coordinate_target(state: SolverState, prob: ProblemInstance, p: int) -> float:
    """Centre ``a_p`` of the quadratic in the coordinate subproblem for ``w_p``."""
    xp = prob.X[:, p]
    v = prob.y - state.z - state.psi / state.sigma - state.r
    return float(state.w[p] + xp @ v / prob.col_sqnorms[p])


def w_sweep(state: SolverState, prob: ProblemInstance, cfg: SolverConfig) -> float:
    """Update every ``w_p`` in ascending order; returns ``||w_new - w_old||^2``."""
    pen = cfg.penalty
    v = prob.y - state.z - state.psi / state.sigma
    return coordinate_sweep(prob.X, prob.col_sqnorms, v, state.w, state.r,
                            pen.code, pen.lam, pen.gamma, state.sigma)


def z_update(state: SolverState, prob: ProblemInstance, exact: bool = False) -> float:
    """Closed-form z-step; returns ``||z_new - z_old||^2``.

    The subproblem's stationarity gives a prox with step ``1 / (2 sigma)``.
    ``exact`` uses the unsmoothed absolute value (soft thresholding).
    """
    alpha = (prob.y - state.r) - (state.psi + (prob.tau - 0.5)) / state.sigma
    step = 0.5 / state.sigma
    if exact:
        z_new = prox_abs(alpha, step)
    else:
        z_new = prox_smoothed_abs(alpha, step, state.mu)
    dz = z_new - state.z
    state.z = z_new
    return float(dz @ dz)


def dual_update(state: SolverState, prob: ProblemInstance) -> float:
    """Multiplier ascent step; returns ``||psi_new - psi_old||^2``."""
    step = state.sigma * (state.z + state.r - prob.y)
    state.psi = state.psi + step
    return float(step @ step)


def stopping_check(prev: SolverState, cur: SolverState, prob: ProblemInstance,
                   cfg: SolverConfig) -> bool:
    """Primal and dual residual tests adapted from the standard ADMM criteria."""
    res = cur.z + cur.r - prob.y
    primal = float(np.linalg.norm(res))
    scale = max(float(np.linalg.norm(cur.r)), float(np.linalg.norm(cur.z)),
                float(np.linalg.norm(prob.y)))
    if primal > math.sqrt(prob.n) * cfg.eps1 + cfg.eps2 * scale:
        return False
    dw = float(np.linalg.norm(cur.w - prev.w))
    dz = prob.X.T @ (cur.z - prev.z)
    dual = (cur.sigma * prob.P * float(np.max(prob.col_sqnorms)) * dw
            + cur.sigma * float(np.linalg.norm(dz)))
    bound = math.sqrt(prob.P) * cfg.eps1 + cfg.eps2 * float(np.linalg.norm(prob.X.T @ cur.psi))
    return dual <= bound


def _metrics(w, truth, active_set, threshold):
    if truth is None:
        return math.nan, math.nan
    d = w - truth
    mse = float(d @ d)
    if active_set is None:
        return mse, math.nan
    from .datagen import support_accuracy
    return mse, support_accuracy(w, active_set, threshold)


def _run_admm(prob: ProblemInstance, cfg: SolverConfig, *, exact_z: bool,
              truth=None, active_set=None, threshold: float = 1e-2,
              callback: Optional[Callable[[SolverState], None]] = None) -> SolveResult:
    """Shared ADMM loop; the schedule functions decide SIAD versus fixed-parameter runs."""
    pen = cfg.penalty
    n = prob.n
    sigma = sigma_schedule(0, cfg)
    state = SolverState.zeros(prob, cfg.sigma0, 0.0 if exact_z else mu_schedule(cfg.sigma0, cfg))
    thr = diag.sigma_threshold(prob, pen)
    v_const = prob.P * float(np.sqrt(np.max(prob.col_sqnorms)))
    truth = None if truth is None else np.asarray(truth, dtype=float)
    trace: list[IterationRecord] = []
    threshold_iter = None
    min_slack = math.inf
    termination = Termination.MAX_ITERS

    for it in range(cfg.max_iters):
        prev = state.copy()
        sigma = sigma_schedule(it, cfg)
        mu = 0.0 if exact_z else mu_schedule(sigma, cfg)
        state.sigma_prev, state.mu_prev = state.sigma, state.mu
        state.w_prev, state.z_prev, state.psi_prev = prev.w, prev.z, prev.psi
        state.sigma, state.mu = sigma, mu

        dw_sq = w_sweep(state, prob, cfg)
        if (it + 1) % REFRESH_EVERY == 0:
            state.r = prob.X @ state.w
        dz_sq = z_update(state, prob, exact=exact_z)
        dpsi_sq = dual_update(state, prob)
        state.k = it + 1

        if threshold_iter is None and sigma > thr:
            threshold_iter = state.k
        if exact_z or it == 0:
            slack = math.nan
        else:
            slack = diag.lemma7_slack(dpsi_sq, dz_sq, state.mu_prev, mu, n)
            min_slack = min(min_slack, slack)
        sg = diag.theorem2_bound(math.sqrt(dw_sq), math.sqrt(dz_sq), state.sigma_prev,
                                 sigma, mu * sigma, v_const, n)

        converged = cfg.check_stopping and stopping_check(prev, state, prob, cfg)
        last = converged or it + 1 == cfg.max_iters
        if state.k % cfg.trace_stride == 0 or last:
            res = state.z + state.r - prob.y
            mse, acc = _metrics(state.w, truth, active_set, threshold)
            trace.append(IterationRecord(
                k=state.k, sigma=sigma, mu=mu,
                objective=diag.objective(state.w, prob, pen, xw=state.r),
                smoothed_lagrangian=diag.smoothed_lagrangian(
                    state.w, state.z, state.psi, sigma, mu, prob, pen),
                exact_lagrangian=diag.exact_lagrangian(state.w, state.z, state.psi, sigma, prob, pen),
                primal_res=float(np.linalg.norm(res)), dw_sq=dw_sq, dz_sq=dz_sq,
                dpsi_sq=dpsi_sq, lemma7_slack=slack, subgrad_bound=sg, mse=mse, accuracy=acc))
            if callback is not None:
                callback(state)
        if converged:
            termination = Termination.CONVERGED
            break

    return SolveResult(w=state.w.copy(), z=state.z.copy(), psi=state.psi.copy(), trace=trace,
                       termination=termination, iterations=state.k,
                       threshold_iter=threshold_iter,
                       min_lemma7_slack=min_slack if math.isfinite(min_slack) else math.nan,
                       final_state=state)


def solve(prob: ProblemInstance, cfg: SolverConfig, truth=None, *, active_set=None,
          threshold: float = 1e-2,
          callback: Optional[Callable[[SolverState], None]] = None) -> SolveResult:
    """Run SIAD from zero initial vectors.

    Parameters
    ----------
    prob : ProblemInstance
    cfg : SolverConfig
    truth : array, optional
        True coefficients; enables the ``mse`` trace column.
    active_set : iterable of int, optional
        Indices of the true support; enables the ``accuracy`` column.
    threshold : float
        Magnitude above which a coefficient counts as active.
    callback : callable, optional
        Called with the live :class:`SolverState` at every logged iteration.
    """
    cfg.validate()
    return _run_admm(prob, cfg, exact_z=False, truth=truth, active_set=active_set,
                     threshold=threshold, callback=callback)
