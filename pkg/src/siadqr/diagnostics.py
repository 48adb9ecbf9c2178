"""Lagrangians, KKT residuals and per-iteration convergence monitors.

Sign convention: stationarity of the augmented Lagrangian in ``z`` gives
``-psi in d rho_tau(z)`` and in ``w`` gives ``-X^T psi in n dP(w)``; the
residuals below measure distances to those inclusions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .penalties import PenaltyParams, penalty_subgradient_interval, penalty_total
from .smoothing import check_subgradient_interval, smoothed_abs

if TYPE_CHECKING:
    from .core import ProblemInstance, SolverState

__all__ = [
    "KKTResidual",
    "RateFit",
    "DescentCheck",
    "InsufficientHistory",
    "exact_lagrangian",
    "smoothed_lagrangian",
    "objective",
    "kkt_residual",
    "sigma_threshold",
    "lemma7_slack",
    "lemma7_monitor",
    "descent_monitor",
    "theorem2_bound",
    "subgradient_norm_bound",
    "rate_fit",
    "interval_distance",
]


class InsufficientHistory(ValueError):
    """Raised when a monitor needs more past iterates than are available."""


@dataclass(frozen=True)
class KKTResidual:
    primal: float
    dual_w: float
    dual_z: float


@dataclass(frozen=True)
class RateFit:
    quantity: str
    window: tuple[int, int]
    slope: float
    intercept: float
    r2: float
    n_points: int


@dataclass(frozen=True)
class DescentCheck:
    lhs: float
    rhs: float
    applicable: bool

    @property
    def holds(self) -> bool:
        return (not self.applicable) or self.lhs <= self.rhs + 1e-6 * (1.0 + abs(self.rhs))


def interval_distance(x, lo, hi):
    """Distance from ``x`` to ``[lo, hi]``, elementwise."""
    return np.maximum(np.maximum(lo - x, x - hi), 0.0)


def _lagrangian_tail(w, z, psi, sigma, prob, penalty):
    res = z + prob.X @ w - prob.y
    n = prob.n
    return (n * penalty_total(w, penalty) + float(psi @ res)
            + 0.5 * sigma * float(res @ res))


def exact_lagrangian(w, z, psi, sigma, prob: "ProblemInstance", penalty: PenaltyParams) -> float:
    """Augmented Lagrangian of the split problem with the exact check loss."""
    lin = 0.5 * (float(np.sum(np.abs(z))) + (2.0 * prob.tau - 1.0) * float(np.sum(z)))
    return lin + _lagrangian_tail(w, z, psi, sigma, prob, penalty)


def smoothed_lagrangian(w, z, psi, sigma, mu, prob: "ProblemInstance",
                        penalty: PenaltyParams) -> float:
    """As :func:`exact_lagrangian` with |z_i| replaced by f(z_i, mu).

    Satisfies ``exact <= smoothed <= exact + n * mu / 4``.
    """
    if mu == 0:
        return exact_lagrangian(w, z, psi, sigma, prob, penalty)
    lin = 0.5 * (float(np.sum(smoothed_abs(z, mu))) + (2.0 * prob.tau - 1.0) * float(np.sum(z)))
    return lin + _lagrangian_tail(w, z, psi, sigma, prob, penalty)


def objective(w, prob: "ProblemInstance", penalty: PenaltyParams, xw=None) -> float:
    """Penalised quantile objective: mean check loss plus P(w)."""
    u = prob.y - (prob.X @ w if xw is None else xw)
    loss = float(np.sum(u * (prob.tau - (u < 0)))) / prob.n
    return loss + penalty_total(w, penalty)


def kkt_residual(w, z, psi, prob: "ProblemInstance", penalty: PenaltyParams) -> KKTResidual:
    """Infinity-norm violation of the three KKT conditions."""
    res = z + prob.X @ w - prob.y
    lo, hi = penalty_subgradient_interval(np.asarray(w, dtype=float), penalty)
    g = -(prob.X.T @ psi)
    dual_w = interval_distance(g, prob.n * lo, prob.n * hi)
    zlo, zhi = check_subgradient_interval(z, prob.tau)
    dual_z = interval_distance(-np.asarray(psi), zlo, zhi)
    return KKTResidual(primal=float(np.max(np.abs(res), initial=0.0)),
                       dual_w=float(np.max(dual_w, initial=0.0)),
                       dual_z=float(np.max(dual_z, initial=0.0)))


def sigma_threshold(prob: "ProblemInstance", penalty: PenaltyParams) -> float:
    """Penalty level above which the w-sweep is a guaranteed descent step."""
    return 2.0 * prob.n * penalty.rho / float(np.min(prob.col_sqnorms))


def lemma7_slack(dpsi_sq, dz_sq, mu_prev, mu_cur, n) -> float:
    """Bound on the squared dual step minus the squared dual step."""
    rhs = dz_sq / (2.0 * mu_cur ** 2) + 0.5 * n ** 2 * ((mu_prev - mu_cur) / mu_cur) ** 2
    return rhs - dpsi_sq


def lemma7_monitor(prev: "SolverState", cur: "SolverState") -> float:
    """Slack of the dual-step bound between consecutive smoothed iterates.

    Non-negative whenever ``prev.psi`` was itself produced by a smoothed
    z-update; with zero-initialised multipliers that excludes the first step.
    """
    dpsi = cur.psi - prev.psi
    dz = cur.z - prev.z
    return lemma7_slack(float(dpsi @ dpsi), float(dz @ dz), prev.mu, cur.mu, cur.z.size)


def descent_monitor(prev: "SolverState", cur: "SolverState", prob: "ProblemInstance",
                    penalty: PenaltyParams) -> DescentCheck:
    """Compare the one-step change of the smoothed Lagrangian with its bound.

    ``prev`` must carry its own predecessor's ``z`` and ``mu`` (``z_prev`` and
    ``mu_prev``) and must itself come from at least one completed iteration
    past the first.
    """
    if prev.k < 2 or prev.z_prev is None or prev.mu_prev is None:
        raise InsufficientHistory("descent monitor needs two completed iterations before prev")
    n = prob.n
    s0, s1 = prev.sigma, cur.sigma
    m_1, m0, m1 = prev.mu_prev, prev.mu, cur.mu
    beta = m1 * s1
    lhs = (smoothed_lagrangian(cur.w, cur.z, cur.psi, s1, m1, prob, penalty)
           - smoothed_lagrangian(prev.w, prev.z, prev.psi, s0, m0, prob, penalty))
    xi = s1 * float(np.min(prob.col_sqnorms)) / (2.0 * n) - penalty.rho
    dw = cur.w - prev.w
    dz = cur.z - prev.z
    dz_old = prev.z - prev.z_prev
    rhs = (-xi * float(dw @ dw)
           + (-s1 / 2.0 + s1 / (2.0 * beta ** 2)) * float(dz @ dz)
           + (s1 - s0) / (2.0 * beta ** 2) * float(dz_old @ dz_old)
           + n ** 2 / (2.0 * s1) * ((m0 - m1) / m1) ** 2
           + n ** 2 * (s1 - s0) / (2.0 * s0 ** 2) * ((m_1 - m0) / m0) ** 2)
    applicable = s0 > sigma_threshold(prob, penalty)
    return DescentCheck(lhs=lhs, rhs=rhs, applicable=applicable)


def theorem2_bound(dw_norm, dz_norm, sigma_prev, sigma, beta, v, n) -> float:
    """Upper bound on the norm of a subgradient of the smoothed Lagrangian."""
    if beta <= 0:
        return math.nan
    return (sigma * v ** 2 * dw_norm
            + (1.0 / (2.0 * beta) + sigma / (2.0 * beta) + v * (sigma / (2.0 * beta) + 1.0)) * dz_norm
            + (v + 1.0 + 1.0 / sigma) * (sigma - sigma_prev) * n / (2.0 * sigma))


def subgradient_norm_bound(prev: "SolverState", cur: "SolverState",
                           prob: "ProblemInstance") -> float:
    """Evaluate the subgradient-norm bound between two consecutive states."""
    v = prob.P * float(np.sqrt(np.max(prob.col_sqnorms)))
    return theorem2_bound(float(np.linalg.norm(cur.w - prev.w)),
                          float(np.linalg.norm(cur.z - prev.z)),
                          prev.sigma, cur.sigma, cur.mu * cur.sigma, v, prob.n)


def _column(trace, name):
    if isinstance(trace, Mapping):
        return np.asarray(trace[name], dtype=float)
    return np.array([getattr(rec, name) for rec in trace], dtype=float)


def rate_fit(trace: Sequence | Mapping, quantity: str, k_lo: int, k_hi: int) -> RateFit:
    """Least-squares slope of log(quantity) against log(k) over ``[k_lo, k_hi]``.

    ``trace`` is a list of :class:`~siadqr.core.IterationRecord` or a mapping of
    column arrays. ``quantity`` names a trace column, or ``"sigma_primal_sq"``
    for ``sigma * primal_res**2``. Non-positive values are dropped.
    """
    if k_lo >= k_hi:
        raise ValueError("k_lo must be below k_hi")
    k = _column(trace, "k")
    if quantity == "sigma_primal_sq":
        vals = _column(trace, "sigma") * _column(trace, "primal_res") ** 2
    else:
        vals = _column(trace, quantity)
    keep = (k >= k_lo) & (k <= k_hi) & np.isfinite(vals) & (vals > 0) & (k > 0)
    if keep.sum() < 10:
        raise ValueError(f"empty window: {int(keep.sum())} usable samples of {quantity} "
                         f"in [{k_lo}, {k_hi}]")
    lx, ly = np.log(k[keep]), np.log(vals[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    fitted = slope * lx + intercept
    ss_res = float(np.sum((ly - fitted) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(quantity=quantity, window=(k_lo, k_hi), slope=float(slope),
                   intercept=float(intercept), r2=r2, n_points=int(keep.sum()))


def mean_slope(fits: Iterable[RateFit]) -> float:
    fits = list(fits)
    return float(np.mean([f.slope for f in fits]))
