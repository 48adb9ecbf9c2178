"""MCP and SCAD penalties: values, subdifferentials and proximal maps.

The scalar proximal maps are compiled with numba so the coordinate sweep in
:mod:`siadqr._kernels` can call them directly.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "PenaltyKind",
    "PenaltyParams",
    "penalty_eval",
    "penalty_total",
    "penalty_subgradient_interval",
    "penalty_prox",
    "penalty_prox_oracle",
    "prox_objective",
]

MCP_CODE = 0
SCAD_CODE = 1


class PenaltyKind(str, enum.Enum):
    MCP = "MCP"
    SCAD = "SCAD"


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty family with its level ``lam`` and concavity ``gamma``.

    ``rho`` is the weak-convexity modulus: ``g + (rho/2) x**2`` is convex.
    """

    kind: PenaltyKind
    lam: float
    gamma: float

    def __post_init__(self):
        kind = self.kind.value if isinstance(self.kind, PenaltyKind) else str(self.kind).upper()
        object.__setattr__(self, "kind", PenaltyKind(kind))
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError(f"lambda must be positive and finite, got {self.lam}")
        min_gamma = 1.0 if self.kind is PenaltyKind.MCP else 2.0
        if not (math.isfinite(self.gamma) and self.gamma >= min_gamma):
            raise ValueError(
                f"{self.kind.value} requires gamma >= {min_gamma}, got {self.gamma}")

    @property
    def code(self) -> int:
        return MCP_CODE if self.kind is PenaltyKind.MCP else SCAD_CODE

    @property
    def rho(self) -> float:
        if self.kind is PenaltyKind.MCP:
            return 1.0 / self.gamma
        return 1.0 / (self.gamma - 1.0)

    @property
    def saturation(self) -> float:
        """Constant value taken for ``|w| > gamma * lam``."""
        if self.kind is PenaltyKind.MCP:
            return self.gamma * self.lam ** 2 / 2.0
        return (self.gamma + 1.0) * self.lam ** 2 / 2.0

    def prox_is_convex(self, t: float) -> bool:
        """True when the prox subproblem with step ``t`` is strictly convex."""
        if self.kind is PenaltyKind.MCP:
            return t < self.gamma
        return t < self.gamma - 1.0


def penalty_eval(w, p: PenaltyParams):
    """Elementwise penalty value g(w)."""
    a = np.abs(np.asarray(w, dtype=float))
    lam, gam = p.lam, p.gamma
    if p.kind is PenaltyKind.MCP:
        out = np.where(a <= gam * lam, lam * a - a ** 2 / (2 * gam), p.saturation)
    else:
        mid = -(a ** 2 - 2 * gam * lam * a + lam ** 2) / (2 * (gam - 1))
        out = np.where(a <= lam, lam * a, np.where(a <= gam * lam, mid, p.saturation))
    return out if out.ndim else float(out)


def penalty_total(w, p: PenaltyParams) -> float:
    """P(w) = sum_p g(w_p)."""
    return float(np.sum(penalty_eval(w, p)))


def penalty_subgradient_interval(w, p: PenaltyParams):
    """Return ``(lo, hi)`` bounding the subdifferential of g at ``w``.

    Off the origin the penalty is differentiable and ``lo == hi``; at the origin
    the interval is ``[-lam, lam]``.
    """
    w = np.asarray(w, dtype=float)
    a = np.abs(w)
    s = np.sign(w)
    lam, gam = p.lam, p.gamma
    if p.kind is PenaltyKind.MCP:
        d = np.where(a <= gam * lam, lam * s - w / gam, 0.0)
    else:
        d = np.where(a <= lam, lam * s,
                     np.where(a <= gam * lam, (gam * lam * s - w) / (gam - 1), 0.0))
    at_zero = w == 0
    lo = np.where(at_zero, -lam, d)
    hi = np.where(at_zero, lam, d)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


# -- scalar kernels ---------------------------------------------------------

@njit(cache=True)
def _g_scalar(x, code, lam, gam):
    a = abs(x)
    if code == MCP_CODE:
        if a <= gam * lam:
            return lam * a - a * a / (2.0 * gam)
        return gam * lam * lam / 2.0
    if a <= lam:
        return lam * a
    if a <= gam * lam:
        return -(a * a - 2.0 * gam * lam * a + lam * lam) / (2.0 * (gam - 1.0))
    return (gam + 1.0) * lam * lam / 2.0


@njit(cache=True)
def _shrink(u, alpha):
    if u > alpha:
        return u - alpha
    if u < -alpha:
        return u + alpha
    return 0.0


@njit(cache=True)
def _clamp(x, lo, hi):
    return min(max(x, lo), hi)


@njit(cache=True)
def _prox_enumerate(b, code, lam, gam, t):
    # b >= 0; every branch minimum is one of the candidates below
    cands = np.empty(6)
    m = 0
    cands[m] = 0.0
    m += 1
    if code == MCP_CODE:
        knot = gam * lam
        cands[m] = knot
        m += 1
        curv = 1.0 / t - 1.0 / gam
        if curv > 0.0:
            cands[m] = _clamp((b - t * lam) / (1.0 - t / gam), 0.0, knot)
            m += 1
        cands[m] = max(b, knot)
        m += 1
    else:
        knot = gam * lam
        cands[m] = lam
        m += 1
        cands[m] = knot
        m += 1
        cands[m] = _clamp(b - t * lam, 0.0, lam)
        m += 1
        curv = 1.0 / t - 1.0 / (gam - 1.0)
        if curv > 0.0:
            x = (b - t * gam * lam / (gam - 1.0)) / (1.0 - t / (gam - 1.0))
            cands[m] = _clamp(x, lam, knot)
            m += 1
        cands[m] = max(b, knot)
        m += 1
    best_x = np.inf
    best_v = np.inf
    for j in range(m):
        x = cands[j]
        v = _g_scalar(x, code, lam, gam) + (x - b) * (x - b) / (2.0 * t)
        if v < best_v or (v == best_v and x < best_x):
            best_v = v
            best_x = x
    return best_x


@njit(cache=True)
def prox_scalar(a, code, lam, gam, t):
    """argmin_x g(x) + (x - a)**2 / (2 t) for one scalar ``a``."""
    if a == 0.0:
        return 0.0
    b = abs(a)
    sgn = 1.0 if a > 0 else -1.0
    if code == MCP_CODE:
        if t < gam:
            if b > gam * lam:
                return a
            return sgn * _shrink(b, t * lam) / (1.0 - t / gam)
    else:
        if t < gam - 1.0:
            if b <= (1.0 + t) * lam:
                return sgn * _shrink(b, t * lam)
            if b <= gam * lam:
                return sgn * _shrink(b, t * gam * lam / (gam - 1.0)) / (1.0 - t / (gam - 1.0))
            return a
    return sgn * _prox_enumerate(b, code, lam, gam, t)


@njit(cache=True)
def _prox_array(a, code, lam, gam, t):
    out = np.empty_like(a)
    for i in range(a.size):
        out.flat[i] = prox_scalar(a.flat[i], code, lam, gam, t.flat[i])
    return out


def penalty_prox(a, p: PenaltyParams, t):
    """Proximal map of g with step ``t``, elementwise over ``a``.

    Inside the convexity region (``t < gamma`` for MCP, ``t < gamma - 1`` for
    SCAD) the closed form is used; otherwise the branch candidates are
    enumerated and the global minimiser is returned, ties going to the
    smaller magnitude.
    """
    if np.any(np.asarray(t) <= 0):
        raise ValueError("prox step t must be positive")
    if np.ndim(a) == 0 and np.ndim(t) == 0:
        return float(prox_scalar(float(a), p.code, p.lam, p.gamma, float(t)))
    a_arr, t_arr = np.broadcast_arrays(np.asarray(a, dtype=float),
                                       np.asarray(t, dtype=float))
    return _prox_array(np.ascontiguousarray(a_arr), p.code, p.lam, p.gamma,
                       np.ascontiguousarray(t_arr))


def prox_objective(x, a, p: PenaltyParams, t):
    """g(x) + (x - a)**2 / (2 t)."""
    x = np.asarray(x, dtype=float)
    return penalty_eval(x, p) + (x - a) ** 2 / (2.0 * t)


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def _golden(f, lo, hi, tol):
    """Vectorised golden-section search on each bracket ``[lo_j, hi_j]``."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    for _ in range(int(np.ceil(np.log(tol / max(np.max(hi - lo), tol)) / np.log(_INV_PHI)))):
        left = fc < fd
        # keep [lo, d] when left, else [c, hi]; one fresh evaluation per step
        hi = np.where(left, d, hi)
        lo = np.where(left, lo, c)
        fresh = np.where(left, hi - _INV_PHI * (hi - lo), lo + _INV_PHI * (hi - lo))
        f_fresh = f(fresh)
        c, d, fc, fd = (np.where(left, fresh, d), np.where(left, c, fresh),
                        np.where(left, f_fresh, fd), np.where(left, fc, f_fresh))
    return 0.5 * (lo + hi)


def penalty_prox_oracle(a, p: PenaltyParams, t, grid_halfwidth=None,
                        tol: float = 1e-10, n_grid: int = 1001):
    """Brute-force global minimiser of the prox objective, elementwise.

    A dense grid locates every discrete local minimum, each is refined by
    golden-section search to ``tol``, and the best refined point wins. It
    shares nothing with the closed forms and is meant for verification.
    """
    scalar = np.ndim(a) == 0 and np.ndim(t) == 0
    a, t = np.broadcast_arrays(np.atleast_1d(np.asarray(a, dtype=float)),
                               np.atleast_1d(np.asarray(t, dtype=float)))
    a, t = a.ravel(), t.ravel()
    need = np.abs(a) + p.gamma * p.lam
    if grid_halfwidth is None:
        half = need + 1.0
    else:
        half = np.broadcast_to(np.asarray(grid_halfwidth, dtype=float), a.shape)
        if np.any(half < need):
            raise ValueError("grid_halfwidth must be at least |a| + gamma*lam")
    u = np.linspace(-1.0, 1.0, n_grid)
    xs = np.sort(np.column_stack([half[:, None] * u, np.zeros_like(a), a]), axis=1)
    vals = prox_objective(xs, a[:, None], p, t[:, None])
    inner = (vals[:, 1:-1] <= vals[:, :-2]) & (vals[:, 1:-1] <= vals[:, 2:])
    rows, cols = np.nonzero(inner)
    cols = cols + 1
    best_col = np.argmin(vals, axis=1)
    rows = np.concatenate([rows, np.arange(a.size)])
    cols = np.concatenate([cols, best_col])
    lo = xs[rows, np.maximum(cols - 1, 0)]
    hi = xs[rows, np.minimum(cols + 1, xs.shape[1] - 1)]
    f = lambda x: prox_objective(x, a[rows], p, t[rows])
    refined = _golden(f, lo, hi, tol)
    cand = np.concatenate([refined, xs[rows, cols]])
    owner = np.concatenate([rows, rows])
    cval = prox_objective(cand, a[owner], p, t[owner])
    # per case: lowest objective, then smallest magnitude
    order = np.lexsort((np.abs(cand), cval, owner))
    first = np.ones(order.size, dtype=bool)
    first[1:] = owner[order][1:] != owner[order][:-1]
    out = np.empty(a.size)
    out[owner[order][first]] = cand[order][first]
    return float(out[0]) if scalar else out
