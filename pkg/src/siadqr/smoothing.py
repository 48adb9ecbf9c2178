"""Check loss, its Huber-type smoothing and the associated proximal maps."""
from __future__ import annotations

import numpy as np

__all__ = [
    "check_loss",
    "check_subgradient_interval",
    "smoothed_abs",
    "smoothed_abs_grad",
    "h_eval",
    "h_grad",
    "prox_smoothed_abs",
    "prox_abs",
]


def _out(x):
    return x if np.ndim(x) else float(x)


def _check_tau(tau):
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")


def check_loss(u, tau: float):
    """rho_tau(u) = u * (tau - 1[u < 0])."""
    _check_tau(tau)
    u = np.asarray(u, dtype=float)
    return _out(u * (tau - (u < 0)))


def check_subgradient_interval(u, tau: float):
    """Subdifferential of rho_tau: {tau}, {tau - 1}, or [tau - 1, tau] at 0."""
    u = np.asarray(u, dtype=float)
    lo = np.where(u > 0, tau, tau - 1.0)
    hi = np.where(u < 0, tau - 1.0, tau)
    if lo.ndim == 0:
        return float(lo), float(hi)
    return lo, hi


def smoothed_abs(z, mu: float):
    """f(z, mu): |z| outside (-mu, mu), z**2/(2 mu) + mu/2 inside."""
    z = np.asarray(z, dtype=float)
    a = np.abs(z)
    return _out(np.where(a >= mu, a, z * z / (2.0 * mu) + mu / 2.0))


def smoothed_abs_grad(z, mu: float):
    z = np.asarray(z, dtype=float)
    return _out(np.where(np.abs(z) >= mu, np.sign(z), z / mu))


def h_eval(z, mu: float, tau: float) -> float:
    """h(z, mu) = (sum_i f(z_i, mu) + (2 tau - 1) sum_i z_i) / 2."""
    z = np.asarray(z, dtype=float)
    return 0.5 * (float(np.sum(smoothed_abs(z, mu))) + (2.0 * tau - 1.0) * float(np.sum(z)))


def h_grad(z, mu: float, tau: float):
    """Gradient of :func:`h_eval`; every entry lies in [tau - 1, tau]."""
    return 0.5 * (np.asarray(smoothed_abs_grad(z, mu)) + (2.0 * tau - 1.0))


def prox_smoothed_abs(x, rho_step: float, mu: float):
    """argmin_v f(v, mu) + (v - x)**2 / (2 rho_step), elementwise."""
    x = np.asarray(x, dtype=float)
    edge = rho_step + mu
    out = np.where(x >= edge, x - rho_step,
                   np.where(x <= -edge, x + rho_step, x / (1.0 + rho_step / mu)))
    return _out(out)


def prox_abs(x, rho_step: float):
    """Soft thresholding sign(x) * max(0, |x| - rho_step)."""
    x = np.asarray(x, dtype=float)
    return _out(np.sign(x) * np.maximum(np.abs(x) - rho_step, 0.0))
