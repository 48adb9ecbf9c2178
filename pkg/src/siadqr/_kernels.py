"""Compiled inner loops."""
from numba import njit

from .penalties import prox_scalar


@njit(cache=True)
def coordinate_sweep(X, col_sqnorms, v, w, r, code, lam, gam, sigma):
    """One ascending Gauss-Seidel pass over the coefficients.

    ``v`` is ``y - z - psi / sigma``; ``r`` holds ``X @ w`` and is kept in sync
    in place, as is ``w``. Returns the squared norm of the total change in w.
    """
    n, P = X.shape
    dw_sq = 0.0
    for p in range(P):
        s = 0.0
        for i in range(n):
            s += X[i, p] * (v[i] - r[i])
        a = w[p] + s / col_sqnorms[p]
        t = n / (sigma * col_sqnorms[p])
        new = prox_scalar(a, code, lam, gam, t)
        d = new - w[p]
        if d != 0.0:
            for i in range(n):
                r[i] += d * X[i, p]
            w[p] = new
            dw_sq += d * d
    return dw_sq
