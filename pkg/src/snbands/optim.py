"""Small numerical helpers: scaled Nelder-Mead maximization and FD Hessians."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

_BIG = 1e300


@dataclass
class MaxResult:
    x: np.ndarray
    fun: float
    success: bool
    nit: int
    nfev: int
    message: str = ""


def maximize(fun, x0, scale=None, xatol=1e-9, fatol=1e-11, max_iter=10000, restarts=1):
    """Maximize ``fun`` by Nelder-Mead in the coordinates ``x = x0 + scale @ z``.

    ``scale`` should roughly whiten the problem (e.g. a Cholesky factor of
    an approximate covariance); the tolerances are then in those units.
    Each restart rebuilds the simplex around the current best point, which
    guards against premature simplex collapse.
    """
    x0 = np.asarray(x0, dtype=float)
    d = x0.size
    L = np.eye(d) if scale is None else np.asarray(scale, dtype=float)
    if L.ndim == 1:
        L = np.diag(L)

    def neg(z, base):
        val = fun(base + L @ z)
        return -val if np.isfinite(val) else _BIG

    base = x0.copy()
    nit = nfev = 0
    success = False
    message = ""
    best = fun(base)
    for attempt in range(restarts + 1):
        simplex = np.vstack([np.zeros(d), 0.5 * np.eye(d) if attempt == 0 else 0.05 * np.eye(d)])
        res = optimize.minimize(
            neg,
            np.zeros(d),
            args=(base,),
            method="Nelder-Mead",
            options={
                "xatol": xatol,
                "fatol": fatol,
                "maxiter": max_iter,
                "maxfev": 4 * max_iter,
                "initial_simplex": simplex,
                "adaptive": d > 2,
            },
        )
        nit += res.nit
        nfev += res.nfev
        success = bool(res.success)
        message = res.message
        cand = base + L @ res.x
        val = fun(cand)
        if not np.isfinite(val) or (np.isfinite(best) and val < best):
            break
        improved = val - best if np.isfinite(best) else np.inf
        base, best = cand, val
        if attempt > 0 and improved <= fatol:
            break
    return MaxResult(x=base, fun=float(best), success=success and np.isfinite(best),
                     nit=nit, nfev=nfev, message=str(message))


def hessian(fun, x, steps):
    """Central finite-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(steps, dtype=float)
    d = x.size
    f0 = fun(x)
    H = np.empty((d, d))
    E = np.diag(h)
    for i in range(d):
        fp, fm = fun(x + E[i]), fun(x - E[i])
        H[i, i] = (fp - 2.0 * f0 + fm) / h[i] ** 2
        for j in range(i):
            fpp = fun(x + E[i] + E[j])
            fpm = fun(x + E[i] - E[j])
            fmp = fun(x - E[i] + E[j])
            fmm = fun(x - E[i] - E[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return H


def gradient(fun, x, steps, order=2):
    """Finite-difference gradient: central (``order=2``) or five-point (``order=4``)."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(steps, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = h[i]
        if order == 4:
            g[i] = (8.0 * (fun(x + e) - fun(x - e))
                    - (fun(x + 2 * e) - fun(x - 2 * e))) / (12.0 * h[i])
        else:
            g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h[i])
    return g


def whitening(H, fallback):
    """Cholesky factor of ``inv(-H)``; ``fallback`` if ``-H`` is not positive definite."""
    try:
        cov = np.linalg.inv(-0.5 * (H + H.T))
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return fallback
