"""Compiled coordinate-sweep kernels.

Both kernels mutate ``beta`` in place and keep the residual vector and the
mean squared residual incrementally, resyncing from scratch every
``resync_every`` sweeps to control float drift.  Status codes: 0 converged,
1 sweep cap reached, 2 non-finite objective (the offending sweep index is
returned alongside).
"""

import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_MAX_SWEEPS = 1
STATUS_NONFINITE = 2


@njit(cache=True)
def _resync(X, y, beta, r):
    n, p = X.shape
    for i in range(n):
        r[i] = y[i]
    for j in range(p):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= X[i, j] * bj
    q = 0.0
    for i in range(n):
        q += r[i] * r[i]
    return q / n


@njit(cache=True)
def sqrt_lasso_sweeps(X, y, beta, lam, gamma, order, tol, max_sweeps, resync_every):
    """Cyclic exact coordinate minimization of sqrt(mean sq residual) + l1."""
    n, p = X.shape
    r = np.empty(n)
    q = _resync(X, y, beta, r)
    m = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        m[j] = s / n
    n2 = float(n) * float(n)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if sweeps % resync_every == 0:
            q = _resync(X, y, beta, r)
        max_delta = 0.0
        for idx in range(p):
            j = order[idx]
            b_old = beta[j]
            xr = 0.0
            for i in range(n):
                xr += X[i, j] * r[i]
            xr /= n
            rho = xr + b_old * m[j]
            q0 = q + 2.0 * b_old * xr + b_old * b_old * m[j]
            if q0 < 0.0:
                q0 = 0.0
            lg = lam * gamma[j]
            thr = (lg / n) * np.sqrt(q0)
            if rho > thr:
                rad = q0 - rho * rho / m[j]
                if rad < 0.0:
                    rad = 0.0
                b_new = rho / m[j] - (lg / m[j]) * np.sqrt(rad) / np.sqrt(n2 - lg * lg / m[j])
            elif rho < -thr:
                rad = q0 - rho * rho / m[j]
                if rad < 0.0:
                    rad = 0.0
                b_new = rho / m[j] + (lg / m[j]) * np.sqrt(rad) / np.sqrt(n2 - lg * lg / m[j])
            else:
                b_new = 0.0
            d = b_new - b_old
            if d != 0.0:
                beta[j] = b_new
                for i in range(n):
                    r[i] -= X[i, j] * d
                q = q0 - 2.0 * b_new * rho + b_new * b_new * m[j]
                if q < 0.0:
                    q = 0.0
            ad = abs(d)
            if ad > max_delta:
                max_delta = ad
        if not np.isfinite(q):
            return sweeps, STATUS_NONFINITE, q
        if max_delta < tol:
            return sweeps, STATUS_CONVERGED, q
    return max_sweeps, STATUS_MAX_SWEEPS, q


@njit(cache=True)
def lasso_sweeps(X, y, beta, lam, gamma, order, tol, max_sweeps, resync_every):
    """Cyclic soft-threshold coordinate minimization of mean sq residual + l1."""
    n, p = X.shape
    r = np.empty(n)
    q = _resync(X, y, beta, r)
    m = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        m[j] = s / n
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if sweeps % resync_every == 0:
            q = _resync(X, y, beta, r)
        max_delta = 0.0
        for idx in range(p):
            j = order[idx]
            b_old = beta[j]
            xr = 0.0
            for i in range(n):
                xr += X[i, j] * r[i]
            xr /= n
            rho = xr + b_old * m[j]
            half_thr = lam * gamma[j] / (2.0 * n)
            if rho > half_thr:
                b_new = (rho - half_thr) / m[j]
            elif rho < -half_thr:
                b_new = (rho + half_thr) / m[j]
            else:
                b_new = 0.0
            d = b_new - b_old
            if d != 0.0:
                beta[j] = b_new
                for i in range(n):
                    r[i] -= X[i, j] * d
                q0 = q + 2.0 * b_old * xr + b_old * b_old * m[j]
                q = q0 - 2.0 * b_new * rho + b_new * b_new * m[j]
                if q < 0.0:
                    q = 0.0
            ad = abs(d)
            if ad > max_delta:
                max_delta = ad
        if not np.isfinite(q):
            return sweeps, STATUS_NONFINITE, q
        if max_delta < tol:
            return sweeps, STATUS_CONVERGED, q
    return max_sweeps, STATUS_MAX_SWEEPS, q
