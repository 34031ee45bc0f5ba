"""Componentwise solvers with exact single-coordinate minimizers.

For the square-root criterion the coordinate subproblem still has a closed
form with three cases: the coordinate is zeroed when its partial correlation
is below a residual-scaled threshold, and otherwise set by the signed
formula below.  The squared-loss variant is the usual soft-threshold rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import DataError, SparseFit, lasso_objective, qhat, sqrt_lasso_objective


@dataclass(frozen=True)
class CoordinateConfig:
    tol: float = 1e-8            # convergence threshold on max coefficient change
    max_sweeps: int = 10_000
    order: str = "cyclic"        # or "random" (seeded shuffle, fixed across sweeps)
    order_seed: int = 0
    resync_every: int = 50

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.order not in ("cyclic", "random"):
            raise ValueError("order must be 'cyclic' or 'random'")


def _coord_stats(dataset, beta_minus_j, j):
    beta_minus_j = np.asarray(beta_minus_j, dtype=np.float64)
    if beta_minus_j.shape != (dataset.p,):
        raise DataError(f"expected {dataset.p} coefficients")
    if beta_minus_j[j] != 0.0:
        raise ValueError("beta_minus_j must have a zero in coordinate j")
    x_j = dataset.X[:, j]
    r = dataset.y - dataset.X @ beta_minus_j
    rho = float(x_j @ r / dataset.n)
    q0 = float((r @ r) / dataset.n)
    m_j = float((x_j @ x_j) / dataset.n)
    return rho, q0, m_j


def coord_update_sqrt_lasso(dataset, beta_minus_j, j, lam, gamma_j=None):
    """Exact minimizer of the square-root objective in coordinate j.

    Requires ``lam * gamma_j < n * sqrt(mean(x_j**2))`` so the closed form's
    denominator stays real; callers should reject larger penalties (the
    overall minimizer is then zero anyway).
    """
    n = dataset.n
    if gamma_j is None:
        gamma_j = float(dataset.gamma[j])
    rho, q0, m_j = _coord_stats(dataset, beta_minus_j, j)
    lg = lam * gamma_j
    if not lg < n * np.sqrt(m_j):
        raise ValueError(
            f"penalty too large for closed form in coordinate {j}: "
            f"lam*gamma = {lg} >= n*sqrt(mean(x_j^2)) = {n * np.sqrt(m_j)}"
        )
    thr = (lg / n) * np.sqrt(q0)
    if abs(rho) <= thr:
        return 0.0
    shrink = (lg / m_j) * np.sqrt(max(q0 - rho * rho / m_j, 0.0)) / np.sqrt(n * n - lg * lg / m_j)
    if rho > thr:
        return rho / m_j - shrink
    return rho / m_j + shrink


def coord_update_lasso(dataset, beta_minus_j, j, lam, gamma_j=None):
    """Soft-threshold minimizer of the squared-loss objective in coordinate j."""
    n = dataset.n
    if gamma_j is None:
        gamma_j = float(dataset.gamma[j])
    rho, _, m_j = _coord_stats(dataset, beta_minus_j, j)
    half_thr = lam * gamma_j / (2.0 * n)
    if abs(rho) <= half_thr:
        return 0.0
    return (rho - np.sign(rho) * half_thr) / m_j


def _sweep_order(p, config):
    if config.order == "cyclic":
        return np.arange(p, dtype=np.int64)
    rng = np.random.default_rng(config.order_seed)
    return rng.permutation(p).astype(np.int64)


def run_coordinate_descent(dataset, lam, kind="sqrt_lasso", config=None, warm_start=None):
    """Cyclic coordinate descent until the largest coefficient move is < tol.

    Parameters
    ----------
    kind : "sqrt_lasso" or "lasso"
        Which objective the coordinate updates minimize.
    warm_start : optional (p,) array
        Starting coefficients; defaults to zero.

    Returns
    -------
    SparseFit
        Objective is non-increasing across every single update; the
        ``converged`` flag is False when the sweep cap was reached first.
    """
    if lam < 0:
        raise ValueError("penalty level must be nonnegative")
    if kind not in ("sqrt_lasso", "lasso"):
        raise ValueError(f"unknown objective kind {kind!r}")
    config = config or CoordinateConfig()
    n, p = dataset.n, dataset.p
    m = (dataset.X ** 2).mean(axis=0)
    if kind == "sqrt_lasso":
        limit = n * np.sqrt(m) / dataset.gamma
        if not (lam < limit).all():
            j = int(np.argmin(limit - lam))
            raise ValueError(
                f"penalty too large for closed form in coordinate {j}: "
                f"lam = {lam} >= {limit[j]}; route to the first-order solver"
            )
    if warm_start is None:
        beta = np.zeros(p)
    else:
        beta = np.array(warm_start, dtype=np.float64).copy()
        if beta.shape != (p,):
            raise DataError(f"warm start must have shape ({p},)")
    order = _sweep_order(p, config)
    kernel = _kernels.sqrt_lasso_sweeps if kind == "sqrt_lasso" else _kernels.lasso_sweeps
    sweeps, status, q = kernel(
        dataset.X, dataset.y, beta, float(lam), dataset.gamma, order,
        config.tol, config.max_sweeps, config.resync_every,
    )
    if status == _kernels.STATUS_NONFINITE:
        raise FloatingPointError(f"non-finite objective at sweep {sweeps}")
    q = qhat(dataset, beta)  # exact value, free of incremental drift
    objective = (
        sqrt_lasso_objective(dataset, beta, lam)
        if kind == "sqrt_lasso"
        else lasso_objective(dataset, beta, lam)
    )
    return SparseFit(
        beta=beta,
        lam=float(lam),
        kind=kind,
        objective=objective,
        qhat=q,
        iterations=int(sweeps),
        converged=status == _kernels.STATUS_CONVERGED,
        solver="coordinate",
    )


def lasso_kkt_residual(dataset, beta, lam):
    """Largest violation of the squared-loss subgradient conditions at beta.

    Zero coordinates need ``|2 mean(x_j r)| <= lam gamma_j / n``; active ones
    need ``2 mean(x_j r) = lam gamma_j sign(beta_j) / n``.
    """
    beta = np.asarray(beta, dtype=np.float64)
    r = dataset.y - dataset.X @ beta
    g = 2.0 * dataset.X.T @ r / dataset.n
    thr = lam * dataset.gamma / dataset.n
    active = beta != 0.0
    viol_zero = np.maximum(np.abs(g) - thr, 0.0)[~active]
    viol_active = np.abs(g - np.sign(beta) * thr)[active]
    worst = 0.0
    if viol_zero.size:
        worst = max(worst, float(viol_zero.max()))
    if viol_active.size:
        worst = max(worst, float(viol_active.max()))
    return worst
