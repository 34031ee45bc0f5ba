"""Regression data model: column normalization, norms, and penalized objectives.

The model is ``y = X beta + noise`` with each design column rescaled so its
empirical second moment equals one.  All estimators in this package operate
on the normalized columns; ``denormalize`` maps coefficients back to the raw
column units.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

SUPPORT_TOL = 1e-9


class DataError(ValueError):
    """Malformed input data (bad CSV cell, dimension mismatch, degenerate column)."""


def normalize_columns(raw_X):
    """Rescale each column to unit empirical second moment.

    Parameters
    ----------
    raw_X : (n, p) array
        Design matrix; every column must have a positive second moment.

    Returns
    -------
    X : (n, p) array
        ``raw_X`` with column j divided by ``sqrt(mean(raw_X[:, j]**2))``.
    scales : (p,) array
        The divisors, so ``beta_raw = beta_normalized / scales``.
    """
    raw_X = np.asarray(raw_X, dtype=np.float64)
    if raw_X.ndim != 2:
        raise DataError("design matrix must be 2-dimensional")
    scales = np.sqrt((raw_X ** 2).mean(axis=0))
    bad = np.flatnonzero(scales == 0.0)
    if bad.size:
        raise DataError(f"degenerate column {bad[0]}: zero second moment")
    return raw_X / scales, scales


@dataclass(frozen=True)
class Dataset:
    """Response vector plus normalized design.

    ``X`` holds the normalized columns (Fortran order, read-only) and
    ``column_scales`` the factor each raw column was divided by.  When
    normalization is disabled the penalty loadings ``gamma`` carry the raw
    column second moments instead of ones.
    """

    y: np.ndarray
    X: np.ndarray
    column_scales: np.ndarray
    gamma: np.ndarray
    normalized: bool = True

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    def denormalize(self, beta):
        """Map coefficients on the normalized columns back to raw units."""
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.p,):
            raise DataError(f"expected {self.p} coefficients, got {beta.shape}")
        return beta / self.column_scales

    def duplicate_column_pairs(self, tol=0.0):
        """Pairs (i, j), i < j, of exactly (or near-) identical columns.

        Duplicate columns make the penalized fits non-unique; the solvers then
        prefer the lower index by sweep order.
        """
        pairs = []
        X = self.X
        for j in range(1, self.p):
            diff = np.abs(X[:, :j] - X[:, j:j + 1]).max(axis=0)
            for i in np.flatnonzero(diff <= tol):
                pairs.append((int(i), j))
        return pairs


def make_dataset(y, raw_X, normalize=True, center=False):
    """Build a validated :class:`Dataset` from raw arrays.

    Parameters
    ----------
    y, raw_X : array-like
        Response (length n) and design (n rows, p columns).
    normalize : bool
        Rescale columns to unit second moment (the default, and the
        convention every penalty level in this package assumes).  When
        disabled, per-coefficient penalty loadings ``sqrt(mean(x_j**2))``
        compensate.
    center : bool
        Subtract the column means of ``raw_X`` and the mean of ``y`` first.
        The regression model itself has no intercept; centering is offered
        as a pragmatic preprocessing step only.
    """
    y = np.asarray(y, dtype=np.float64)
    raw_X = np.asarray(raw_X, dtype=np.float64)
    if y.ndim != 1:
        raise DataError("response must be 1-dimensional")
    if raw_X.ndim != 2:
        raise DataError("design matrix must be 2-dimensional")
    n, p = raw_X.shape
    if n < 1 or p < 1:
        raise DataError("need at least one row and one column")
    if y.shape[0] != n:
        raise DataError(f"response length {y.shape[0]} != design rows {n}")
    if not np.isfinite(y).all():
        raise DataError("non-finite entry in response")
    if not np.isfinite(raw_X).all():
        raise DataError("non-finite entry in design")
    if center:
        y = y - y.mean()
        raw_X = raw_X - raw_X.mean(axis=0)
    if normalize:
        X, scales = normalize_columns(raw_X)
        gamma = np.ones(p)
    else:
        X = raw_X.copy()
        scales = np.ones(p)
        gamma = np.sqrt((raw_X ** 2).mean(axis=0))
        if (gamma == 0).any():
            raise DataError("degenerate column: zero second moment")
    X = np.asfortranarray(X)
    for arr in (y, X, scales, gamma):
        arr.setflags(write=False)
    return Dataset(y=y, X=X, column_scales=scales, gamma=gamma, normalized=normalize)


@dataclass(frozen=True)
class TrueModel:
    """Simulation ground truth: coefficients and noise scale."""

    beta0: np.ndarray
    sigma: float

    def __post_init__(self):
        beta0 = np.asarray(self.beta0, dtype=np.float64)
        beta0.setflags(write=False)
        object.__setattr__(self, "beta0", beta0)
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def support(self):
        return tuple(int(j) for j in np.flatnonzero(self.beta0 != 0.0))

    @property
    def s(self):
        return len(self.support)


@dataclass
class SparseFit:
    """Solution of an l1-penalized fit in normalized-column coordinates."""

    beta: np.ndarray
    lam: float
    kind: str                      # "sqrt_lasso" or "lasso"
    objective: float
    qhat: float
    iterations: int
    converged: bool
    solver: str = "coordinate"
    certificate: object = None
    meta: dict = field(default_factory=dict)

    @property
    def support(self):
        return tuple(int(j) for j in np.flatnonzero(np.abs(self.beta) > SUPPORT_TOL))


def _check_beta(dataset, beta):
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (dataset.p,):
        raise DataError(f"expected {dataset.p} coefficients, got shape {beta.shape}")
    return beta


def qhat(dataset, beta):
    """Mean squared residual ``mean((y - X beta)**2)``."""
    beta = _check_beta(dataset, beta)
    r = dataset.y - dataset.X @ beta
    return float((r @ r) / dataset.n)


def prediction_norm(dataset, delta):
    """Design-weighted error norm ``sqrt(mean((X delta)**2))``."""
    delta = _check_beta(dataset, delta)
    v = dataset.X @ delta
    return float(np.sqrt((v @ v) / dataset.n))


def sqrt_lasso_objective(dataset, beta, lam):
    """``sqrt(qhat(beta)) + (lam/n) * sum(gamma_j |beta_j|)``; convex in beta."""
    if lam < 0:
        raise ValueError("penalty level must be nonnegative")
    beta = _check_beta(dataset, beta)
    return float(np.sqrt(qhat(dataset, beta)) + lam / dataset.n * (dataset.gamma * np.abs(beta)).sum())


def lasso_objective(dataset, beta, lam):
    """Squared-loss analogue ``qhat(beta) + (lam/n) * sum(gamma_j |beta_j|)``."""
    if lam < 0:
        raise ValueError("penalty level must be nonnegative")
    beta = _check_beta(dataset, beta)
    return float(qhat(dataset, beta) + lam / dataset.n * (dataset.gamma * np.abs(beta)).sum())


def load_csv(path):
    """Read a dataset CSV: header row, first column ``y``, regressors after.

    Any missing or non-numeric cell is a hard error naming the offending
    row and column.

    Returns
    -------
    y : (n,) array
    raw_X : (n, p) array
    names : list of regressor column names
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0].strip() != "y":
            raise DataError(f"{path}: first column must be named 'y', got {header[:1]}")
        names = [h.strip() for h in header[1:]]
        if not names:
            raise DataError(f"{path}: no regressor columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            vals = []
            for colno, cell in enumerate(row):
                cell = cell.strip()
                if cell == "":
                    raise DataError(f"{path}: missing value at row {lineno}, column '{header[colno]}'")
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {lineno}, column '{header[colno]}'"
                    ) from None
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    return data[:, 0], data[:, 1:], names
