"""User-facing estimators.

The square-root lasso needs no noise-scale input; the plain lasso variants
either receive the true scale (infeasible benchmark), plug in a crude upper
bound (1-step), refine it once (2-step), or pick the penalty by K-fold
cross-validation.  Post-estimators refit ordinary least squares on the
selected support to remove shrinkage bias.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .conic import FirstOrderConfig, kkt_certificate, run_first_order
from .coordinate import CoordinateConfig, run_coordinate_descent
from .data import DataError, SparseFit, subset_rows
from .penalty import PenaltySpec, lambda_asymptotic, resolve_lambda


@dataclass(frozen=True)
class EstimatorSpec:
    """Configuration of one estimator in a panel.

    ``kind`` is one of sqrt_lasso, sqrt_lasso_half, infeasible_lasso,
    one_step_lasso, two_step_lasso, cv_lasso, oracle.  ``post`` requests an
    ordinary-least-squares refit on the selected support.
    """

    kind: str
    penalty: PenaltySpec = PenaltySpec()
    post: bool = False
    solver: str = "coordinate"
    sigma: float = None            # infeasible_lasso only
    cv_folds: int = 5
    support: tuple = None          # oracle only

    KINDS = ("sqrt_lasso", "sqrt_lasso_half", "infeasible_lasso",
             "one_step_lasso", "two_step_lasso", "cv_lasso", "oracle")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if self.solver not in ("coordinate", "first_order"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.kind == "infeasible_lasso" and (self.sigma is None or not self.sigma > 0):
            raise ValueError("infeasible_lasso requires a positive sigma")
        if self.kind == "oracle" and self.support is None:
            raise ValueError("oracle requires the true support")
        if self.cv_folds < 2:
            raise ValueError("cross-validation needs at least 2 folds")


@dataclass
class PostFit:
    """OLS refit on a fixed support; kept distinct from penalized fits so a
    caller cannot mistake shrunk coefficients for the refit ones."""

    beta: np.ndarray
    support: tuple
    rank: int
    rank_deficient: bool
    base: SparseFit = None


def _solve_sqrt(dataset, lam, solver, config=None):
    if solver == "first_order":
        fit, dual, cert = run_first_order(dataset, lam, config if isinstance(config, FirstOrderConfig) else None)
        fit.certificate = cert
        fit.meta["dual"] = dual
        return fit
    n = dataset.n
    limit = n * np.sqrt((dataset.X ** 2).mean(axis=0)) / dataset.gamma
    if not (lam < limit.min()):
        warnings.warn(
            f"penalty {lam:.6g} exceeds the coordinate closed-form range; "
            "routing to the first-order solver"
        )
        fit, dual, cert = run_first_order(dataset, lam)
        fit.certificate = cert
        fit.meta["dual"] = dual
        return fit
    fit = run_coordinate_descent(dataset, lam, "sqrt_lasso",
                                 config if isinstance(config, CoordinateConfig) else None)
    fit.certificate = kkt_certificate(dataset, fit)
    return fit


def fit_sqrt_lasso(dataset, penalty=None, solver="coordinate", config=None):
    """Square-root lasso at a calibrated penalty level.

    The penalty never sees the response: the exact and semi-exact options
    simulate the score statistic on the design alone, and the asymptotic
    option uses only (n, p, alpha, c).
    """
    penalty = penalty or PenaltySpec()
    lam = resolve_lambda(penalty, dataset.n, dataset.p, dataset.X)
    fit = _solve_sqrt(dataset, lam, solver, config)
    fit.meta["penalty_option"] = penalty.option
    dups = dataset.duplicate_column_pairs()
    if dups:
        fit.meta["nonunique"] = (
            f"design has {len(dups)} duplicate column pair(s); the fit is one of "
            "several minimizers (sweep order breaks ties)"
        )
    return fit


def fit_sqrt_lasso_half(dataset, penalty=None, solver="coordinate", config=None):
    """Square-root lasso with the calibrated penalty level halved."""
    penalty = penalty or PenaltySpec()
    lam = resolve_lambda(penalty, dataset.n, dataset.p, dataset.X) / 2.0
    fit = _solve_sqrt(dataset, lam, solver, config)
    fit.meta["penalty_option"] = penalty.option + "/2"
    return fit


def lambda_infeasible(sigma, n, p, alpha=0.05, c=1.1):
    """Squared-loss penalty level ``2 c sigma sqrt(n) InvPhi(1 - alpha/(2p))``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    lam, _ = lambda_asymptotic(n, p, alpha, c)
    return 2.0 * sigma * lam


def fit_infeasible_lasso(dataset, sigma, alpha=0.05, c=1.1, config=None):
    """Lasso at the oracle noise scale (a simulation-only benchmark)."""
    lam = lambda_infeasible(sigma, dataset.n, dataset.p, alpha, c)
    fit = run_coordinate_descent(dataset, lam, "lasso",
                                 config if isinstance(config, CoordinateConfig) else None)
    fit.meta["sigma_used"] = float(sigma)
    return fit


def post_ols(dataset, support):
    """Least squares restricted to ``support``; zeros elsewhere.

    Rank-deficient supports get the minimum-norm solution and a report
    flag.  Supports larger than the sample size are refused.
    """
    support = tuple(int(j) for j in support)
    if len(set(support)) != len(support):
        raise ValueError("support has repeated indices")
    if any(j < 0 or j >= dataset.p for j in support):
        raise ValueError("support index out of range")
    if len(support) > dataset.n:
        raise DataError(
            f"post-OLS overdetermined support: |support| = {len(support)} > n = {dataset.n}"
        )
    beta = np.zeros(dataset.p)
    if not support:
        return PostFit(beta=beta, support=(), rank=0, rank_deficient=False)
    cols = list(support)
    sol, _, rank, _ = np.linalg.lstsq(dataset.X[:, cols], dataset.y, rcond=None)
    beta[cols] = sol
    return PostFit(beta=beta, support=support, rank=int(rank),
                   rank_deficient=int(rank) < len(support))


def oracle_fit(dataset, true_support):
    """Least squares on the true support (the benchmark estimator)."""
    return post_ols(dataset, true_support)


def fit_one_step_lasso(dataset, alpha=0.05, c=1.1, config=None):
    """Lasso with the crude scale bound ``sqrt(mean((y - ybar)**2))``."""
    if dataset.n < 2:
        raise DataError("one-step lasso needs at least two observations")
    y = dataset.y
    sigma_hat = float(np.sqrt(((y - y.mean()) ** 2).mean()))
    if sigma_hat == 0.0:
        raise DataError("constant response: the scale bound is zero")
    fit = fit_infeasible_lasso(dataset, sigma_hat, alpha, c, config)
    fit.meta["sigma_hat"] = sigma_hat
    return fit


def fit_two_step_lasso(dataset, alpha=0.05, c=1.1, config=None):
    """Lasso refit with the scale re-estimated from the 1-step residuals."""
    first = fit_one_step_lasso(dataset, alpha, c, config)
    sigma_hat = float(np.sqrt(first.qhat))
    if sigma_hat == 0.0:
        fit = run_coordinate_descent(dataset, 0.0, "lasso",
                                     config if isinstance(config, CoordinateConfig) else None)
        fit.meta["sigma_hat"] = 0.0
        fit.meta["unpenalized"] = "1-step residual was zero; refit is unpenalized"
        return fit
    lam = lambda_infeasible(sigma_hat, dataset.n, dataset.p, alpha, c)
    fit = run_coordinate_descent(dataset, lam, "lasso",
                                 config if isinstance(config, CoordinateConfig) else None)
    fit.meta["sigma_hat"] = sigma_hat
    fit.meta["sigma_hat_step1"] = first.meta["sigma_hat"]
    return fit


def default_cv_grid(dataset, size=100, decades=3.0):
    """Log-spaced penalty grid from the all-zero threshold downward."""
    y = dataset.y
    lam_max = dataset.n * np.abs(dataset.X.T @ y / dataset.n).max() / np.sqrt((y ** 2).mean())
    return np.geomspace(lam_max, lam_max / 10.0 ** decades, size)


def fit_cv_lasso(dataset, folds=5, grid=None, seed=0, config=None):
    """Lasso with the penalty picked by K-fold cross-validation.

    Folds are contiguous blocks of a seeded shuffle.  The score per grid
    point is the out-of-fold squared error averaged over folds; ties go to
    the larger penalty.
    """
    if folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    if folds > dataset.n:
        raise DataError(f"{folds} folds would leave a fold with fewer than 1 observation")
    from .data import make_dataset  # local import to avoid cycle at module load

    if grid is None:
        grid = default_cv_grid(dataset)
    grid = np.sort(np.asarray(grid, dtype=np.float64))[::-1]
    if grid.size == 0:
        raise ValueError("empty penalty grid")
    cd_config = config if isinstance(config, CoordinateConfig) else CoordinateConfig()

    rng = np.random.default_rng(seed)
    perm = rng.permutation(dataset.n)
    blocks = np.array_split(perm, folds)
    scores = np.zeros(grid.size)
    for block in blocks:
        mask = np.ones(dataset.n, dtype=bool)
        mask[block] = False
        train = make_dataset(dataset.y[mask], dataset.X[mask][:, :], normalize=False)
        X_test, y_test = dataset.X[block], dataset.y[block]
        beta = np.zeros(dataset.p)
        for gi, lam in enumerate(grid):
            fit = run_coordinate_descent(train, lam, "lasso", cd_config, warm_start=beta)
            beta = fit.beta
            err = y_test - X_test @ beta
            scores[gi] += (err ** 2).mean()
    scores /= folds
    best = int(np.argmin(scores))   # grid is descending, so first min is the largest lam
    lam_star = float(grid[best])
    fit = run_coordinate_descent(dataset, lam_star, "lasso", cd_config)
    fit.meta["cv_scores"] = scores
    fit.meta["cv_grid"] = grid
    fit.meta["cv_folds"] = folds
    return fit


def fit_estimator(dataset, spec, seed=0):
    """Dispatch an :class:`EstimatorSpec`; returns (fit, beta_for_risk).

    When ``spec.post`` is set the returned coefficient vector comes from the
    OLS refit, never from the penalized fit.
    """
    kind = spec.kind
    if kind == "sqrt_lasso":
        fit = fit_sqrt_lasso(dataset, spec.penalty, spec.solver)
    elif kind == "sqrt_lasso_half":
        fit = fit_sqrt_lasso_half(dataset, spec.penalty, spec.solver)
    elif kind == "infeasible_lasso":
        fit = fit_infeasible_lasso(dataset, spec.sigma, spec.penalty.alpha, spec.penalty.c)
    elif kind == "one_step_lasso":
        fit = fit_one_step_lasso(dataset, spec.penalty.alpha, spec.penalty.c)
    elif kind == "two_step_lasso":
        fit = fit_two_step_lasso(dataset, spec.penalty.alpha, spec.penalty.c)
    elif kind == "cv_lasso":
        fit = fit_cv_lasso(dataset, spec.cv_folds, seed=seed)
    elif kind == "oracle":
        post = oracle_fit(dataset, spec.support)
        return post, post.beta
    else:  # pragma: no cover
        raise ValueError(kind)
    if spec.post:
        post = post_ols(dataset, fit.support)
        post.base = fit
        return post, post.beta
    return fit, fit.beta
