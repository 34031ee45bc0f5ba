"""Penalty-level calibration for the square-root lasso.

The penalty is chosen so that, with probability at least ``1 - alpha``, it
dominates ``c`` times the maximal score ``n * max_j |mean(x_j xi)| /
sqrt(mean(xi**2))`` of the criterion at the truth.  Because that score does
not involve the noise scale, neither does any penalty level computed here.

Three options are provided:

* ``exact``      - ``c`` times the simulated ``(1-alpha)``-quantile of the
                   score statistic under a known noise law, conditional on
                   the design;
* ``semi-exact`` - the maximum of the exact level over a family of laws;
* ``asymptotic`` - the closed form ``c sqrt(n) * InvPhi(1 - alpha/(2p))``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

DEFAULT_DRAWS = 10_000
DEFAULT_ALPHA = 0.05
DEFAULT_C = 1.1

# cap on draws-by-n scratch entries per simulation chunk
_CHUNK_ENTRIES = 20_000_000


@dataclass(frozen=True)
class NoiseFamily:
    """Mean-zero, unit-variance noise law used for calibration and simulation.

    kind is one of "normal", "student_t" (df > 2, rescaled to unit
    variance), or "centered_exponential".
    """

    kind: str
    df: float = 0.0

    def __post_init__(self):
        if self.kind not in ("normal", "student_t", "centered_exponential"):
            raise ValueError(f"unknown noise family {self.kind!r}")
        if self.kind == "student_t" and not self.df > 2:
            raise ValueError("student_t needs df > 2 for a finite variance")

    @property
    def name(self):
        if self.kind == "student_t":
            df = self.df
            return f"t{int(df)}" if df == int(df) else f"t{df}"
        return {"normal": "normal", "centered_exponential": "exp"}[self.kind]

    def sample(self, rng, size):
        """Draw ``size`` i.i.d. variates with mean 0 and variance 1."""
        if self.kind == "normal":
            return rng.standard_normal(size)
        if self.kind == "student_t":
            # ratio of a normal to an independent chi-square, then variance-rescaled
            z = rng.standard_normal(size)
            v = rng.chisquare(self.df, size)
            return z / np.sqrt(v / self.df) * np.sqrt((self.df - 2.0) / self.df)
        # unit exponential via inverse CDF, centered
        u = rng.random(size)
        return -np.log1p(-u) - 1.0


NORMAL = NoiseFamily("normal")
T4 = NoiseFamily("student_t", 4)
T8 = NoiseFamily("student_t", 8)
EXPONENTIAL = NoiseFamily("centered_exponential")

_FAMILY_NAMES = {"normal": NORMAL, "t4": T4, "t8": T8, "exp": EXPONENTIAL}


def family_from_name(name):
    try:
        return _FAMILY_NAMES[name]
    except KeyError:
        raise ValueError(f"unknown noise family {name!r}; choose from {sorted(_FAMILY_NAMES)}") from None


@dataclass(frozen=True)
class PenaltySpec:
    """How to calibrate the penalty level.

    option    : "exact", "semi-exact", or "asymptotic"
    alpha     : 1 - confidence level, in (0, 1)
    c         : score-domination slack constant, > 1
    families  : noise laws for the exact / semi-exact options
    draws     : simulation draws R for the quantile estimate
    seed      : base seed for the calibration draws
    """

    option: str = "exact"
    alpha: float = DEFAULT_ALPHA
    c: float = DEFAULT_C
    families: tuple = (NORMAL,)
    draws: int = DEFAULT_DRAWS
    seed: object = 0

    def __post_init__(self):
        if self.option not in ("exact", "semi-exact", "asymptotic"):
            raise ValueError(f"unknown penalty option {self.option!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not self.c > 1:
            raise ValueError("the constant c must exceed 1")
        if self.draws < 1:
            raise ValueError("need at least one simulation draw")
        if not self.families:
            raise ValueError("need at least one noise family")


def normal_quantile_inv(q):
    """Standard normal inverse CDF, accurate to well below 1e-9 on (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValueError(f"quantile argument must lie strictly in (0, 1), got {q}")
    return float(ndtri(q))


def lambda_asymptotic(n, p, alpha=DEFAULT_ALPHA, c=DEFAULT_C):
    """Closed-form penalty level and its log bound.

    Returns
    -------
    lam : float
        ``c * sqrt(n) * InvPhi(1 - alpha/(2p))``.
    bound : float
        ``sqrt(2 n log(2p/alpha))``, an upper envelope for ``lam / c``.
    """
    if n < 1 or p < 1:
        raise ValueError("need n >= 1 and p >= 1")
    tail = alpha / (2.0 * p)
    if tail >= 0.5:
        raise ValueError("alpha/(2p) must be below 1/2 for a positive quantile")
    lam = c * np.sqrt(n) * normal_quantile_inv(1.0 - tail)
    bound = np.sqrt(2.0 * n * np.log(2.0 * p / alpha))
    return float(lam), float(bound)


def quantile_envelope_factor(n, p, alpha=DEFAULT_ALPHA):
    """Inflation factor nu with: exact quantile <= nu * asymptotic quantile.

    Valid whenever ``p/alpha > 8`` and ``n > 4 log(2/alpha)``; tends to one as
    the sample grows.
    """
    if not p / alpha > 8:
        raise ValueError("envelope factor requires p/alpha > 8")
    if not n > 4.0 * np.log(2.0 / alpha):
        raise ValueError("envelope factor requires n > 4 log(2/alpha)")
    num = np.sqrt(1.0 + 2.0 / np.log(2.0 * p / alpha))
    den = 1.0 - 2.0 * np.sqrt(np.log(2.0 / alpha) / n)
    return float(num / den)


def score_statistic(X, xi):
    """Maximal scaled score ``n * max_j |mean(x_j xi)| / sqrt(mean(xi**2))``.

    Invariant to positive rescaling and sign flips of ``xi``; takes neither
    the coefficients nor the noise scale as input.
    """
    X = np.asarray(X, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    n = X.shape[0]
    if xi.shape != (n,):
        raise ValueError(f"noise vector must have length {n}")
    denom = np.sqrt((xi ** 2).mean())
    if denom == 0.0:
        raise ValueError("noise vector is identically zero")
    return float(n * np.abs(X.T @ xi / n).max() / denom)


def simulate_lambda_statistic(X, family, rng):
    """One simulated draw of the score statistic under ``family``.

    An all-zero draw (possible only for degenerate generators) is discarded
    with a warning and redrawn.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    for _ in range(100):
        xi = family.sample(rng, n)
        if (xi != 0.0).any():
            return score_statistic(X, xi)
        warnings.warn("all-zero noise draw discarded; redrawing")
    raise RuntimeError("noise sampler produced 100 all-zero draws")


def _score_draws(X, family, rng, draws):
    """Vectorized draws of the score statistic, chunked to bound memory."""
    n, p = X.shape
    out = np.empty(draws)
    chunk = max(1, min(draws, _CHUNK_ENTRIES // max(n, p)))
    done = 0
    while done < draws:
        m = min(chunk, draws - done)
        xi = family.sample(rng, (m, n))
        denom = np.sqrt((xi ** 2).mean(axis=1))
        zero = denom == 0.0
        if zero.any():
            warnings.warn("all-zero noise draw discarded; redrawing")
            for i in np.flatnonzero(zero):
                xi[i] = family.sample(rng, n)
            denom = np.sqrt((xi ** 2).mean(axis=1))
        num = n * np.abs(xi @ X / n).max(axis=1)
        out[done:done + m] = num / denom
        done += m
    return out


def _family_rng(seed, index):
    # independent calibration substream per family; index 0 is the exact option
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _upper_quantile(draws, alpha):
    # conservative convention: order statistic at rank ceil((1 - alpha) R)
    draws = np.sort(draws)
    rank = int(np.ceil((1.0 - alpha) * draws.size))
    rank = min(max(rank, 1), draws.size)
    return float(draws[rank - 1])


def lambda_exact(X, family, alpha=DEFAULT_ALPHA, c=DEFAULT_C, draws=DEFAULT_DRAWS, seed=0):
    """``c`` times the simulated ``(1-alpha)``-quantile of the score statistic.

    The draws depend only on the design and the calibration law, never on the
    observed response, so the level is free of the noise scale by construction.
    """
    if draws < 1:
        raise ValueError("need at least one simulation draw")
    X = np.asarray(X, dtype=np.float64)
    stats = _score_draws(X, family, _family_rng(seed, 0), draws)
    return c * _upper_quantile(stats, alpha)


def lambda_semi_exact(X, families, alpha=DEFAULT_ALPHA, c=DEFAULT_C, draws=DEFAULT_DRAWS, seed=0):
    """Maximum of the exact level over a family list, one substream per family."""
    if not families:
        raise ValueError("need at least one noise family")
    X = np.asarray(X, dtype=np.float64)
    levels = []
    for idx, family in enumerate(families):
        stats = _score_draws(X, family, _family_rng(seed, idx), draws)
        levels.append(c * _upper_quantile(stats, alpha))
    return max(levels)


def resolve_lambda(spec, n, p, X=None):
    """Penalty level for a :class:`PenaltySpec` on a given design.

    The asymptotic option needs only the dimensions; the simulation-based
    options need the normalized design matrix itself.
    """
    if spec.option == "asymptotic":
        lam, _ = lambda_asymptotic(n, p, spec.alpha, spec.c)
        return lam
    if X is None:
        raise ValueError(f"the {spec.option} option needs the design matrix")
    if spec.option == "exact":
        return lambda_exact(X, spec.families[0], spec.alpha, spec.c, spec.draws, spec.seed)
    return lambda_semi_exact(X, spec.families, spec.alpha, spec.c, spec.draws, spec.seed)
