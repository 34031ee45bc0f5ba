"""Second-order-cone formulation, first-order solver, and optimality certificates.

The square-root criterion is equivalent to the cone program

    min  t/sqrt(n) + (lam/n) sum(beta+ + beta-)
    s.t. v = y - X beta+ + X beta-,  (v, t) in the second-order cone,
         beta+, beta- >= 0,

whose dual maximizes the sample correlation ``mean(y_i a_i)`` subject to
``max_j |mean(x_j a)| <= lam/n`` and ``||a|| <= sqrt(n)``.  At an optimum with
a nonzero residual the dual vector equals the rescaled residual
``sqrt(n) (y - X beta) / ||y - X beta||``, which is what the certificate
checks.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .data import SparseFit, qhat, sqrt_lasso_objective


# ---------------------------------------------------------------------------
# problem data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConicProblem:
    """Standard-form cone program ``min c'w : A w = b, w in K``.

    Variable order is ``w = (t, v, beta+, beta-)`` with sizes
    ``(1, n, p, p)``; ``K`` is the product of one second-order cone on
    ``(v, t)`` and the nonnegative orthant on ``(beta+, beta-)``.
    """

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    n: int
    p: int
    lam: float

    @property
    def num_vars(self):
        return 1 + self.n + 2 * self.p

    @property
    def cones(self):
        t_idx = [0]
        v_idx = list(range(1, 1 + self.n))
        pos_idx = list(range(1 + self.n, self.num_vars))
        # SOC convention: leading index is the cone's radius variable
        return [("soc", t_idx + v_idx), ("nonneg", pos_idx)]

    def point_from_beta(self, beta):
        """Feasible point with ``beta+ - beta- = beta`` and a tight cone slot."""
        beta = np.asarray(beta, dtype=np.float64)
        bp = np.maximum(beta, 0.0)
        bm = np.maximum(-beta, 0.0)
        v = self.b - self.A[:, 1 + self.n:1 + self.n + self.p] @ bp \
            - self.A[:, 1 + self.n + self.p:] @ bm
        t = float(np.linalg.norm(v))
        return np.concatenate(([t], v, bp, bm))

    def objective_value(self, w):
        return float(self.c @ np.asarray(w, dtype=np.float64))

    def extract_beta(self, w):
        w = np.asarray(w, dtype=np.float64)
        bp = w[1 + self.n:1 + self.n + self.p]
        bm = w[1 + self.n + self.p:]
        return bp - bm

    def serialize(self, stream):
        """Plain-text dump: dimensions, objective, cones, triplet constraint matrix."""
        own = False
        if isinstance(stream, (str, bytes)):
            stream = open(stream, "w")
            own = True
        try:
            w = stream.write
            w("conic-problem 1\n")
            w(f"vars {self.num_vars}\n")
            w(f"eqs {self.n}\n")
            w(f"var-order t:1 v:{self.n} beta+:{self.p} beta-:{self.p}\n")
            w(f"lambda {self.lam!r}\n")
            for kind, idx in self.cones:
                w(f"cone {kind} {' '.join(str(i) for i in idx)}\n")
            w("objective\n")
            for i, ci in enumerate(self.c):
                if ci != 0.0:
                    w(f"{i} {ci!r}\n")
            w("A-triplets\n")
            rows, cols = np.nonzero(self.A)
            for i, j in zip(rows, cols):
                w(f"{i} {j} {self.A[i, j]!r}\n")
            w("b\n")
            for i, bi in enumerate(self.b):
                w(f"{i} {bi!r}\n")
        finally:
            if own:
                stream.close()

    def serialize_to_string(self):
        buf = io.StringIO()
        self.serialize(buf)
        return buf.getvalue()


def build_conic_primal(dataset, lam):
    """Assemble the cone-program data for the square-root criterion."""
    n, p = dataset.n, dataset.p
    c = np.zeros(1 + n + 2 * p)
    c[0] = 1.0 / np.sqrt(n)
    c[1 + n:] = lam / n
    A = np.zeros((n, 1 + n + 2 * p))
    A[:, 1:1 + n] = np.eye(n)
    A[:, 1 + n:1 + n + p] = dataset.X
    A[:, 1 + n + p:] = -dataset.X
    return ConicProblem(c=c, A=A, b=dataset.y.copy(), n=n, p=p, lam=float(lam))


# ---------------------------------------------------------------------------
# dual vectors and certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DualSolution:
    """A dual vector with its objective and feasibility residuals.

    ``feas_inf`` is ``max_j |mean(x_j a)| - lam/n`` and ``feas_ball`` is
    ``||a|| - sqrt(n)``; the vector is feasible when both are <= 0 (up to a
    tolerance), and then its objective is a valid lower bound.
    """

    a: np.ndarray
    objective: float
    feas_inf: float
    feas_ball: float

    def feasible(self, tol=1e-8):
        return self.feas_inf <= tol and self.feas_ball <= tol


@dataclass(frozen=True)
class KktCertificate:
    duality_gap: float
    relative_gap: float
    score_relation_residual: float
    complementarity: np.ndarray
    degenerate: bool = False        # zero residual: no dual direction exists

    def accepted(self, gap_tol=1e-6, cert_tol=1e-6):
        if self.degenerate:
            return False
        return self.relative_gap <= gap_tol and self.score_relation_residual <= cert_tol


def _dual_from_vector(dataset, a, lam):
    n = dataset.n
    X = dataset.X
    feas_inf = float(np.abs(X.T @ a).max() / n - lam / n)
    feas_ball = float(np.linalg.norm(a) - np.sqrt(n))
    return DualSolution(a=a, objective=float(dataset.y @ a / n),
                        feas_inf=feas_inf, feas_ball=feas_ball)


def _feasible_scaling(dataset, a, lam):
    """Largest kappa <= 1 making kappa*a dual feasible (both constraints scale)."""
    n = dataset.n
    kappa = 1.0
    xta = float(np.abs(dataset.X.T @ a).max())
    if xta > lam:
        kappa = lam / xta
    norm_a = float(np.linalg.norm(a))
    if kappa * norm_a > np.sqrt(n):
        kappa = min(kappa, np.sqrt(n) / norm_a)
    return kappa


def _certificate(dataset, beta, a, lam):
    """Certificate for a primal/dual pair; ``a`` must already be feasible."""
    n = dataset.n
    primal = sqrt_lasso_objective(dataset, beta, lam)
    dual = float(dataset.y @ a / n)
    gap = primal - dual
    r = dataset.y - dataset.X @ beta
    nr = float(np.linalg.norm(r))
    if nr == 0.0:
        return KktCertificate(
            duality_gap=gap, relative_gap=gap / (1.0 + abs(primal)),
            score_relation_residual=np.nan,
            complementarity=np.full(dataset.p, np.nan), degenerate=True,
        )
    score_res = float(np.abs(a - np.sqrt(n) * r / nr).max())
    corr = dataset.X.T @ a / n
    comp = np.abs(beta) * (lam / n * dataset.gamma - np.sign(beta) * corr)
    return KktCertificate(
        duality_gap=gap, relative_gap=gap / (1.0 + abs(primal)),
        score_relation_residual=score_res, complementarity=comp,
    )


def kkt_certificate(dataset, fit, lam=None):
    """Certify a fit from any solver via the rescaled-residual dual vector.

    Builds ``a = sqrt(n) (y - X beta) / ||y - X beta||`` (scaled down if it
    violates the correlation constraint, so its objective is a true lower
    bound), and reports the duality gap, the score relation residual of the
    unscaled vector, and per-coordinate complementarity.  A zero residual is
    reported as degenerate: the optimal dual direction is undefined there.
    """
    beta = fit.beta if isinstance(fit, SparseFit) else np.asarray(fit, dtype=np.float64)
    if lam is None:
        if not isinstance(fit, SparseFit):
            raise ValueError("lam is required when certifying a bare coefficient vector")
        lam = fit.lam
    n = dataset.n
    r = dataset.y - dataset.X @ beta
    nr = float(np.linalg.norm(r))
    primal = sqrt_lasso_objective(dataset, beta, lam)
    if nr == 0.0:
        return KktCertificate(
            duality_gap=primal, relative_gap=primal / (1.0 + abs(primal)),
            score_relation_residual=np.nan,
            complementarity=np.full(dataset.p, np.nan), degenerate=True,
        )
    a_raw = np.sqrt(n) * r / nr
    kappa = _feasible_scaling(dataset, a_raw, lam)
    cert = _certificate(dataset, beta, kappa * a_raw, lam)
    # score relation is reported for the unscaled residual direction
    score_res = float(np.abs(kappa * a_raw - a_raw).max())
    return KktCertificate(
        duality_gap=cert.duality_gap, relative_gap=cert.relative_gap,
        score_relation_residual=score_res, complementarity=cert.complementarity,
    )


# ---------------------------------------------------------------------------
# first-order primal-dual solver
# ---------------------------------------------------------------------------

def primal_prox_step(X, beta_k, z_k, lam, mu, gamma=None):
    """Soft-threshold ``beta_k + X'z_k / mu`` at level ``lam gamma / (n mu)``."""
    if not mu > 0:
        raise ValueError("smoothing parameter mu must be positive")
    n = X.shape[0]
    thr = lam / (n * mu)
    if gamma is not None:
        thr = thr * gamma
    v = beta_k + X.T @ z_k / mu
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def dual_projection_step(z_k, beta_k, X, y, theta_k, t_k):
    """Ascend along the residual, then project onto the ball of radius 1/sqrt(n)."""
    if not theta_k > 0:
        raise ValueError("theta_k must be positive")
    n = X.shape[0]
    w = z_k + (t_k / theta_k) * (y - X @ beta_k)
    radius = 1.0 / np.sqrt(n)
    norm_w = float(np.linalg.norm(w))
    if norm_w <= radius:
        return w
    return w * (radius / norm_w)


@dataclass(frozen=True)
class FirstOrderConfig:
    gap_tol: float = 1e-6          # relative duality-gap stopping threshold
    score_tol: float = None        # optional extra threshold on the score relation
    max_iter: int = 50_000
    mu0: float = None              # default 0.1 * ||y|| / sqrt(n)
    mu_decay: float = 0.3          # geometric decay applied at each restart
    inner_max: int = 2_000
    check_every: int = 25
    trace: bool = False


def run_first_order(dataset, lam, config=None):
    """Smoothed primal-dual iterations on the cone formulation.

    Inner loops run accelerated projected ascent on the dual of the
    smoothed problem; each restart re-centers the smoothing at the current
    coefficients and decays ``mu`` geometrically, so the smoothing bias
    vanishes as the outer loop proceeds.  Iterates alternate
    :func:`primal_prox_step` and :func:`dual_projection_step`.

    Returns
    -------
    (SparseFit, DualSolution, KktCertificate)
        The dual vector is the feasibility-scaled rescaling of the final
        dual iterate, so its objective is a valid lower bound and the
        certificate gap is honest even before convergence.
    """
    if lam < 0:
        raise ValueError("penalty level must be nonnegative")
    config = config or FirstOrderConfig()
    n, p = dataset.n, dataset.p
    X, y = dataset.X, dataset.y
    gamma = dataset.gamma
    radius = 1.0 / np.sqrt(n)
    trace = [] if config.trace else None

    norm_y = float(np.linalg.norm(y))
    if norm_y == 0.0:
        beta = np.zeros(p)
        a = np.zeros(n)
        dual = _dual_from_vector(dataset, a, lam)
        cert = KktCertificate(0.0, 0.0, np.nan, np.full(p, np.nan), degenerate=True)
        fit = SparseFit(beta=beta, lam=float(lam), kind="sqrt_lasso", objective=0.0,
                        qhat=0.0, iterations=1, converged=True, solver="first_order",
                        meta={"trace": trace})
        return fit, dual, cert

    L2 = float(np.linalg.norm(X, 2) ** 2)
    mu = config.mu0 if config.mu0 is not None else 0.1 * norm_y / np.sqrt(n)
    beta_center = np.zeros(p)
    z = y / (np.sqrt(n) * norm_y)

    def evaluate(beta_cur, z_cur):
        a_scaled = _feasible_scaling(dataset, n * z_cur, lam) * (n * z_cur)
        cert = _certificate(dataset, beta_cur, a_scaled, lam)
        if trace is not None:
            primal = cert.duality_gap + float(y @ a_scaled / n)
            trace.append((primal, float(y @ a_scaled / n)))
        return a_scaled, cert

    best = None
    total_it = 0
    converged = False
    while total_it < config.max_iter and not converged:
        step = mu / L2
        zk = z.copy()
        zk_prev = z.copy()
        tk = tk_prev = 1.0
        inner = 0
        while inner < config.inner_max and total_it < config.max_iter:
            inner += 1
            total_it += 1
            z_extra = zk + ((tk_prev - 1.0) / tk) * (zk - zk_prev)
            beta_k = primal_prox_step(X, beta_center, z_extra, lam, mu, gamma)
            z_new = dual_projection_step(z_extra, beta_k, X, y, theta_k=1.0, t_k=step)
            move = float(np.linalg.norm(z_new - zk))
            zk_prev, zk = zk, z_new
            tk_prev, tk = tk, 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            if total_it % config.check_every == 0 or total_it >= config.max_iter:
                beta_cur = primal_prox_step(X, beta_center, zk, lam, mu, gamma)
                a_scaled, cert = evaluate(beta_cur, zk)
                if best is None or cert.duality_gap < best[3].duality_gap:
                    best = (beta_cur, zk.copy(), a_scaled, cert)
                primal = cert.duality_gap + float(y @ a_scaled / n)
                ok = cert.duality_gap <= config.gap_tol * (1.0 + abs(primal))
                if ok and config.score_tol is not None:
                    ok = (not np.isnan(cert.score_relation_residual)
                          and cert.score_relation_residual <= config.score_tol)
                if ok:
                    best = (beta_cur, zk.copy(), a_scaled, cert)
                    converged = True
                    break
            if move <= 1e-13:
                break
        beta_center = primal_prox_step(X, beta_center, zk, lam, mu, gamma)
        z = zk
        mu *= config.mu_decay

    beta_cur, z_final, a_scaled, cert = best
    dual = _dual_from_vector(dataset, a_scaled, lam)
    fit = SparseFit(
        beta=beta_cur,
        lam=float(lam),
        kind="sqrt_lasso",
        objective=sqrt_lasso_objective(dataset, beta_cur, lam),
        qhat=qhat(dataset, beta_cur),
        iterations=total_it,
        converged=converged,
        solver="first_order",
        meta={"trace": trace},
    )
    return fit, dual, cert
