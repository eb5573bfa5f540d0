"""Synthetic-data generation and the replication-study engine.

Covariates are truncated multivariate Gaussians; responses follow the chosen
family.  run_cell compares up to four estimators of the first non-intercept
coefficient across a grid of true values:

    ref_ds   one-step correction with the direct Hessian inverse
    orig_ds  one-step correction with the node-wise lasso inverse
    mle      unpenalized maximum likelihood (divergence flagged)
    oracle   maximum likelihood refit on the true support

Every random stream is derived from (cell seed, grid index, replication,
purpose), so results are reproducible bit for bit regardless of thread count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .debias import debias, decomposition_audit, normal_quantile
from .errors import GlmOverflowError, SingularHessianError
from .families import CoefficientVector, Dataset, GlmFamily, hessian_matrix
from .lasso import cross_validate, fit_lasso, fit_mle, lambda_grid
from .rng import derive_key, generator
from .theta import hessian_inverse_theta, nodewise_theta

METHODS = ("ref_ds", "orig_ds", "mle", "oracle")


@dataclass(frozen=True)
class CovarianceSpec:
    """Covariate covariance: identity, AR(1), or compound symmetry."""

    kind: str
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "ar1", "compound_symmetry"):
            raise ValueError(f"unknown covariance kind {self.kind!r}")
        if self.kind != "identity" and not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1) for a positive-definite covariance")

    def matrix(self, p: int) -> np.ndarray:
        if self.kind == "identity":
            return np.eye(p)
        if self.kind == "ar1":
            idx = np.arange(p)
            return self.rho ** np.abs(idx[:, None] - idx[None, :])
        out = np.full((p, p), self.rho)
        np.fill_diagonal(out, 1.0)
        return out


@dataclass(frozen=True)
class SimulationCell:
    """One experimental configuration of the replication study."""

    family: str
    n: int
    p: int
    cov: CovarianceSpec
    beta1_grid: tuple
    extra_signals: tuple  # ((index, value), ...) with 1-based covariate indices
    replications: int
    seed: int
    methods: tuple = METHODS
    truncation: float = 6.0
    audit: bool = False
    cv_folds: int = 10
    nodewise_folds: int = 5
    n_lambda: int = 100
    lambda_ratio: Optional[float] = None
    nodewise_n_lambda: int = 40
    nodewise_ratio: Optional[float] = None  # None: 0.01 when n > p, else 0.05

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        for idx, _ in self.extra_signals:
            if not 1 <= idx <= self.p:
                raise ValueError(f"extra signal index {idx} outside 1..{self.p}")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}")


@dataclass
class RepRecord:
    """One (grid point, replication, method) outcome."""

    method: str
    beta1_index: int
    beta1_true: float
    replication: int
    seed: int
    estimate: float = math.nan
    se: float = math.nan
    ci_lower: float = math.nan
    ci_upper: float = math.nan
    covered: Optional[bool] = None
    diverged: bool = False
    audit_term_i: float = math.nan
    audit_term_ii: float = math.nan
    audit_term_iii: float = math.nan


@dataclass
class SummaryRow:
    method: str
    beta1_true: float
    bias: Optional[float]
    coverage: Optional[float]
    empirical_se: Optional[float]
    model_se: Optional[float]
    divergence_rate: float
    n_used: int


@dataclass
class SimSummary:
    rows: list = field(default_factory=list)


def default_extra_signals(p: int, values) -> tuple:
    """Spread k extra signals over indices floor(i * p / (k + 1)), i = 1..k."""
    values = list(values)
    k = len(values)
    idxs = []
    for i in range(1, k + 1):
        idx = max(2, (i * p) // (k + 1))  # never collide with the swept index 1
        while idx in idxs and idx < p:
            idx += 1
        idxs.append(idx)
    return tuple(zip(idxs, values))


def gen_covariates(n: int, p: int, cov: CovarianceSpec, truncation: float, seed: int) -> np.ndarray:
    """Rows i.i.d. from N_p(0, Sigma_x), whole rows redrawn until every
    component lies inside [-truncation, truncation]; intercept column
    prepended.  Deterministic in the seed."""
    if truncation <= 0.0:
        raise ValueError("truncation must be positive")
    sigma = cov.matrix(p)
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance specification is not positive definite") from exc
    rng = generator(seed, "covariates")
    Z = rng.standard_normal((n, p)) @ L.T
    bad = np.flatnonzero(np.max(np.abs(Z), axis=1) > truncation)
    while bad.size:
        Z[bad] = rng.standard_normal((bad.size, p)) @ L.T
        bad = bad[np.max(np.abs(Z[bad]), axis=1) > truncation]
    return np.hstack([np.ones((n, 1)), Z])


def gen_response(family: GlmFamily, X: np.ndarray, xi_true: CoefficientVector, seed: int) -> np.ndarray:
    """Responses drawn from the family at linear predictor X @ xi_true."""
    eta = X @ xi_true.xi
    rng = generator(seed, "response")
    if family.kind == "logistic":
        mu = family.mean(eta)
        return (rng.random(X.shape[0]) < mu).astype(np.float64)
    if family.kind == "poisson":
        if np.any(eta > 30.0):
            raise GlmOverflowError("poisson mean overflow in response generation (eta > 30)")
        return rng.poisson(np.exp(eta)).astype(np.float64)
    return eta + rng.standard_normal(X.shape[0])


def poisson_closed_form(beta0: float, beta: np.ndarray, sigma_x: np.ndarray):
    """Population information matrix and its inverse for the log-linear model
    with untruncated Gaussian covariates.

    Sigma = e^{beta0 + beta' Sigma_x beta / 2} [[1, a'], [a, Sigma_x + a a']]
    with a = Sigma_x beta; Theta is its blockwise inverse with Schur scalar
    c = 1 - a' A^{-1} a, A = Sigma_x + a a'.
    """
    beta = np.asarray(beta, dtype=np.float64)
    sigma_x = np.asarray(sigma_x, dtype=np.float64)
    p = beta.shape[0]
    if sigma_x.shape != (p, p):
        raise ValueError("sigma_x must be p x p")
    a = sigma_x @ beta
    A = sigma_x + np.outer(a, a)
    scale = math.exp(beta0 + 0.5 * float(beta @ sigma_x @ beta))

    Sigma = np.empty((p + 1, p + 1))
    Sigma[0, 0] = 1.0
    Sigma[0, 1:] = a
    Sigma[1:, 0] = a
    Sigma[1:, 1:] = A
    Sigma *= scale

    A_inv = np.linalg.solve(A, np.eye(p))
    A_inv = (A_inv + A_inv.T) / 2.0
    c = 1.0 - float(a @ A_inv @ a)
    if c <= 1e-12:
        raise ValueError(f"degenerate closed form: Schur scalar c = {c:.3e}")
    Ainv_a = A_inv @ a
    Theta = np.empty((p + 1, p + 1))
    Theta[0, 0] = 1.0 / c
    Theta[0, 1:] = -Ainv_a / c
    Theta[1:, 0] = -Ainv_a / c
    Theta[1:, 1:] = A_inv + np.outer(Ainv_a, Ainv_a) / c
    Theta /= scale
    return Sigma, Theta


def build_xi_true(cell: SimulationCell, beta1: float) -> CoefficientVector:
    beta = np.zeros(cell.p)
    beta[0] = beta1
    for idx, val in cell.extra_signals:
        beta[idx - 1] = val
    return CoefficientVector(0.0, beta)


def _oracle_support(xi_true: CoefficientVector) -> np.ndarray:
    """True support plus the intercept and the inferential target (index 1)."""
    sup = {0, 1}
    sup.update(int(j) for j in np.flatnonzero(xi_true.beta) + 1)
    return np.asarray(sorted(sup), dtype=np.int64)


def _record_from_estimate(rec: RepRecord, est, se, level, beta1_true, z=None):
    zval = z if z is not None else normal_quantile(1.0 - (1.0 - level) / 2.0)
    rec.estimate = float(est)
    rec.se = float(se)
    rec.ci_lower = rec.estimate - zval * rec.se
    rec.ci_upper = rec.estimate + zval * rec.se
    rec.covered = bool(rec.ci_lower <= beta1_true <= rec.ci_upper)
    return rec


def _run_replication(cell: SimulationCell, family: GlmFamily, gi: int, beta1: float, ri: int):
    level = 0.95
    rep_seed = derive_key(cell.seed, gi, ri) % (2**63)
    xi_true = build_xi_true(cell, beta1)
    X = gen_covariates(cell.n, cell.p, cell.cov, cell.truncation, derive_key(cell.seed, "x", gi, ri) % (2**63))
    y = gen_response(family, X, xi_true, derive_key(cell.seed, "y", gi, ri) % (2**63))
    data = Dataset(X, y)

    records = []

    needs_lasso = "ref_ds" in cell.methods or "orig_ds" in cell.methods
    fit = None
    if needs_lasso:
        grid = lambda_grid(family, data, cell.n_lambda, cell.lambda_ratio)
        cv = cross_validate(family, data, cell.cv_folds, grid,
                            derive_key(cell.seed, "cv", gi, ri) % (2**63))
        fit = fit_lasso(family, data, cv.lambda_min)

    for method in cell.methods:
        rec = RepRecord(method, gi, beta1, ri, rep_seed)
        if method == "ref_ds":
            try:
                sigma = hessian_matrix(family, data, fit.xi_hat)
                theta = hessian_inverse_theta(sigma)
                est = debias(fit, theta, family, data)
                _record_from_estimate(rec, est.b[1], est.se[1], level, beta1)
                if cell.audit:
                    aud = decomposition_audit(fit, theta, family, data, xi_true)
                    rec.audit_term_i = float(aud.term_i[1])
                    rec.audit_term_ii = float(aud.term_ii[1])
                    rec.audit_term_iii = float(aud.term_iii[1])
            except SingularHessianError:
                rec.diverged = True
        elif method == "orig_ds":
            theta = nodewise_theta(
                family, data, fit.xi_hat, cell.nodewise_folds,
                derive_key(cell.seed, "nw", gi, ri) % (2**63),
                n_lambda=cell.nodewise_n_lambda, ratio=cell.nodewise_ratio,
            )
            est = debias(fit, theta, family, data)
            _record_from_estimate(rec, est.b[1], est.se[1], level, beta1)
            if cell.audit:
                aud = decomposition_audit(fit, theta, family, data, xi_true)
                rec.audit_term_i = float(aud.term_i[1])
                rec.audit_term_ii = float(aud.term_ii[1])
                rec.audit_term_iii = float(aud.term_iii[1])
        elif method == "mle":
            if data.p + 1 > data.n:
                rec.diverged = True
            else:
                mle = fit_mle(family, data)
                if mle.diverged:
                    rec.diverged = True
                else:
                    _record_from_estimate(rec, mle.xi_hat.xi[1],
                                          math.sqrt(mle.covariance[1, 1]), level, beta1)
        elif method == "oracle":
            sup = _oracle_support(xi_true)
            sub = Dataset(data.X[:, sup], data.y)
            pos1 = int(np.flatnonzero(sup == 1)[0])
            mle = fit_mle(family, sub)
            if mle.diverged:
                rec.diverged = True
            else:
                _record_from_estimate(rec, mle.xi_hat.xi[pos1],
                                      math.sqrt(mle.covariance[pos1, pos1]), level, beta1)
        records.append(rec)
    return records


def run_cell(cell: SimulationCell, threads: int = 1) -> list:
    """All replication records for the cell, in (grid, replication) order."""
    family = GlmFamily(cell.family)
    tasks = [(gi, float(b1), ri)
             for gi, b1 in enumerate(cell.beta1_grid)
             for ri in range(cell.replications)]

    def work(task):
        gi, b1, ri = task
        return _run_replication(cell, family, gi, b1, ri)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, tasks))
    else:
        chunks = [work(t) for t in tasks]
    return [rec for chunk in chunks for rec in chunk]


def summarize(records: list) -> SimSummary:
    """Per (method, beta1) aggregates; diverged replications are excluded
    from the usable set and counted in the divergence rate."""
    keys = []
    for rec in records:
        key = (rec.method, rec.beta1_index, rec.beta1_true)
        if key not in keys:
            keys.append(key)
    summary = SimSummary()
    for method, gi, beta1 in keys:
        group = [r for r in records if r.method == method and r.beta1_index == gi]
        usable = [r for r in group if not r.diverged]
        div_rate = 1.0 - len(usable) / len(group)
        if not usable:
            summary.rows.append(SummaryRow(method, beta1, None, None, None, None, 1.0, 0))
            continue
        ests = np.asarray([r.estimate for r in usable])
        ses = np.asarray([r.se for r in usable])
        cov = float(np.mean([1.0 if r.covered else 0.0 for r in usable]))
        emp_se = float(np.std(ests, ddof=1)) if len(usable) > 1 else 0.0
        summary.rows.append(SummaryRow(
            method, beta1,
            float(np.mean(ests) - beta1), cov, emp_se, float(np.mean(ses)),
            div_rate, len(usable),
        ))
    return summary
