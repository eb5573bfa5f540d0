"""Inverse-information estimators.

Two competing constructions of the (p+1) x (p+1) inverse of the empirical
Hessian at the fitted coefficients:

  * hessian_inverse: the exact inverse via a symmetric positive-definite
    factorization, with no silent regularization;
  * nodewise_lasso: per-column lasso regressions on the weighted design,
    each tuned by K-fold cross-validation on held-out squared error.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DegenerateColumnError, SingularHessianError
from .families import CoefficientVector, Dataset, GlmFamily, _checked_etas
from .rng import generator
from .solver import ls_path_gram, ls_path_on_rows

HESSIAN_INVERSE = "hessian_inverse"
NODEWISE_LASSO = "nodewise_lasso"

NODEWISE_N_LAMBDA = 40
_INNER_TOL = 1e-10
_MAX_SWEEPS = 10_000


@dataclass
class ThetaMatrix:
    """An inverse-information estimate tagged with how it was built."""

    values: np.ndarray
    method: str
    tau_sq: Optional[np.ndarray] = None
    nodewise_lambdas: Optional[np.ndarray] = None


def _first_bad_pivot(H):
    """Re-run outer-product elimination to locate the failing pivot."""
    A = np.array(H, dtype=np.float64, copy=True)
    m = A.shape[0]
    for k in range(m):
        piv = A[k, k]
        if piv <= 0.0:
            return k, float(piv)
        col = A[k + 1:, k] / piv
        A[k + 1:, k + 1:] -= np.outer(col, A[k + 1:, k])
    return m - 1, float(A[m - 1, m - 1])


def hessian_inverse_theta(hessian: np.ndarray) -> ThetaMatrix:
    """Exact SPD inverse of the supplied Hessian; refuses singular input."""
    H = np.asarray(hessian, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("hessian must be square")
    if H.size and float(np.max(np.abs(H - H.T))) > 1e-8:
        raise ValueError("hessian must be symmetric")
    Hs = (H + H.T) / 2.0
    try:
        L = np.linalg.cholesky(Hs)
    except np.linalg.LinAlgError as exc:
        k, piv = _first_bad_pivot(Hs)
        raise SingularHessianError(
            f"Hessian is not positive definite: pivot {piv:.6e} at index {k}"
        ) from exc
    Linv = solve_triangular(L, np.eye(H.shape[0]), lower=True)
    V = Linv.T @ Linv
    return ThetaMatrix((V + V.T) / 2.0, HESSIAN_INVERSE)


def _solve_path(Xw, S_full, j, rows, grid, out):
    """Run the column-j path on a row subset, picking the cheaper kernel.

    Gram updates cost O(m) per coordinate, residual updates O(n_rows); use
    the Gram form when the subset is taller than wide.  S_full is the full
    cross-product Xw' Xw, downdated to the subset when needed.
    """
    n, m = Xw.shape
    nr = rows.shape[0]
    if nr > m:
        if nr == n:
            G = S_full / n
        else:
            keep = np.zeros(n, dtype=bool)
            keep[rows] = True
            Xte = Xw[~keep]
            G = (S_full - Xte.T @ Xte) / nr
        # the kernel walks columns of G, so keep them contiguous
        ls_path_gram(np.asfortranarray(G), j, grid, _INNER_TOL, _MAX_SWEEPS, out)
    else:
        ls_path_on_rows(Xw, j, rows, grid, _INNER_TOL, _MAX_SWEEPS, out)


def _nodewise_column(Xw, S_full, j, folds, seed, n_lambda, ratio, fixed_lam):
    """Tune and solve the column-j node-wise regression.

    Returns (row coefficients gamma with gamma[j] = 0, lam_j, tau_sq_j).
    """
    n, m = Xw.shape
    G_col = S_full[:, j] / n
    others = np.delete(G_col, j)
    lam_max = float(np.max(np.abs(others))) if others.size else 0.0

    if fixed_lam is not None:
        path = np.asarray([float(fixed_lam)])
    elif lam_max <= 1e-12:
        # column orthogonal to the rest in-sample: gamma = 0 at any positive lam
        return np.zeros(m), 0.0, float(G_col[j])
    else:
        grid = np.geomspace(lam_max, lam_max * ratio, n_lambda)
        rng = generator(seed, "nodewise", j)
        fold_of = np.empty(n, dtype=np.int64)
        fold_of[rng.permutation(n)] = np.arange(n) % folds
        errs = np.zeros((folds, n_lambda))
        gammas = np.empty((n_lambda, m))
        for f in range(folds):
            tr = np.flatnonzero(fold_of != f).astype(np.int64)
            te = fold_of == f
            _solve_path(Xw, S_full, j, tr, grid, gammas)
            resid = Xw[te, j][:, None] - Xw[te] @ gammas.T
            errs[f] = np.mean(resid * resid, axis=0)
        best = int(np.argmin(errs.mean(axis=0)))  # first minimum = largest lambda
        path = grid[: best + 1]

    out = np.empty((path.shape[0], m))
    _solve_path(Xw, S_full, j, np.arange(n, dtype=np.int64), path, out)
    gamma = out[-1]
    lam_j = float(path[-1])
    resid = Xw[:, j] - Xw @ gamma
    tau_sq = float(np.mean(resid * resid) + lam_j * np.sum(np.abs(gamma)))
    return gamma, lam_j, tau_sq


def nodewise_theta(
    family: GlmFamily,
    data: Dataset,
    xi_hat: CoefficientVector,
    folds: int,
    seed: int,
    *,
    n_lambda: int = NODEWISE_N_LAMBDA,
    ratio: Optional[float] = None,
    fixed_lambdas=None,
    n_jobs: int = 1,
) -> ThetaMatrix:
    """Node-wise lasso inverse built on the weighted design at xi_hat.

    Column j of the weighted design sqrt(b''(eta)) * X is regressed on the
    remaining columns (intercept-free, squared-error loss); its penalty is
    chosen by K-fold cross-validation over a column-specific grid with a
    stream derived from (seed, j), so the result is identical however the
    columns are scheduled.  Row j of the output is
    (1/tau_j^2) * (-gamma_j,1, ..., 1, ..., -gamma_j,m).

    Default grid ratio: 0.01 when n > p, 0.05 otherwise.  fixed_lambdas
    (scalar or length p+1) bypasses cross-validation.
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    if folds > data.n:
        raise ValueError("folds cannot exceed the number of observations")
    if ratio is None:
        ratio = 0.01 if data.n > data.p else 0.05
    etas = _checked_etas(family, data, xi_hat.xi)
    w = family.weight(etas)
    Xw = np.asfortranarray(data.X * np.sqrt(w)[:, None])
    m = data.p + 1
    S_full = Xw.T @ Xw

    if fixed_lambdas is None:
        fixed = [None] * m
    else:
        arr = np.broadcast_to(np.asarray(fixed_lambdas, dtype=np.float64), (m,))
        fixed = [float(v) for v in arr]

    rows_gamma = np.empty((m, m))
    taus = np.empty(m)
    lams = np.empty(m)

    def solve_col(j):
        return _nodewise_column(Xw, S_full, j, folds, seed, n_lambda, ratio, fixed[j])

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(solve_col, range(m)))
    else:
        results = [solve_col(j) for j in range(m)]

    for j, (gamma, lam_j, tau_sq) in enumerate(results):
        if tau_sq <= 1e-12:
            raise DegenerateColumnError(
                f"node-wise residual scale degenerate at column {j} (tau^2 = {tau_sq:.3e})"
            )
        rows_gamma[j] = gamma
        taus[j] = tau_sq
        lams[j] = lam_j

    values = -rows_gamma / taus[:, None]
    values[np.arange(m), np.arange(m)] = 1.0 / taus
    return ThetaMatrix(values, NODEWISE_LASSO, tau_sq=taus, nodewise_lambdas=lams)
