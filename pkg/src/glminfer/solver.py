"""Numba kernels for penalized (weighted) least-squares coordinate descent.

Two hot loops live here: the quadratic subproblem solved inside the outer
reweighting iteration of the GLM lasso, and the column-on-columns
least-squares paths used by the node-wise inverse-information estimator.
All kernels release the GIL so callers can fan work out to threads.
"""

import numba as nb
import numpy as np


@nb.njit(inline="always")
def _soft(z, t):
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


@nb.njit(inline="always")
def _update_coord(X, w, u, beta, penalized, lam, col_norms, j, inv_n, n):
    """One coordinate update; u_i = w_i (z_i - x_i' beta) is kept in sync."""
    v = col_norms[j]
    if v <= 0.0:
        return 0.0
    g = 0.0
    for i in range(n):
        g += X[i, j] * u[i]
    g *= inv_n
    zj = g + v * beta[j]
    if penalized[j]:
        bnew = _soft(zj, lam) / v
    else:
        bnew = zj / v
    d = bnew - beta[j]
    if d != 0.0:
        for i in range(n):
            u[i] -= d * w[i] * X[i, j]
        beta[j] = bnew
    return abs(d)


@nb.njit(cache=True, nogil=True)
def cd_weighted(X, w, u, beta, penalized, lam, col_norms, tol, max_sweeps):
    """Cyclic coordinate descent for

        (1/2n) sum_i w_i (z_i - x_i' beta)^2 + lam * sum_{j penalized} |beta_j|

    The working response z is never materialized: the caller initializes
    u_i = w_i (z_i - x_i' beta), which equals the raw residual y_i - mu_i at
    the current linearization point.  col_norms[j] = (1/n) sum_i w_i X_ij^2.
    X should be Fortran-ordered for contiguous column access.

    Mutates beta and u in place; returns sweeps used.  After each full sweep
    the kernel iterates on the active set until stable before re-checking all
    coordinates.
    """
    n, m = X.shape
    inv_n = 1.0 / n
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        max_delta = 0.0
        for j in range(m):
            d = _update_coord(X, w, u, beta, penalized, lam, col_norms, j, inv_n, n)
            if d > max_delta:
                max_delta = d
        if max_delta < tol:
            break
        while sweeps < max_sweeps:
            sweeps += 1
            max_delta = 0.0
            for j in range(m):
                if penalized[j] and beta[j] == 0.0:
                    continue
                d = _update_coord(X, w, u, beta, penalized, lam, col_norms, j, inv_n, n)
                if d > max_delta:
                    max_delta = d
            if max_delta < tol:
                break
    return sweeps


# Path termination mirrors the reference tooling: stop once the training fit
# is essentially saturated (ratio of explained deviance above DEV_MAX) or the
# per-step gain has flattened (below FDEV of the current ratio); remaining
# grid entries inherit the last solved solution.
DEV_MAX = 0.999
FDEV = 1e-5


@nb.njit(inline="always")
def _update_coord_rows(X, rows, r, gamma, v, lam, j, inv_n, nr):
    g = 0.0
    for ii in range(nr):
        g += X[rows[ii], j] * r[ii]
    g *= inv_n
    zj = g + v[j] * gamma[j]
    bnew = _soft(zj, lam) / v[j]
    d = bnew - gamma[j]
    if d != 0.0:
        for ii in range(nr):
            r[ii] -= d * X[rows[ii], j]
        gamma[j] = bnew
    return abs(d)


@nb.njit(cache=True, nogil=True)
def ls_path_on_rows(X, jcol, rows, lambdas, tol, max_sweeps, gammas):
    """Lasso path of X[rows, jcol] regressed on the other columns of X[rows, :].

    Intercept-free, every feature penalized, unit weights; warm starts down
    the descending lambdas.  gammas has shape (len(lambdas), X.shape[1]) and
    column jcol stays identically zero.  Trailing grid entries past the
    termination point repeat the last solved solution.  Returns the number of
    lambdas actually solved.
    """
    m = X.shape[1]
    nr = rows.shape[0]
    nlam = lambdas.shape[0]
    inv_n = 1.0 / nr

    r = np.empty(nr)
    rss0 = 0.0
    for ii in range(nr):
        val = X[rows[ii], jcol]
        r[ii] = val
        rss0 += val * val
    rss0 *= inv_n

    v = np.zeros(m)
    for j in range(m):
        if j == jcol:
            continue
        acc = 0.0
        for ii in range(nr):
            xij = X[rows[ii], j]
            acc += xij * xij
        v[j] = acc * inv_n

    gamma = np.zeros(m)
    ratio_prev = 0.0
    solved = 0
    for k in range(nlam):
        lam = lambdas[k]
        sweeps = 0
        while sweeps < max_sweeps:
            sweeps += 1
            max_delta = 0.0
            for j in range(m):
                if j == jcol or v[j] <= 0.0:
                    continue
                d = _update_coord_rows(X, rows, r, gamma, v, lam, j, inv_n, nr)
                if d > max_delta:
                    max_delta = d
            if max_delta < tol:
                break
            while sweeps < max_sweeps:
                sweeps += 1
                max_delta = 0.0
                for j in range(m):
                    if j == jcol or gamma[j] == 0.0:
                        continue
                    d = _update_coord_rows(X, rows, r, gamma, v, lam, j, inv_n, nr)
                    if d > max_delta:
                        max_delta = d
                if max_delta < tol:
                    break
        gammas[k, :] = gamma
        solved = k + 1
        if rss0 > 0.0 and k + 1 < nlam:
            rss = 0.0
            for ii in range(nr):
                rss += r[ii] * r[ii]
            rss *= inv_n
            ratio = 1.0 - rss / rss0
            if ratio > DEV_MAX or (k > 0 and ratio - ratio_prev < FDEV * ratio):
                break
            ratio_prev = ratio
    for k in range(solved, nlam):
        gammas[k, :] = gammas[solved - 1, :]
    return solved


@nb.njit(inline="always")
def _update_coord_gram(G, c, q, gamma, lam, j, m):
    v = G[j, j]
    if v <= 0.0:
        return 0.0
    zj = c[j] - q[j] + v * gamma[j]
    bnew = _soft(zj, lam) / v
    d = bnew - gamma[j]
    if d != 0.0:
        for k in range(m):
            q[k] += d * G[k, j]
        gamma[j] = bnew
    return abs(d)


@nb.njit(cache=True, nogil=True)
def ls_path_gram(G, jcol, lambdas, tol, max_sweeps, gammas):
    """Same path as ls_path_on_rows but driven by the Gram matrix G = X'X/n.

    Coordinate updates cost O(m) instead of O(n_rows), which wins whenever
    the design has more rows than columns.  q = G @ gamma is maintained
    incrementally; the training RSS used for termination is
    G[j,j] - 2 gamma'c + gamma'q.  Returns the number of lambdas solved.
    """
    m = G.shape[0]
    nlam = lambdas.shape[0]
    c = np.empty(m)
    for k in range(m):
        c[k] = G[k, jcol]
    rss0 = G[jcol, jcol]

    gamma = np.zeros(m)
    q = np.zeros(m)
    ratio_prev = 0.0
    solved = 0
    for k in range(nlam):
        lam = lambdas[k]
        sweeps = 0
        while sweeps < max_sweeps:
            sweeps += 1
            max_delta = 0.0
            for j in range(m):
                if j == jcol:
                    continue
                d = _update_coord_gram(G, c, q, gamma, lam, j, m)
                if d > max_delta:
                    max_delta = d
            if max_delta < tol:
                break
            while sweeps < max_sweeps:
                sweeps += 1
                max_delta = 0.0
                for j in range(m):
                    if j == jcol or gamma[j] == 0.0:
                        continue
                    d = _update_coord_gram(G, c, q, gamma, lam, j, m)
                    if d > max_delta:
                        max_delta = d
                if max_delta < tol:
                    break
        gammas[k, :] = gamma
        solved = k + 1
        if rss0 > 0.0 and k + 1 < nlam:
            acc = 0.0
            for jj in range(m):
                acc += gamma[jj] * (q[jj] - 2.0 * c[jj])
            ratio = -acc / rss0
            if ratio > DEV_MAX or (k > 0 and ratio - ratio_prev < FDEV * ratio):
                break
            ratio_prev = ratio
    for k in range(solved, nlam):
        gammas[k, :] = gammas[solved - 1, :]
    return solved
