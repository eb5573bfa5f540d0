import numpy as np
import pytest

from glminfer import CoefficientVector, Dataset, GlmFamily


def make_dataset(family_kind, n, p, seed, xi_true=None, corr=0.0):
    """Random design with intercept column plus a response from the family."""
    rng = np.random.default_rng(seed)
    if corr > 0:
        idx = np.arange(p)
        sigma = corr ** np.abs(idx[:, None] - idx[None, :])
        Z = rng.standard_normal((n, p)) @ np.linalg.cholesky(sigma).T
    else:
        Z = rng.standard_normal((n, p))
    X = np.hstack([np.ones((n, 1)), Z])
    family = GlmFamily(family_kind)
    if xi_true is None:
        xi = np.zeros(p + 1)
        xi[0] = 0.2
        xi[1: min(p, 3) + 1] = np.asarray([0.8, -0.5, 0.3])[: min(p, 3)]
    else:
        xi = np.asarray(xi_true, dtype=np.float64)
    eta = X @ xi
    if family_kind == "logistic":
        y = (rng.random(n) < family.mean(eta)).astype(np.float64)
    elif family_kind == "poisson":
        y = rng.poisson(np.exp(np.clip(eta, None, 20.0))).astype(np.float64)
    else:
        y = eta + rng.standard_normal(n)
    return family, Dataset(X, y), CoefficientVector.from_xi(xi)


@pytest.fixture(scope="session")
def tol():
    return 1e-8
