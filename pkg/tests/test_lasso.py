import numpy as np
import pytest

from glminfer import (
    CoefficientVector,
    Dataset,
    GlmFamily,
    cross_validate,
    fit_lasso,
    fit_mle,
    fit_path,
    kkt_residual,
    lambda_grid,
    penalized_objective,
)

from conftest import make_dataset


def refined_grid_search(family, data, lam, lo=-3.0, hi=3.0, target_step=1e-3):
    """Independent oracle: exhaustive search over the coefficient box,
    re-gridded around the best point until the step is below target_step."""
    m = data.p + 1
    centers = np.zeros(m)
    half = (hi - lo) / 2.0
    step = half / 6.0
    best = None
    while True:
        axes = [np.arange(c - half, c + half + step / 2, step) for c in centers]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        etas = data.X @ pts.T
        loss = np.mean(family.loss(data.y[:, None], etas), axis=0)
        pen = lam * np.sum(np.abs(pts[:, 1:]), axis=1)
        obj = loss + pen
        k = int(np.argmin(obj))
        best = (pts[k], float(obj[k]))
        if step <= target_step:
            return best
        centers = pts[k]
        half = step
        step = max(step / 6.0, target_step)


class TestFitLasso:
    def test_lambda_max_gives_intercept_only(self):
        family, data, _ = make_dataset("logistic", 120, 6, seed=21)
        grid = lambda_grid(family, data, 10)
        fit = fit_lasso(family, data, float(grid[0]))
        assert np.all(fit.xi_hat.beta == 0.0)
        ybar = data.y.mean()
        assert fit.xi_hat.beta0 == pytest.approx(np.log(ybar / (1 - ybar)), abs=1e-9)
        assert fit.converged

    def test_just_below_lambda_max_activates(self):
        family, data, _ = make_dataset("logistic", 120, 6, seed=21)
        grid = lambda_grid(family, data, 10)
        fit = fit_lasso(family, data, float(grid[0]) * (1 - 1e-3))
        assert np.any(fit.xi_hat.beta != 0.0)

    def test_lambda_zero_matches_newton_mle(self):
        family, data, _ = make_dataset("logistic", 200, 5, seed=22)
        fit = fit_lasso(family, data, 0.0)
        mle = fit_mle(family, data)
        assert not mle.diverged
        np.testing.assert_allclose(fit.xi_hat.xi, mle.xi_hat.xi, atol=1e-5)

    def test_grid_search_oracle_p2(self):
        family, data, _ = make_dataset("logistic", 50, 2, seed=23)
        lam = 0.1
        fit = fit_lasso(family, data, lam)
        _, obj_grid = refined_grid_search(family, data, lam)
        obj_fit = penalized_objective(family, data, fit.xi_hat, lam)
        assert obj_fit <= obj_grid + 1e-5

    @pytest.mark.parametrize("kind", ["gaussian", "logistic", "poisson"])
    @pytest.mark.parametrize("seed", [31, 32])
    def test_kkt_certificate(self, kind, seed):
        family, data, _ = make_dataset(kind, 90, 7, seed=seed)
        grid = lambda_grid(family, data, 8)
        for lam in grid[2:7]:
            fit = fit_lasso(family, data, float(lam))
            assert fit.converged
            assert fit.kkt_residual <= 1e-6
            assert kkt_residual(family, data, fit.xi_hat, float(lam)) <= 1e-6

    def test_objective_monotone_outer(self):
        family, data, _ = make_dataset("logistic", 150, 10, seed=33)
        fit = fit_lasso(family, data, 0.02)
        path = fit.objective_path
        assert np.all(np.diff(path) <= 1e-10)

    def test_objective_below_intercept_only_point(self):
        family, data, _ = make_dataset("logistic", 150, 10, seed=34)
        beta0 = family.intercept_only_mle(data.y)
        ref = penalized_objective(family, data, CoefficientVector(beta0, np.zeros(10)), 0.03)
        fit = fit_lasso(family, data, 0.03)
        assert fit.objective <= ref + 1e-12

    def test_permutation_equivariance(self):
        family, data, _ = make_dataset("logistic", 100, 6, seed=35)
        lam = 0.04
        fit = fit_lasso(family, data, lam)
        rng = np.random.default_rng(0)
        perm = rng.permutation(6)
        Xp = np.hstack([data.X[:, :1], data.X[:, 1:][:, perm]])
        fitp = fit_lasso(family, Dataset(Xp, data.y), lam)
        np.testing.assert_allclose(fitp.xi_hat.beta, fit.xi_hat.beta[perm], atol=1e-6)
        assert fitp.xi_hat.beta0 == pytest.approx(fit.xi_hat.beta0, abs=1e-6)

    def test_warm_start_independence(self):
        family, data, _ = make_dataset("logistic", 120, 8, seed=36)
        grid = lambda_grid(family, data, 12)
        lam = float(grid[6])
        cold = fit_lasso(family, data, lam)
        neighbor = fit_lasso(family, data, float(grid[5]))
        warm = fit_lasso(family, data, lam, warm_start=neighbor.xi_hat)
        assert warm.objective == pytest.approx(cold.objective, abs=1e-8)

    def test_path_l1_monotone(self):
        family, data, _ = make_dataset("logistic", 150, 8, seed=37)
        grid = lambda_grid(family, data, 25)
        fits = fit_path(family, data, grid)
        norms = [np.sum(np.abs(f.xi_hat.beta)) for f in fits]
        # grid descends in lambda, so the l1 norm must not decrease along it
        assert all(b >= a - 1e-8 for a, b in zip(norms[:-1], norms[1:]))

    def test_negative_lambda_rejected(self):
        family, data, _ = make_dataset("gaussian", 30, 2, seed=38)
        with pytest.raises(ValueError):
            fit_lasso(family, data, -0.1)

    def test_estimation_error_shrinks_with_n(self):
        # median l1 error at n=2000 strictly below n=500, fixed truth with
        # 5 nonzero coefficients, lam proportional to sqrt(log p / n)
        p = 30
        xi_true = np.zeros(p + 1)
        xi_true[0] = 0.5
        xi_true[[1, 5, 9, 14]] = [1.0, -1.0, 0.8, -0.6]
        errs = {}
        for n in (500, 2000):
            lam = 0.75 * np.sqrt(np.log(p) / n)
            e = []
            for rep in range(20):
                family, data, truth = make_dataset(
                    "logistic", n, p, seed=1000 + 31 * rep + n, xi_true=xi_true
                )
                fit = fit_lasso(family, data, lam)
                e.append(np.sum(np.abs(fit.xi_hat.xi - truth.xi)))
            errs[n] = float(np.median(e))
        assert errs[2000] < errs[500]


class TestLambdaGrid:
    def test_log_spacing_example(self):
        family, data, _ = make_dataset("logistic", 100, 4, seed=41)
        grid = lambda_grid(family, data, 3, ratio=0.01)
        assert grid[0] / grid[1] == pytest.approx(10.0, rel=1e-9)
        assert grid[1] / grid[2] == pytest.approx(10.0, rel=1e-9)

    def test_requires_two_points(self):
        family, data, _ = make_dataset("logistic", 100, 4, seed=41)
        with pytest.raises(ValueError):
            lambda_grid(family, data, 1)

    def test_constant_response_rejected(self):
        X = np.hstack([np.ones((20, 1)), np.random.default_rng(5).standard_normal((20, 3))])
        data = Dataset(X, np.ones(20))
        with pytest.raises(ValueError):
            lambda_grid(GlmFamily("logistic"), data, 10)


class TestCrossValidate:
    def test_deterministic(self):
        family, data, _ = make_dataset("logistic", 80, 5, seed=51)
        grid = lambda_grid(family, data, 12)
        a = cross_validate(family, data, 4, grid, seed=9)
        b = cross_validate(family, data, 4, grid, seed=9)
        assert a.lambda_min == b.lambda_min
        assert np.array_equal(a.cv_mean, b.cv_mean)
        assert np.array_equal(a.cv_se, b.cv_se)

    def test_single_lambda_grid(self):
        family, data, _ = make_dataset("logistic", 80, 5, seed=52)
        res = cross_validate(family, data, 4, np.asarray([0.05]), seed=1)
        assert res.lambda_min == 0.05

    def test_lambda_min_in_grid_and_shapes(self):
        family, data, _ = make_dataset("poisson", 90, 6, seed=53)
        grid = lambda_grid(family, data, 15)
        res = cross_validate(family, data, 3, grid, seed=2)
        assert res.lambda_min in grid
        assert res.cv_mean.shape == grid.shape
        assert res.cv_se.shape == grid.shape

    def test_fold_bounds(self):
        family, data, _ = make_dataset("logistic", 30, 3, seed=54)
        with pytest.raises(ValueError):
            cross_validate(family, data, 1, np.asarray([0.1, 0.05]), seed=3)
        with pytest.raises(ValueError):
            cross_validate(family, data, 31, np.asarray([0.1, 0.05]), seed=3)

    def test_degenerate_fold_skipped_with_warning(self):
        # nearly constant response: some training folds keep one class only
        rng = np.random.default_rng(55)
        n = 24
        X = np.hstack([np.ones((n, 1)), rng.standard_normal((n, 2))])
        y = np.zeros(n)
        y[0] = 1.0
        data = Dataset(X, y)
        family = GlmFamily("logistic")
        with pytest.warns(RuntimeWarning, match="skipped"):
            res = cross_validate(family, data, 12, np.asarray([0.3, 0.1]), seed=4)
        assert res.folds_used < 12

    def test_recovers_true_signals(self):
        hits = 0
        reps = 50
        for rep in range(reps):
            xi_true = np.zeros(11)
            xi_true[0] = 0.1
            xi_true[[1, 4, 8]] = [1.2, -1.0, 0.9]
            family, data, _ = make_dataset("logistic", 300, 10,
                                           seed=6000 + rep, xi_true=xi_true)
            grid = lambda_grid(family, data, 30)
            res = cross_validate(family, data, 5, grid, seed=rep)
            fit = fit_lasso(family, data, res.lambda_min)
            active = set(np.flatnonzero(fit.xi_hat.beta) + 1)
            if {1, 4, 8} <= active:
                hits += 1
        assert hits >= 0.9 * reps


class TestMle:
    def test_gaussian_equals_ols(self):
        family, data, _ = make_dataset("gaussian", 60, 4, seed=61)
        mle = fit_mle(family, data)
        ols, *_ = np.linalg.lstsq(data.X, data.y, rcond=None)
        np.testing.assert_allclose(mle.xi_hat.xi, ols, atol=1e-10)
        assert not mle.diverged
        assert mle.covariance is not None

    def test_separated_logistic_diverges(self):
        X = np.asarray([[1.0, -1.0], [1.0, -0.5], [1.0, 0.5], [1.0, 1.0]])
        y = np.asarray([0.0, 0.0, 1.0, 1.0])
        mle = fit_mle(GlmFamily("logistic"), Dataset(X, y))
        assert mle.diverged
        assert mle.covariance is None

    def test_dimension_error(self):
        family, data, _ = make_dataset("logistic", 5, 8, seed=62)
        with pytest.raises(ValueError):
            fit_mle(family, data)

    def test_mean_estimate_close_to_truth(self):
        xi_true = np.asarray([0.0, 1.0, 0.5, 0.0, 0.0, -1.0])
        ests = np.zeros((200, 6))
        for rep in range(200):
            family, data, _ = make_dataset("logistic", 500, 5,
                                           seed=9000 + rep, xi_true=xi_true)
            mle = fit_mle(family, data)
            assert not mle.diverged
            ests[rep] = mle.xi_hat.xi
        np.testing.assert_allclose(ests.mean(axis=0), xi_true, atol=0.1)
