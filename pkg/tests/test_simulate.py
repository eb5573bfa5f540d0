import math

import numpy as np
import pytest

from glminfer import (
    CoefficientVector,
    CovarianceSpec,
    Dataset,
    GlmFamily,
    GlmOverflowError,
    SimulationCell,
    build_xi_true,
    default_extra_signals,
    fit_mle,
    gen_covariates,
    gen_response,
    poisson_closed_form,
    run_cell,
    summarize,
)
from glminfer.simulate import RepRecord, _oracle_support


class TestCovariates:
    def test_identity_moments(self):
        X = gen_covariates(100_000, 3, CovarianceSpec("identity"), 6.0, seed=1)
        cov = np.cov(X[:, 1:].T)
        np.testing.assert_allclose(cov, np.eye(3), atol=0.02)
        assert np.all(X[:, 0] == 1.0)

    def test_ar1_lag_two_correlation(self):
        X = gen_covariates(100_000, 3, CovarianceSpec("ar1", 0.7), 6.0, seed=2)
        corr = np.corrcoef(X[:, 1:].T)
        assert corr[0, 2] == pytest.approx(0.49, abs=0.02)
        assert corr[0, 1] == pytest.approx(0.7, abs=0.02)

    def test_truncation_bound_enforced(self):
        X = gen_covariates(20_000, 4, CovarianceSpec("compound_symmetry", 0.5), 1.5, seed=3)
        assert np.max(np.abs(X[:, 1:])) <= 1.5

    def test_deterministic_in_seed(self):
        a = gen_covariates(500, 4, CovarianceSpec("ar1", 0.7), 6.0, seed=11)
        b = gen_covariates(500, 4, CovarianceSpec("ar1", 0.7), 6.0, seed=11)
        c = gen_covariates(500, 4, CovarianceSpec("ar1", 0.7), 6.0, seed=12)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_rho_one_rejected(self):
        with pytest.raises(ValueError):
            CovarianceSpec("ar1", 1.0)
        with pytest.raises(ValueError):
            CovarianceSpec("compound_symmetry", -0.1)

    def test_truncation_positive(self):
        with pytest.raises(ValueError):
            gen_covariates(10, 2, CovarianceSpec("identity"), 0.0, seed=1)


class TestResponses:
    def test_logistic_balance_at_zero(self):
        X = gen_covariates(100_000, 2, CovarianceSpec("identity"), 6.0, seed=4)
        y = gen_response(GlmFamily("logistic"), X, CoefficientVector(0.0, np.zeros(2)), seed=5)
        assert y.mean() == pytest.approx(0.5, abs=0.01)
        assert set(np.unique(y)) <= {0.0, 1.0}

    def test_poisson_mean_one_at_zero(self):
        X = gen_covariates(100_000, 2, CovarianceSpec("identity"), 6.0, seed=6)
        y = gen_response(GlmFamily("poisson"), X, CoefficientVector(0.0, np.zeros(2)), seed=7)
        assert y.mean() == pytest.approx(1.0, abs=0.02)

    def test_monotone_link(self):
        X = gen_covariates(100_000, 1, CovarianceSpec("identity"), 6.0, seed=8)
        xi = CoefficientVector(0.0, np.asarray([1.0]))
        y = gen_response(GlmFamily("logistic"), X, xi, seed=9)
        hi = y[X[:, 1] > 1.0].mean()
        lo = y[X[:, 1] < -1.0].mean()
        assert hi > lo

    def test_gaussian_unit_noise(self):
        X = gen_covariates(50_000, 1, CovarianceSpec("identity"), 6.0, seed=10)
        xi = CoefficientVector(1.0, np.asarray([0.0]))
        y = gen_response(GlmFamily("gaussian"), X, xi, seed=11)
        assert y.mean() == pytest.approx(1.0, abs=0.02)
        assert y.std() == pytest.approx(1.0, abs=0.02)

    def test_poisson_overflow_guard(self):
        X = gen_covariates(100, 1, CovarianceSpec("identity"), 6.0, seed=12)
        with pytest.raises(GlmOverflowError):
            gen_response(GlmFamily("poisson"), X, CoefficientVector(40.0, np.asarray([0.0])), seed=13)


class TestPoissonClosedForm:
    def test_zero_coefficients_identity(self):
        Sig, The = poisson_closed_form(0.0, np.zeros(3), np.eye(3))
        np.testing.assert_allclose(Sig, np.eye(4), atol=1e-14)
        np.testing.assert_allclose(The, np.eye(4), atol=1e-14)

    def test_single_covariate_block_formula(self):
        b = 0.7
        Sig, The = poisson_closed_form(0.0, np.asarray([b]), np.eye(1))
        scale = math.exp(b * b / 2.0)
        np.testing.assert_allclose(
            Sig, scale * np.asarray([[1.0, b], [b, 1.0 + b * b]]), atol=1e-12
        )
        np.testing.assert_allclose(Sig @ The, np.eye(2), atol=1e-12)

    @pytest.mark.parametrize("seed", [21, 22, 23])
    def test_inverse_identity_random(self, seed):
        rng = np.random.default_rng(seed)
        p = 3
        A = rng.standard_normal((p, p))
        sigma_x = A @ A.T / p + np.eye(p)
        beta = rng.uniform(-0.5, 0.5, size=p)
        Sig, The = poisson_closed_form(rng.uniform(-0.3, 0.3), beta, sigma_x)
        assert np.max(np.abs(Sig @ The - np.eye(p + 1))) <= 1e-10

    def test_monte_carlo_information_matrix(self):
        sigma_x = np.full((3, 3), 0.4)
        np.fill_diagonal(sigma_x, 1.0)
        beta0, beta = 0.1, np.asarray([0.4, 0.3, 0.2])
        Sig, The = poisson_closed_form(beta0, beta, sigma_x)
        rng = np.random.default_rng(314159)
        Z = rng.multivariate_normal(np.zeros(3), sigma_x, size=10**6)
        X = np.hstack([np.ones((10**6, 1)), Z])
        w = np.exp(beta0 + Z @ beta)
        S_mc = (X * w[:, None]).T @ X / 10**6
        assert np.max(np.abs(S_mc - Sig) / np.abs(Sig)) <= 0.01


class TestCellMachinery:
    def test_build_xi_true(self):
        cell = SimulationCell(
            family="logistic", n=50, p=10, cov=CovarianceSpec("identity"),
            beta1_grid=(0.3,), extra_signals=((4, 0.5), (8, -1.0)),
            replications=1, seed=1,
        )
        xi = build_xi_true(cell, 0.3)
        assert xi.beta0 == 0.0
        assert xi.beta[0] == 0.3
        assert xi.beta[3] == 0.5
        assert xi.beta[7] == -1.0
        assert np.sum(xi.beta != 0) == 3

    def test_default_extra_signal_positions(self):
        sig = default_extra_signals(40, (0.5, 1.0, 0.5, 1.0))
        assert [s[0] for s in sig] == [8, 16, 24, 32]
        sig2 = default_extra_signals(250, (1.0, 1.0))
        assert [s[0] for s in sig2] == [83, 166]

    def test_signal_index_validated(self):
        with pytest.raises(ValueError):
            SimulationCell(
                family="logistic", n=50, p=10, cov=CovarianceSpec("identity"),
                beta1_grid=(0.3,), extra_signals=((11, 0.5),),
                replications=1, seed=1,
            )

    def test_oracle_support_includes_target_and_intercept(self):
        xi = CoefficientVector(0.0, np.asarray([0.0, 0.0, 1.0]))
        assert _oracle_support(xi).tolist() == [0, 1, 3]


SMALL_CELL = SimulationCell(
    family="logistic", n=150, p=6, cov=CovarianceSpec("ar1", 0.7),
    beta1_grid=(0.0, 1.0), extra_signals=((4, 0.8),), replications=4, seed=345,
    methods=("ref_ds", "orig_ds", "mle", "oracle"),
    n_lambda=25, cv_folds=5, nodewise_folds=3, nodewise_n_lambda=15, audit=True,
)


@pytest.fixture(scope="module")
def records():
    return run_cell(SMALL_CELL)


class TestRunCell:
    def test_shape(self, records):
        assert len(records) == 2 * 4 * 4  # grid x reps x methods
        methods = {r.method for r in records}
        assert methods == {"ref_ds", "orig_ds", "mle", "oracle"}

    def test_rerun_identical(self, records):
        again = run_cell(SMALL_CELL)
        for a, b in zip(records, again):
            assert a == b

    def test_threads_identical(self, records):
        threaded = run_cell(SMALL_CELL, threads=2)
        for a, b in zip(records, threaded):
            assert a == b

    def test_audit_terms_recorded(self, records):
        for r in records:
            if r.method in ("ref_ds", "orig_ds") and not r.diverged:
                assert math.isfinite(r.audit_term_i)
                if r.method == "ref_ds":
                    assert abs(r.audit_term_iii) <= 1e-8
        assert any(abs(r.audit_term_iii) > 1e-12
                   for r in records if r.method == "orig_ds" and not r.diverged)

    def test_gaussian_ref_ds_equals_ols(self):
        cell = SimulationCell(
            family="gaussian", n=80, p=5, cov=CovarianceSpec("identity"),
            beta1_grid=(0.7,), extra_signals=(), replications=3, seed=77,
            methods=("ref_ds",), n_lambda=20, cv_folds=4,
        )
        records = run_cell(cell)
        for rec in records:
            from glminfer.rng import derive_key

            X = gen_covariates(80, 5, cell.cov, 6.0,
                               derive_key(cell.seed, "x", 0, rec.replication) % 2**63)
            y = gen_response(GlmFamily("gaussian"), X,
                             build_xi_true(cell, 0.7),
                             derive_key(cell.seed, "y", 0, rec.replication) % 2**63)
            ols, *_ = np.linalg.lstsq(X, y, rcond=None)
            assert rec.estimate == pytest.approx(ols[1], abs=1e-8)

    def test_oracle_matches_reduced_mle(self):
        cell = SimulationCell(
            family="logistic", n=200, p=8, cov=CovarianceSpec("identity"),
            beta1_grid=(1.0,), extra_signals=((5, 1.0),), replications=2, seed=31,
            methods=("oracle",),
        )
        records = run_cell(cell)
        from glminfer.rng import derive_key

        for rec in records:
            X = gen_covariates(200, 8, cell.cov, 6.0,
                               derive_key(cell.seed, "x", 0, rec.replication) % 2**63)
            y = gen_response(GlmFamily("logistic"), X, build_xi_true(cell, 1.0),
                             derive_key(cell.seed, "y", 0, rec.replication) % 2**63)
            sub = Dataset(X[:, [0, 1, 5]], y)
            mle = fit_mle(GlmFamily("logistic"), sub)
            assert rec.estimate == pytest.approx(mle.xi_hat.xi[1], abs=1e-12)

    def test_ref_ds_failure_recorded_when_wide(self):
        cell = SimulationCell(
            family="logistic", n=40, p=45, cov=CovarianceSpec("identity"),
            beta1_grid=(0.5,), extra_signals=(), replications=1, seed=5,
            methods=("ref_ds",), n_lambda=15, cv_folds=4,
        )
        records = run_cell(cell)
        assert len(records) == 1
        assert records[0].diverged
        assert math.isnan(records[0].estimate)


class TestSummarize:
    def test_single_perfect_record(self):
        rec = RepRecord("mle", 0, 1.0, 0, 1, estimate=1.0, se=0.1,
                        ci_lower=0.8, ci_upper=1.2, covered=True)
        rows = summarize([rec]).rows
        assert len(rows) == 1
        assert rows[0].bias == 0.0
        assert rows[0].coverage == 1.0
        assert rows[0].empirical_se == 0.0

    def test_two_symmetric_records(self):
        d = 0.3
        recs = [
            RepRecord("mle", 0, 1.0, 0, 1, estimate=1.0 + d, se=0.1,
                      ci_lower=1.1, ci_upper=1.5, covered=False),
            RepRecord("mle", 0, 1.0, 1, 2, estimate=1.0 - d, se=0.3,
                      ci_lower=0.5, ci_upper=0.9, covered=False),
        ]
        row = summarize(recs).rows[0]
        assert row.bias == pytest.approx(0.0, abs=1e-15)
        assert row.empirical_se == pytest.approx(d * math.sqrt(2.0), rel=1e-12)
        assert row.model_se == pytest.approx(0.2, rel=1e-12)
        assert row.coverage == 0.0

    def test_divergence_excluded_and_counted(self):
        recs = [
            RepRecord("mle", 0, 0.5, 0, 1, estimate=0.6, se=0.1,
                      ci_lower=0.4, ci_upper=0.8, covered=True),
            RepRecord("mle", 0, 0.5, 1, 2, diverged=True),
        ]
        row = summarize(recs).rows[0]
        assert row.divergence_rate == pytest.approx(0.5)
        assert row.n_used == 1
        assert row.bias == pytest.approx(0.1)

    def test_all_diverged_gives_absent_stats(self):
        recs = [RepRecord("mle", 0, 0.5, i, i, diverged=True) for i in range(3)]
        row = summarize(recs).rows[0]
        assert row.divergence_rate == 1.0
        assert row.bias is None and row.coverage is None
