"""Penalized path, CV selection, IRLS, and Wald inference."""

import math

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import expit, logit
from scipy.stats import norm

from datafission.glm import (
    Dataset,
    GlmFit,
    SeparationError,
    cv_select,
    default_lambda_grid,
    lambda_max,
    logistic_irls,
    logistic_lasso_path,
    wald_inference,
)
from datafission.rng import child_rng


def _random_problem(seed, n, p, beta=None):
    rng = child_rng(seed)
    x = rng.standard_normal((n, p))
    eta = np.zeros(n) if beta is None else x @ beta
    y = rng.binomial(1, expit(eta))
    return Dataset(x, y)


def _penalized_objective(xs, y, lam, b0, b):
    eta = b0 + xs @ b
    nll = float(np.mean(np.logaddexp(0.0, eta) - y * eta))
    return nll + lam * float(np.abs(b).sum())


def _lasso_oracle(xs, y, lam):
    """Split-variable smooth reformulation solved by L-BFGS-B.

    b = u - v with u, v >= 0 turns the l1 term into a linear one; the solver
    never sees the kink. Returns (b0, b) at the optimum.
    """
    n, p = xs.shape

    def fun(z):
        b0, u, v = z[0], z[1 : 1 + p], z[1 + p :]
        b = u - v
        eta = b0 + xs @ b
        prob = expit(eta)
        nll = float(np.mean(np.logaddexp(0.0, eta) - y * eta))
        g_b = xs.T @ (prob - y) / n
        g0 = float(np.mean(prob - y))
        grad = np.concatenate([[g0], g_b + lam, -g_b + lam])
        return nll + lam * float(u.sum() + v.sum()), grad

    z0 = np.zeros(1 + 2 * p)
    res = minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        bounds=[(None, None)] + [(0.0, None)] * (2 * p),
        options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12},
    )
    return res.x[0], res.x[1 : 1 + p] - res.x[1 + p :]


class TestLassoPath:
    def test_matches_smooth_reformulation_oracle(self):
        data = _random_problem(500, 20, 3, beta=np.array([1.0, -0.5, 0.0]))
        lmax = lambda_max(data)
        grid = lmax * np.array([0.6, 0.25, 0.05])
        path = logistic_lasso_path(data, grid)
        xs = (data.design - path.col_means) / path.col_sds
        y = data.response.astype(float)
        for i, lam in enumerate(grid):
            b0 = path.coef0[i] + float(path.col_means @ path.coefs[i])
            b = path.std_coefs()[i]
            ob0, ob = _lasso_oracle(xs, y, lam)
            f_path = _penalized_objective(xs, y, lam, b0, b)
            f_oracle = _penalized_objective(xs, y, lam, ob0, ob)
            assert f_path <= f_oracle + 1e-8, i
            assert np.allclose(b, ob, atol=1e-4), i
            assert math.isclose(b0, ob0, abs_tol=1e-4)

    def test_kkt_conditions_along_the_path(self):
        data = _random_problem(501, 200, 8, beta=np.array([1.2, -0.8, 0.5, 0, 0, 0, 0, 0.0]))
        path = logistic_lasso_path(data, default_lambda_grid(data, n_points=10))
        xs = (data.design - path.col_means) / path.col_sds
        y = data.response.astype(float)
        n = data.n
        for i, lam in enumerate(path.lambdas):
            b = path.std_coefs()[i]
            b0 = path.coef0[i] + float(path.col_means @ path.coefs[i])
            prob = expit(b0 + xs @ b)
            g = xs.T @ (prob - y) / n
            assert abs(np.mean(prob - y)) <= 1e-6, i
            active = b != 0.0
            assert np.all(np.abs(g[active] + lam * np.sign(b[active])) <= 1e-6), i
            assert np.all(np.abs(g[~active]) <= lam + 1e-6), i

    def test_at_and_above_lambda_max_the_model_is_null(self):
        data = _random_problem(502, 150, 5)
        lmax = lambda_max(data)
        path = logistic_lasso_path(data, np.array([2.0 * lmax, lmax]))
        assert np.all(path.coefs == 0.0)
        ybar = data.response.mean()
        assert np.allclose(path.coef0, logit(ybar), atol=1e-12)
        assert path.active_sets() == [(), ()]
        # just below the knee at least one slope wakes up
        below = logistic_lasso_path(data, np.array([0.98 * lmax]))
        assert np.any(below.coefs != 0.0)

    def test_lambda_max_matches_direct_computation(self):
        data = _random_problem(503, 300, 6)
        x = data.design
        xs = (x - x.mean(axis=0)) / x.std(axis=0)
        want = np.max(np.abs(xs.T @ (data.response - data.response.mean()) / data.n))
        assert math.isclose(lambda_max(data), want, rel_tol=1e-10)

    def test_zero_lambda_endpoint_matches_irls(self):
        data = _random_problem(504, 400, 1, beta=np.array([0.8]))
        grid = np.concatenate([default_lambda_grid(data, n_points=30), [0.0]])
        path = logistic_lasso_path(data, grid)
        fit = logistic_irls(data)
        assert abs(path.coefs[-1, 0] - fit.coef[1]) < 1e-6
        assert abs(path.coef0[-1] - fit.coef[0]) < 1e-6

    def test_default_grid_shape(self):
        data = _random_problem(505, 100, 4)
        grid = default_lambda_grid(data)
        lmax = lambda_max(data)
        assert grid.shape == (100,)
        assert grid[0] == lmax
        assert math.isclose(grid[-1], 0.01 * lmax, rel_tol=1e-12)
        assert np.all(np.diff(grid) < 0)
        assert default_lambda_grid(data, n_points=7).shape == (7,)

    def test_grid_and_input_validation(self):
        data = _random_problem(506, 60, 3)
        with pytest.raises(ValueError, match="descending"):
            logistic_lasso_path(data, np.array([0.1, 0.2]))
        with pytest.raises(ValueError, match="nonnegative"):
            logistic_lasso_path(data, np.array([0.1, -0.2]))
        with_off = Dataset(data.design, data.response, offset=np.zeros(60))
        with pytest.raises(ValueError, match="offset"):
            logistic_lasso_path(with_off, np.array([0.1]))
        one_class = Dataset(data.design, np.ones(60, dtype=int))
        with pytest.raises(ValueError, match="single-class"):
            logistic_lasso_path(one_class, np.array([0.1]))
        constant = Dataset(np.column_stack([data.design, np.full(60, 2.0)]), data.response)
        with pytest.raises(ValueError, match="constant"):
            logistic_lasso_path(constant, np.array([0.1]))

    def test_warm_start_path_is_continuous_in_lambda(self):
        data = _random_problem(507, 250, 6, beta=np.array([1.0, -1.0, 0.5, 0, 0, 0.0]))
        path = logistic_lasso_path(data, default_lambda_grid(data, n_points=40))
        steps = np.abs(np.diff(path.coefs, axis=0)).max(axis=1)
        assert steps.max() < 0.5  # no jumps: adjacent grid points stay close
        assert np.all(path.converged)


class TestDataset:
    def test_validation(self):
        with pytest.raises(ValueError, match="2-dimensional"):
            Dataset(np.zeros(5), np.zeros(5, dtype=int))
        with pytest.raises(ValueError, match="binary"):
            Dataset(np.zeros((4, 1)), np.array([0, 1, 2, 0]))
        with pytest.raises(ValueError, match="length"):
            Dataset(np.zeros((4, 1)), np.array([0, 1, 1]))
        with pytest.raises(ValueError, match="two observations"):
            Dataset(np.zeros((1, 1)), np.array([1]))
        with pytest.raises(ValueError, match="finite"):
            Dataset(np.array([[np.inf], [0.0]]), np.array([0, 1]))
        with pytest.raises(ValueError, match="intercept"):
            Dataset(np.zeros((4, 1)), np.array([0, 1, 0, 1]), intercept=False)
        with pytest.raises(ValueError, match="offset"):
            Dataset(np.zeros((4, 1)), np.array([0, 1, 0, 1]), offset=np.zeros(3))
        d = Dataset(np.zeros((4, 1)), np.array([0, 1, 0, 1]))
        assert d.n == 4 and d.p == 1


class TestCvSelect:
    def test_same_seed_same_selection(self):
        data = _random_problem(510, 120, 10, beta=np.r_[1.5, -1.0, np.zeros(8)])
        grid = default_lambda_grid(data, n_points=25)
        a = cv_select(data, child_rng(511), n_folds=5, lambda_grid=grid)
        b = cv_select(data, child_rng(511), n_folds=5, lambda_grid=grid)
        assert a.selected == b.selected
        assert a.lambda_chosen == b.lambda_chosen
        assert np.array_equal(a.cv_curve, b.cv_curve)

    def test_one_se_rule_never_chooses_a_smaller_lambda(self):
        data = _random_problem(512, 150, 12, beta=np.r_[1.5, -1.2, 0.8, np.zeros(9)])
        grid = default_lambda_grid(data, n_points=30)
        lo = cv_select(data, child_rng(513), n_folds=5, lambda_grid=grid, rule="min")
        hi = cv_select(data, child_rng(513), n_folds=5, lambda_grid=grid, rule="1se")
        assert hi.lambda_chosen >= lo.lambda_chosen
        assert hi.chosen_index <= lo.chosen_index
        assert np.array_equal(hi.cv_curve, lo.cv_curve)
        assert lo.rule == "min" and hi.rule == "1se"
        # the curve carries the grid and nonnegative spread estimates
        assert np.array_equal(hi.cv_curve[:, 0], grid)
        assert np.all(hi.cv_curve[:, 2] >= 0)

    def test_signal_columns_are_found(self):
        data = _random_problem(514, 400, 10, beta=np.r_[2.0, -1.5, np.zeros(8)])
        sel = cv_select(data, child_rng(515), n_folds=5, rule="min")
        assert {1, 2} <= set(sel.selected)

    def test_pinned_null_sparsity_under_one_se(self):
        # 20 independent global-null designs; the support is almost always empty
        sizes = []
        for rep in range(20):
            rng = child_rng(777, rep)
            x = rng.standard_normal((500, 50))
            y = rng.binomial(1, np.full(500, expit(0.6)))
            sizes.append(len(cv_select(Dataset(x, y), rng=rng, rule="1se").selected))
        assert sizes == [0, 0, 0, 0, 0, 0, 0, 0, 6, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0]
        assert np.mean(sizes) == 0.35

    def test_validation_and_fold_failures(self):
        data = _random_problem(516, 40, 3)
        with pytest.raises(ValueError, match="rule"):
            cv_select(data, child_rng(0), rule="2se")
        with pytest.raises(ValueError, match="n_folds"):
            cv_select(data, child_rng(0), n_folds=2)
        with pytest.raises(ValueError, match="n_folds"):
            cv_select(data, child_rng(0), n_folds=41)
        with_off = Dataset(data.design, data.response, offset=np.zeros(40))
        with pytest.raises(ValueError, match="offset"):
            cv_select(with_off, child_rng(0))
        lonely = Dataset(np.arange(30, dtype=float).reshape(30, 1) % 7,
                         np.r_[1, np.zeros(29, dtype=int)])
        with pytest.raises(ValueError, match="two-class"):
            cv_select(lonely, child_rng(1), n_folds=5)

    def test_selected_indices_are_one_based(self):
        data = _random_problem(517, 300, 4, beta=np.array([2.5, 0, 0, 0.0]))
        sel = cv_select(data, child_rng(518), n_folds=5, rule="min")
        assert all(1 <= j <= 4 for j in sel.selected)
        assert 1 in sel.selected


class TestIrls:
    def test_intercept_only_closed_form(self):
        y = np.array([1, 1, 1, 1, 1, 1, 0, 0, 0, 0])
        fit = logistic_irls(Dataset(np.empty((10, 0)), y))
        assert fit.converged
        assert abs(fit.coef[0] - math.log(1.5)) < 1e-10
        assert abs(fit.cov_model[0, 0] - 1.0 / (10 * 0.6 * 0.4)) < 1e-9

    def test_matches_scipy_unpenalized_optimum(self):
        data = _random_problem(520, 300, 3, beta=np.array([0.8, -0.4, 0.0]))
        fit = logistic_irls(data)
        xf = np.column_stack([np.ones(300), data.design])
        y = data.response.astype(float)

        def nll(b):
            eta = xf @ b
            return float(np.sum(np.logaddexp(0.0, eta) - y * eta))

        res = minimize(nll, np.zeros(4), method="BFGS", options={"gtol": 1e-10})
        assert np.allclose(fit.coef, res.x, atol=1e-6)
        # exit criterion: score at the reported optimum is tiny
        prob = expit(xf @ fit.coef)
        assert np.max(np.abs(xf.T @ (y - prob))) < 1e-8

    def test_constant_offset_shifts_the_intercept(self):
        data = _random_problem(521, 500, 2, beta=np.array([0.6, -0.6]))
        plain = logistic_irls(data)
        shifted = logistic_irls(Dataset(data.design, data.response, offset=np.full(500, 0.7)))
        assert shifted.offset_used and not plain.offset_used
        assert abs(shifted.coef[0] - (plain.coef[0] - 0.7)) < 1e-7
        assert np.allclose(shifted.coef[1:], plain.coef[1:], atol=1e-7)

    def test_balanced_orthogonal_design_makes_both_covariances_agree(self):
        x = np.tile([1.0, 1.0, -1.0, -1.0], 4).reshape(16, 1)
        y = np.tile([0, 1, 0, 1], 4)
        fit = logistic_irls(Dataset(x, y))
        assert fit.iterations == 1  # score vanishes at the zero start
        assert np.all(fit.coef == 0.0)
        assert np.allclose(fit.cov_model, np.diag([0.25, 0.25]), atol=1e-12)
        assert np.allclose(fit.cov_sandwich, fit.cov_model, atol=1e-12)

    def test_sandwich_close_to_model_under_correct_specification(self):
        data = _random_problem(522, 4000, 2, beta=np.array([0.5, -0.25]))
        fit = logistic_irls(data)
        ratio = np.diag(fit.cov_sandwich) / np.diag(fit.cov_model)
        assert np.all(np.abs(ratio - 1.0) < 0.1)

    def test_separation_raises(self):
        # margin small enough that the slope must pass 30 while the score is
        # still far from zero, so the divergence guard fires first
        x = np.array([[-0.5], [-0.25], [0.25], [0.5]])
        y = np.array([0, 0, 1, 1])
        with pytest.raises(SeparationError):
            logistic_irls(Dataset(x, y))

    def test_rank_deficiency_raises(self):
        x = np.ones((20, 1))  # duplicates the intercept
        y = np.tile([0, 1], 10)
        with pytest.raises(ValueError, match="rank"):
            logistic_irls(Dataset(x, y))

    def test_nan_covariances_allowed_when_not_converged(self):
        fit = GlmFit(
            coef=np.array([0.1, 0.2]),
            cov_model=np.full((2, 2), np.nan),
            cov_sandwich=np.full((2, 2), np.nan),
            converged=False,
            iterations=50,
            offset_used=False,
        )
        assert not fit.converged

    def test_glmfit_guards(self):
        good = np.eye(2)
        with pytest.raises(ValueError, match="symmetric"):
            GlmFit(np.zeros(2), np.array([[1.0, 0.5], [0.0, 1.0]]), good,
                   converged=True, iterations=1, offset_used=False)
        with pytest.raises(ValueError, match="positive semidefinite"):
            GlmFit(np.zeros(2), np.diag([1.0, -1.0]), good,
                   converged=True, iterations=1, offset_used=False)
        with pytest.raises(ValueError, match="finite"):
            GlmFit(np.array([np.nan, 0.0]), good, good,
                   converged=True, iterations=1, offset_used=False)


def _fit_1d(est, var):
    m = np.array([[var]])
    return GlmFit(coef=np.array([est]), cov_model=m, cov_sandwich=m,
                  converged=True, iterations=3, offset_used=False)


class TestWald:
    def test_pinned_interval_and_pvalue(self):
        table = wald_inference(_fit_1d(0.392, 0.04))
        assert abs(table.lower[0] - 0.0) < 1e-4
        assert abs(table.upper[0] - 0.784) < 1e-4
        assert abs(table.pvalue[0] - 0.05) < 1e-3
        assert table.se[0] == 0.2
        assert table.level == 0.95 and table.cov_used == "model"

    def test_matches_normal_quantiles(self):
        table = wald_inference(_fit_1d(1.3, 0.09), level=0.9)
        z = norm.ppf(0.95)
        assert math.isclose(table.lower[0], 1.3 - z * 0.3, rel_tol=1e-12)
        assert math.isclose(table.upper[0], 1.3 + z * 0.3, rel_tol=1e-12)
        assert math.isclose(table.pvalue[0], 2 * norm.sf(1.3 / 0.3), rel_tol=1e-12)

    def test_wider_level_wider_interval(self):
        narrow = wald_inference(_fit_1d(0.5, 0.04), level=0.9)
        wide = wald_inference(_fit_1d(0.5, 0.04), level=0.99)
        assert wide.upper[0] - wide.lower[0] > narrow.upper[0] - narrow.lower[0]

    def test_degenerate_coordinates(self):
        m = np.zeros((1, 1))
        fit = GlmFit(np.array([0.0]), m, m, converged=True, iterations=1, offset_used=False)
        assert wald_inference(fit).pvalue[0] == 1.0
        fit2 = GlmFit(np.array([0.3]), m, m, converged=True, iterations=1, offset_used=False)
        assert wald_inference(fit2).pvalue[0] == 0.0

    def test_refuses_nonconverged_fits(self):
        fit = GlmFit(
            coef=np.array([0.1]),
            cov_model=np.full((1, 1), np.nan),
            cov_sandwich=np.full((1, 1), np.nan),
            converged=False,
            iterations=50,
            offset_used=False,
        )
        with pytest.raises(ValueError, match="non-converged"):
            wald_inference(fit)

    def test_argument_validation(self):
        fit = _fit_1d(0.5, 0.04)
        with pytest.raises(ValueError, match="cov"):
            wald_inference(fit, cov="robust")
        with pytest.raises(ValueError, match="level"):
            wald_inference(fit, level=1.0)

    def test_sandwich_column_selects_the_other_matrix(self):
        m1, m2 = np.array([[0.04]]), np.array([[0.09]])
        fit = GlmFit(np.array([0.5]), m1, m2, converged=True, iterations=2, offset_used=False)
        assert wald_inference(fit, cov="model").se[0] == 0.2
        assert wald_inference(fit, cov="sandwich").se[0] == 0.3
