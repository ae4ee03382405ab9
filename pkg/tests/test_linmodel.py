import numpy as np
import pytest

from conftest import orthonormal_design
from ecko.linmodel import kkt_violation, lambda_grid, lasso_cv_lambda, lasso_fit


def soft(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def standardized(rng, n, m):
    D = rng.standard_normal((n, m))
    return (D - D.mean(axis=0)) / D.std(axis=0)


def test_orthonormal_example(rng):
    D = orthonormal_design(rng, 30, 6)
    fit = lasso_fit(D, 2 * D[:, 0], 0.5)
    assert fit.converged
    assert fit.w_hat[0] == pytest.approx(1.5, abs=1e-9)
    np.testing.assert_allclose(fit.w_hat[1:], 0.0, atol=1e-9)


def test_orthonormal_matches_soft_threshold(rng):
    for _ in range(100):
        m = int(rng.integers(1, 21))
        n = int(rng.integers(m, 60))
        D = orthonormal_design(rng, n, m)
        y = rng.standard_normal(n) * 3
        lam = float(rng.uniform(0.05, 2.0))
        fit = lasso_fit(D, y, lam)
        assert np.max(np.abs(fit.w_hat - soft(D.T @ y, lam))) <= 1e-6


def test_above_lambda_max_gives_zero(rng):
    D = standardized(rng, 40, 15)
    y = rng.standard_normal(40)
    y -= y.mean()
    fit = lasso_fit(D, y, np.max(np.abs(D.T @ y)) * 1.0001)
    assert not fit.w_hat.any()
    assert fit.converged


def test_zero_response_gives_zero(rng):
    D = standardized(rng, 20, 30)
    fit = lasso_fit(D, np.zeros(20), 0.3)
    assert not fit.w_hat.any()


@pytest.mark.parametrize("shape,lam", [((50, 20), 5.0), ((40, 80), 2.0), ((100, 200), 10.0), ((60, 30), 0.5)])
def test_kkt_and_monotone_objective(rng, shape, lam):
    n, m = shape
    D = standardized(rng, n, m)
    D[:, 1] = D[:, 0] + 0.1 * D[:, 1]  # some strong collinearity
    D = (D - D.mean(axis=0)) / D.std(axis=0)
    y = D[:, :3] @ np.array([2.0, -1.0, 0.5]) + rng.standard_normal(n)
    y -= y.mean()
    fit = lasso_fit(D, y, lam, max_iters=5000)
    assert fit.converged
    assert fit.kkt_violation <= 1e-6
    assert kkt_violation(D, y, fit.w_hat, lam) <= 1e-6
    tr = fit.objective_trace
    assert len(tr) == fit.n_iters + 1
    assert np.all(np.diff(tr) <= 1e-10 * np.abs(tr[:-1]))
    direct = 0.5 * np.sum((y - D @ fit.w_hat) ** 2) + lam * np.abs(fit.w_hat).sum()
    assert tr[-1] == pytest.approx(direct, rel=1e-10)


def test_matches_sklearn(rng):
    from sklearn.linear_model import Lasso

    D = standardized(rng, 60, 40)
    y = D[:, :4] @ np.array([1.0, -2.0, 0.7, 0.3]) + rng.standard_normal(60)
    y -= y.mean()
    lam = 8.0
    ref = Lasso(alpha=lam / 60, fit_intercept=False, tol=1e-12, max_iter=100000).fit(D, y).coef_
    np.testing.assert_allclose(lasso_fit(D, y, lam).w_hat, ref, atol=1e-6)


def test_warm_start_same_solution(rng):
    D = standardized(rng, 50, 30)
    y = D[:, 0] + rng.standard_normal(50)
    y -= y.mean()
    cold = lasso_fit(D, y, 3.0)
    warm = lasso_fit(D, y, 3.0, w0=lasso_fit(D, y, 6.0).w_hat)
    np.testing.assert_allclose(cold.w_hat, warm.w_hat, atol=1e-7)


def test_not_converged_flag(rng):
    D = standardized(rng, 50, 100)
    y = D[:, :10].sum(axis=1) + rng.standard_normal(50)
    fit = lasso_fit(D, y - y.mean(), 0.01, max_iters=2)
    assert not fit.converged
    assert fit.n_iters == 2


def test_rejects_bad_input(rng):
    D = standardized(rng, 10, 3)
    D[:, 1] = 1.0
    with pytest.raises(ValueError, match="zero-variance"):
        lasso_fit(D, rng.standard_normal(10), 1.0)
    D = standardized(rng, 10, 3)
    D[2, 2] = np.inf
    with pytest.raises(ValueError):
        lasso_fit(D, rng.standard_normal(10), 1.0)
    with pytest.raises(ValueError):
        lasso_fit(standardized(rng, 10, 3), rng.standard_normal(10), 0.0)


def test_cv_deterministic(rng):
    D = standardized(rng, 40, 30)
    y = D[:, 0] + rng.standard_normal(40)
    assert lasso_cv_lambda(D, y, seed=3) == lasso_cv_lambda(D, y, seed=3)


def test_cv_grid_membership(rng):
    D = standardized(rng, 40, 30)
    y = D[:, 0] + rng.standard_normal(40)
    y -= y.mean()
    lam = lasso_cv_lambda(D, y, n_folds=4, grid_size=12, seed=0)
    assert np.isclose(lambda_grid(D, y, 12), lam, rtol=0, atol=0).any()
    grid = lambda_grid(D, y, 12)
    assert grid[0] == pytest.approx(np.max(np.abs(D.T @ y)) / 40)
    assert grid[-1] == pytest.approx(grid[0] / 1000)


def test_cv_rejects_too_few_samples(rng):
    with pytest.raises(ValueError):
        lasso_cv_lambda(standardized(rng, 4, 3), rng.standard_normal(4), n_folds=5)


def test_cv_pure_noise_prefers_heavy_shrinkage():
    upper = 0
    for seed in range(50):
        r = np.random.default_rng(seed)
        D = standardized(r, 60, 40)
        y = r.standard_normal(60)
        y -= y.mean()
        lam = lasso_cv_lambda(D, y, seed=seed)
        grid = lambda_grid(D, y, 20)
        upper += lam >= grid[9]
    assert upper > 25


def test_cv_strong_signal_is_recovered():
    for seed in range(10):
        r = np.random.default_rng(seed)
        D = standardized(r, 80, 50)
        y = 3.0 * D[:, 7] + 0.3 * r.standard_normal(80)
        y -= y.mean()
        alpha = lasso_cv_lambda(D, y, seed=seed)
        fit = lasso_fit(D, y, 80 * alpha)
        assert fit.w_hat[7] > 0
