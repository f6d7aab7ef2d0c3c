import numpy as np
import pytest
from scipy.optimize import minimize

from misslogit.errors import DegenerateFitError
from misslogit.logistic_fit import LogisticModel, fit_logistic, penalized_loglik, predict_proba


def _simulate(n, beta, intercept=0.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, len(beta)))
    y = (rng.random(n) < 1 / (1 + np.exp(-(intercept + x @ beta)))).astype(float)
    return x, y


def test_constant_labels_rejected():
    with pytest.raises(DegenerateFitError):
        fit_logistic(np.arange(5.0)[:, None], np.ones(5))
    with pytest.raises(DegenerateFitError):
        fit_logistic(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ValueError):
        fit_logistic(np.array([[np.nan], [1.0]]), np.array([0, 1]))


def test_consistency_large_n():
    x, y = _simulate(200_000, [1.0], seed=1)
    model = fit_logistic(x, y)
    # Fisher information at the truth: n * E[w x^2]; ~3 SE tolerance
    rng = np.random.default_rng(2)
    t = rng.standard_normal(1_000_000)
    w = 1 / (1 + np.exp(-t)) * (1 - 1 / (1 + np.exp(-t)))
    se = 1 / np.sqrt(200_000 * np.mean(w * t * t))
    assert 3 * se < 0.03
    assert abs(model.coefs[0] - 1.0) < 0.03
    assert model.converged and not model.separation_flag


def test_separated_pair():
    model = fit_logistic(np.array([[-1.0], [1.0]]), np.array([0.0, 1.0]))
    assert model.separation_flag
    assert np.isfinite(model.coefs).all()
    assert np.linalg.norm(model.coefs) <= 1e3
    assert model.coefs[0] > 0


def test_separation_with_tiny_ridge_hits_norm_cap():
    x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    model = fit_logistic(x, np.array([0.0, 0.0, 1.0, 1.0]), ridge=0.0)
    assert model.separation_flag
    assert np.linalg.norm(model.coefs) <= 1e3


def test_predict_proba_values():
    zero = LogisticModel(0.0, np.zeros(3))
    np.testing.assert_array_equal(predict_proba(zero, np.ones((4, 3))), 0.5)
    model = LogisticModel(0.0, np.array([2.0, -1.0]))
    assert predict_proba(model, np.array([[1.0, 1.0]]))[0] == pytest.approx(1 / (1 + np.exp(-1)), abs=1e-12)
    assert predict_proba(model, np.array([[1.0, 1.0]]))[0] == pytest.approx(0.7311, abs=1e-4)
    grid = np.column_stack([np.linspace(-5, 5, 50), np.zeros(50)])
    assert np.all(np.diff(predict_proba(model, grid)) >= 0)
    extreme = predict_proba(LogisticModel(0.0, np.array([1e4])), np.array([[1.0], [-1.0]]))
    assert 0 < extreme.min() and extreme.max() < 1
    with pytest.raises(ValueError):
        predict_proba(model, np.ones((2, 3)))


@pytest.mark.parametrize("seed,p", [(0, 1), (1, 2), (2, 2), (3, 5)])
def test_gradient_at_optimum(seed, p):
    x, y = _simulate(400, np.linspace(-1, 1, p), intercept=0.3, seed=seed)
    model = fit_logistic(x, y)
    assert model.converged
    x1 = np.column_stack([np.ones(len(y)), x])
    prob = 1 / (1 + np.exp(-(x1 @ model.params)))
    pen = np.r_[0.0, np.full(p, 1e-8)]
    grad = x1.T @ (y - prob) - pen * model.params
    assert np.max(np.abs(grad)) / len(y) < 10 * 1e-8


@pytest.mark.parametrize("seed,p", [(4, 1), (5, 2)])
def test_matches_nelder_mead(seed, p):
    x, y = _simulate(150, [0.8, -1.2][:p], intercept=-0.4, seed=seed)
    model = fit_logistic(x, y)
    x1 = np.column_stack([np.ones(len(y)), x])
    res = minimize(
        lambda b: -penalized_loglik(b, x1, y, 1e-8),
        np.zeros(p + 1),
        method="Nelder-Mead",
        options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 20_000, "maxfev": 40_000},
    )
    np.testing.assert_allclose(model.params, res.x, atol=1e-4)


def test_row_permutation_bit_exact():
    x, y = _simulate(500, [0.5, -0.7, 1.1], seed=6)
    a = fit_logistic(x, y)
    perm = np.random.default_rng(7).permutation(500)
    b = fit_logistic(x[perm], y[perm])
    assert a.params.tobytes() == b.params.tobytes()
