import numpy as np
import pytest

from kllime.divergence import EPS_P
from kllime.models import (BayesLinearPosterior, BayesLogisticPosterior, NewtonError,
                           fit_bayes_linear, fit_bayes_logistic, logistic_gradient,
                           posterior_from_dict, predict_bayes_linear, predict_bayes_logistic,
                           sample_bayes_logistic)


def test_linear_zero_targets():
    X = np.random.default_rng(0).normal(size=(30, 4))
    post = fit_bayes_linear(X, np.zeros(30))
    assert np.all(post.mean == 0)


def test_linear_ridge_limit():
    # closed form: mean = sum(x y) / (sum(x^2) + alpha) = 2 / (2 + alpha)
    for alpha in (1e-2, 1e-5, 1e-8):
        post = fit_bayes_linear([[1.0], [1.0]], [1.0, 1.0], alpha=alpha)
        assert post.mean[0] == pytest.approx(2 / (2 + alpha), rel=1e-12)
    assert abs(post.mean[0] - 1) < 1e-8


def test_linear_duplicate_data_shrinks_covariance():
    g = np.random.default_rng(1)
    X, y = g.normal(size=(20, 3)), g.normal(size=20)
    one = fit_bayes_linear(X, y)
    two = fit_bayes_linear(np.vstack([X, X]), np.concatenate([y, y]))
    assert np.trace(two.cov) < np.trace(one.cov)
    np.testing.assert_allclose(one.cov, one.cov.T)
    assert np.all(np.linalg.eigvalsh(one.cov) > 0)
    assert one.a_n > 0 and one.b_n > 0


def test_linear_matches_conjugate_formulas():
    g = np.random.default_rng(2)
    X, y = g.normal(size=(15, 2)), g.normal(size=15)
    post = fit_bayes_linear(X, y, alpha=0.5, a0=2.0, b0=3.0)
    prec = X.T @ X + 0.5 * np.eye(2)
    m = np.linalg.inv(prec) @ X.T @ y
    np.testing.assert_allclose(post.mean, m, atol=1e-12)
    assert post.a_n == 2.0 + 7.5
    assert post.b_n == pytest.approx(3.0 + 0.5 * (y @ y - m @ prec @ m))


def test_linear_point_posterior():
    post = BayesLinearPosterior.point([1.0, -2.0], 0.3)
    Z = np.array([[1.0, 1.0], [2.0, 0.5]])
    pm = predict_bayes_linear(post, Z, 1, seed=5)
    np.testing.assert_array_equal(pm.mu[0], Z @ post.mean)
    np.testing.assert_array_equal(pm.sigma2, 0.3)


def test_linear_sampling_mean_and_determinism(linear_posterior):
    Z = np.random.default_rng(3).normal(size=(5, 8))
    pm = predict_bayes_linear(linear_posterior, Z, 10_000, seed=11)
    again = predict_bayes_linear(linear_posterior, Z, 10_000, seed=11)
    np.testing.assert_array_equal(pm.mu, again.mu)
    se = pm.mu.std(axis=0) / np.sqrt(10_000)
    assert np.all(np.abs(pm.mu.mean(axis=0) - Z @ linear_posterior.mean) <= 3 * se)
    # each row shares one noise draw
    assert np.all(pm.sigma2 == pm.sigma2[:, :1])


def _symmetric_data(seed=0):
    g = np.random.default_rng(seed)
    X = g.normal(size=(40, 3))
    y = (X @ [1.0, -1.0, 0.5] + g.normal(size=40) > 0).astype(float)
    return np.vstack([X, -X]), np.concatenate([y, 1 - y])


def test_logistic_symmetric_intercept():
    X, y = _symmetric_data()
    post = fit_bayes_logistic(X, y, alpha=1.0)
    assert abs(post.intercept) <= 1e-8


def test_logistic_gradient_at_map():
    X, y = _symmetric_data(1)
    post = fit_bayes_logistic(X, y, alpha=0.5)
    Xa = np.hstack([np.ones((len(y), 1)), X])
    assert np.linalg.norm(logistic_gradient(post.map, Xa, y, 0.5)) <= 1e-8
    assert np.all(np.linalg.eigvalsh(post.cov) > 0)


def test_logistic_laplace_sampling():
    X, y = _symmetric_data(2)
    post = fit_bayes_logistic(X, y)
    draws = sample_bayes_logistic(post, 10_000, seed=4)
    se = np.sqrt(np.diag(post.cov) / 10_000)
    assert np.all(np.abs(draws.mean(axis=0) - post.map) <= 3 * se)


def test_logistic_predictions_clamped():
    post = BayesLogisticPosterior(np.array([0.0, 100.0]), np.zeros((2, 2)))
    pm = predict_bayes_logistic(post, [[1.0], [-1.0]], 2, seed=0)
    assert pm.p.max() == 1 - EPS_P and pm.p.min() == EPS_P


def test_logistic_newton_failure():
    X, y = _symmetric_data(3)
    with pytest.raises(NewtonError):
        fit_bayes_logistic(X, y, max_iter=1)


def test_logistic_rejects_bad_labels():
    with pytest.raises(ValueError):
        fit_bayes_logistic([[1.0], [2.0]], [0, 2])


def test_serialization_round_trip(linear_posterior):
    X, y = _symmetric_data()
    logi = fit_bayes_logistic(X, y)
    for post in (linear_posterior, logi):
        back = posterior_from_dict(post.to_dict())
        Z = np.ones((2, post.cov.shape[0] - (1 if post is logi else 0)))
        if post is logi:
            a, b = predict_bayes_logistic(post, Z, 3, 1).p, predict_bayes_logistic(back, Z, 3, 1).p
        else:
            a, b = predict_bayes_linear(post, Z, 3, 1).mu, predict_bayes_linear(back, Z, 3, 1).mu
        np.testing.assert_array_equal(a, b)
    with pytest.raises(ValueError):
        posterior_from_dict({"kind": "gp"})
