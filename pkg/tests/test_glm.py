import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.linear_model import LinearRegression, LogisticRegression
from sklearn.metrics import roc_auc_score

from metric_forge.errors import (
    EmptyDataset,
    NonBinaryOutcome,
    SingleClassTarget,
    UnknownLevelAtPredictTime,
    WidthMismatch,
)
from metric_forge.glm import (
    CATEGORICAL,
    NUMERIC,
    FitResult,
    auc,
    fit_linear,
    fit_logistic,
    interaction_design,
    one_hot_encode,
    penalized_gradient,
    predict_mu,
)


def test_two_level_expansion():
    rows = [{"age": "adult"}, {"age": "young"}, {"age": "adult"}]
    x, enc = one_hot_encode(rows, [("age", CATEGORICAL)])
    assert x.tolist() == [[1, 0], [0, 1], [1, 0]]
    assert [(c.feature, c.level) for c in enc.columns] == [("age", "adult"), ("age", "young")]


def test_numeric_passthrough():
    x, enc = one_hot_encode([{"pulse": 48}, {"pulse": 88}], [("pulse", NUMERIC)])
    assert x.tolist() == [[48.0], [88.0]]
    assert enc.columns[0].level is None


def test_standardize_flag():
    x, enc = one_hot_encode([{"p": 1.0}, {"p": 3.0}], [("p", NUMERIC)], standardize=True)
    assert x.ravel().tolist() == [-1.0, 1.0]
    assert enc.transform([{"p": 2.0}]).tolist() == [[0.0]]


def test_encoding_errors():
    with pytest.raises(EmptyDataset):
        one_hot_encode([], [("a", CATEGORICAL)])
    _, enc = one_hot_encode([{"a": "x"}], [("a", CATEGORICAL)])
    with pytest.raises(UnknownLevelAtPredictTime):
        enc.transform([{"a": "y"}])


def test_column_order_is_schema_then_first_appearance():
    rows = [{"b": 2, "a": "z"}, {"b": 1, "a": "y"}]
    _, enc = one_hot_encode(rows, [("a", CATEGORICAL), ("b", NUMERIC)])
    assert [(c.feature, c.level) for c in enc.columns] == [("a", "z"), ("a", "y"), ("b", None)]


def _grid(reps=1):
    x = np.array([0, 1, 0, 1] * reps, dtype=float)[:, None]
    t = np.array([0, 0, 1, 1] * reps, dtype=float)
    return x, t


def test_exact_linear_recovery():
    x, t = _grid()
    y = 1 + 2 * x[:, 0] + 3 * t + 4 * x[:, 0] * t
    fit = fit_linear(x, t, y)
    np.testing.assert_allclose(fit.coef, [1, 2, 3, 4], atol=1e-9)
    assert predict_mu(fit, [1.0], 1) == pytest.approx(10.0, abs=1e-9)
    np.testing.assert_allclose(predict_mu(fit, x, t), y, atol=1e-9)
    assert fit.diagnostics["rmse"] < 1e-9 and fit.diagnostics["r2"] == pytest.approx(1.0)


def test_constant_target():
    x, t = _grid(3)
    fit = fit_linear(x, t, np.full(12, 2.5))
    assert fit.beta0 == pytest.approx(2.5, abs=1e-12)
    np.testing.assert_allclose(np.r_[fit.beta1, fit.beta2, fit.beta3], 0.0, atol=1e-12)
    assert fit.diagnostics["r2"] == 0.0


def test_linear_min_norm_matches_pinv(rng):
    # full one-hot without a dropped level: the design is rank deficient
    rows = [{"c": str(rng.integers(3)), "v": float(rng.normal())} for _ in range(80)]
    x, _ = one_hot_encode(rows, [("c", CATEGORICAL), ("v", NUMERIC)])
    t = rng.integers(0, 2, 80).astype(float)
    y = rng.normal(size=80)
    fit = fit_linear(x, t, y)
    z = interaction_design(x, t, intercept=False)
    zc = z - z.mean(axis=0)
    slopes = np.linalg.pinv(zc) @ (y - y.mean())
    np.testing.assert_allclose(fit.coef[1:], slopes, atol=1e-10)
    ref = LinearRegression().fit(z, y)
    np.testing.assert_allclose(interaction_design(x, t) @ fit.coef, ref.predict(z), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_normal_equations(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(12, 60)), int(rng.integers(1, 4))
    x = rng.normal(size=(n, d))
    t = rng.integers(0, 2, n).astype(float)
    if t.min() == t.max():
        t[0] = 1 - t[0]
    y = rng.normal(size=n) * 3 + x[:, 0]
    fit = fit_linear(x, t, y)
    z = interaction_design(x, t)
    if np.linalg.matrix_rank(z) < z.shape[1]:
        return
    resid = z.T @ (y - z @ fit.coef)
    assert np.max(np.abs(resid)) < 1e-8 * max(1.0, np.max(np.abs(z.T @ y)))


def test_logistic_matches_sklearn(rng):
    n = 400
    x = rng.normal(size=(n, 2))
    t = rng.integers(0, 2, n).astype(float)
    eta = 0.3 + x @ [1.0, -0.5] + 0.7 * t - 0.8 * x[:, 0] * t
    y = np.where(rng.random(n) < 1 / (1 + np.exp(-eta)), 1.0, -1.0)
    fit = fit_logistic(x, t, y, ridge=0.0)
    assert fit.converged
    z = interaction_design(x, t, intercept=False)
    ref = LogisticRegression(penalty=None, tol=1e-12, max_iter=10_000).fit(z, y)
    np.testing.assert_allclose(fit.coef, np.r_[ref.intercept_, ref.coef_[0]], atol=1e-5)
    prob = 1 / (1 + np.exp(-(interaction_design(x, t) @ fit.coef)))
    assert fit.diagnostics["auc"] == pytest.approx(roc_auc_score(y, prob), abs=1e-12)


def test_logistic_gradient_vanishes(rng):
    for ridge in (1e-6, 1e-2, 1.0):
        n = 300
        rows = [{"c": str(rng.integers(4)), "v": float(rng.normal())} for _ in range(n)]
        x, _ = one_hot_encode(rows, [("c", CATEGORICAL), ("v", NUMERIC)])
        t = rng.integers(0, 2, n).astype(float)
        y = np.where(rng.random(n) < 0.4 + 0.2 * t, 1.0, -1.0)
        fit = fit_logistic(x, t, y, ridge=ridge)
        assert fit.converged
        assert np.max(np.abs(penalized_gradient(fit, x, t, y))) < 1e-6


def test_separable_with_ridge():
    x = np.array([[-2.0], [-1.0], [1.0], [2.0], [-1.5], [1.5]])
    t = np.array([0, 1, 0, 1, 1, 0], dtype=float)
    y = np.where(x[:, 0] > 0, 1.0, -1.0)
    fit = fit_logistic(x, t, y, ridge=1e-6)
    assert np.all(np.isfinite(fit.coef))
    assert fit.diagnostics["auc"] == 1.0
    assert fit.diagnostics["accuracy"] == 1.0


def test_null_labels_auc_near_half(rng):
    n = 1000
    x = rng.normal(size=(n, 3))
    t = rng.integers(0, 2, n).astype(float)
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    fit = fit_logistic(x, t, y)
    assert abs(fit.diagnostics["auc"] - 0.5) < 0.1


def test_logistic_errors():
    x = np.zeros((3, 1))
    t = np.array([0.0, 1.0, 0.0])
    with pytest.raises(SingleClassTarget):
        fit_logistic(x, t, [1.0, 1.0, 1.0])
    with pytest.raises(NonBinaryOutcome):
        fit_logistic(x, t, [1.0, 0.0, -1.0])
    with pytest.raises(EmptyDataset):
        fit_linear(np.zeros((0, 1)), [], [])


def _fit(family, b0, b1, b2, b3):
    return FitResult(family, b0, np.atleast_1d(b1).astype(float), b2, np.atleast_1d(b3).astype(float), None, {})


def test_predict_examples():
    assert predict_mu(_fit("logistic", 0.0, 0.0, 0.0, 0.0), [0.3], 1) == 0.0
    assert predict_mu(_fit("linear", 1.0, 2.0, 3.0, 4.0), [1.0], 1) == 10.0
    assert predict_mu(_fit("logistic", 50.0, 0.0, 0.0, 0.0), [1.0], 0) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(WidthMismatch):
        predict_mu(_fit("linear", 1.0, [2.0], 3.0, [4.0]), [1.0, 2.0], 1)


def test_auc_conventions():
    assert auc([0, 0, 1, 1], [0.1, 0.2, 0.8, 0.9]) == 1.0
    assert auc([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5]) == 0.5
    rng = np.random.default_rng(3)
    lab = rng.integers(0, 2, 200)
    sc = np.round(rng.random(200), 1)
    assert auc(lab, sc) == pytest.approx(roc_auc_score(lab, sc), abs=1e-12)


def test_fit_result_round_trip(rng):
    rows = [{"c": str(rng.integers(3)), "v": float(rng.normal())} for _ in range(50)]
    x, enc = one_hot_encode(rows, [("c", CATEGORICAL), ("v", NUMERIC)])
    t = rng.integers(0, 2, 50).astype(float)
    fit = fit_linear(x, t, rng.normal(size=50), encoding=enc)
    again = FitResult.from_dict(json.loads(json.dumps(fit.to_dict())))
    np.testing.assert_array_equal(again.coef, fit.coef)
    np.testing.assert_array_equal(again.encoding.transform(rows), x)
