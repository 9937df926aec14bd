import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog
from scipy.stats import norm

from churnlag import models
from churnlag.models import (
    FAMILIES,
    ClassifierSpec,
    DegenerateTrainingError,
    ModelError,
    ShapeError,
    accuracy,
    decision_score,
    fit,
    gini_impurity,
    load_model,
    predict,
    save_model,
)
from churnlag.models.mlp import init_params, loss_and_grad

XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([1, 1, -1, -1])


def blobs(n, seed, dims=2, distance=4.0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    X = rng.normal(size=(n, dims))
    X[:, 0] += np.where(y == 1, distance, 0.0)
    return X, y


def test_naive_bayes_fitted_parameters():
    X = np.array([[0.0], [0.2], [10.0], [10.2]])
    y = np.array([-1, -1, 1, 1])
    nb = fit(ClassifierSpec("naive_bayes"), X, y).estimator
    np.testing.assert_allclose(nb.means[:, 0], [0.1, 10.1], rtol=1e-12)
    np.testing.assert_allclose(nb.vars[:, 0], [0.01, 0.01], rtol=1e-9)
    assert nb.priors.tolist() == [0.5, 0.5]


def test_naive_bayes_predicts_nearby_class():
    X = np.array([[0.0], [0.2], [10.0], [10.2]])
    y = np.array([-1, -1, 1, 1])
    m = fit(ClassifierSpec("naive_bayes"), X, y)
    # hand computation: equal priors and variances, so the nearer mean wins
    assert predict(m, [[0.05]]).tolist() == [-1]
    assert predict(m, [[9.0]]).tolist() == [1]


def closed_form_posterior(X, y, rows, floor=1e-9):
    logs = {}
    for c in (-1, 1):
        Xc = X[y == c]
        mu = Xc.mean(axis=0)
        var = np.maximum(Xc.var(axis=0), floor)
        prior = len(Xc) / len(y)
        logs[c] = np.log(prior) + norm.logpdf(rows, mu, np.sqrt(var)).sum(axis=1)
    m = np.maximum(logs[1], logs[-1])
    return np.exp(logs[1] - m) / (np.exp(logs[1] - m) + np.exp(logs[-1] - m))


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_naive_bayes_matches_closed_form(data):
    n = data.draw(st.integers(4, 20))
    d = data.draw(st.integers(1, 3))
    seed = data.draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) * rng.uniform(0.1, 3.0, size=d)
    y = np.where(rng.permutation(n) < n // 2, 1, -1)
    rows = rng.normal(size=(5, d))
    nb = fit(ClassifierSpec("naive_bayes"), X, y).estimator
    np.testing.assert_allclose(nb.predict_proba(rows), closed_form_posterior(X, y, rows), atol=1e-9, rtol=0)


@pytest.mark.parametrize("seed", range(5))
def test_mlp_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(7, 4))
    y = np.where(rng.random(7) < 0.5, 1.0, -1.0)
    params = init_params(4, 5, rng)
    params["b1"] = rng.normal(size=5) * 0.1
    _, grads = loss_and_grad(params, X, y)
    h = 1e-6
    for name, value in params.items():
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + h
            up = loss_and_grad(params, X, y)[0]
            value[idx] = orig - h
            down = loss_and_grad(params, X, y)[0]
            value[idx] = orig
            numeric[idx] = (up - down) / (2 * h)
        rel = np.linalg.norm(numeric - grads[name]) / max(np.linalg.norm(numeric) + np.linalg.norm(grads[name]), 1e-12)
        assert rel <= 1e-4, (name, rel)


def test_xor_is_not_linearly_separable():
    # LP feasibility of y_i (w.x_i + b) >= 1: infeasible for XOR, so at most 3 of 4 can be right
    A = -XOR_Y[:, None] * np.hstack([XOR_X, np.ones((4, 1))])
    res = linprog(np.zeros(3), A_ub=A, b_ub=-np.ones(4), bounds=[(None, None)] * 3)
    assert res.status == 2
    for drop in range(4):
        keep = np.arange(4) != drop
        sub = linprog(np.zeros(3), A_ub=A[keep], b_ub=-np.ones(3), bounds=[(None, None)] * 3)
        assert sub.status == 0


def test_xor_forest_vs_linear_svm():
    rf = fit(ClassifierSpec("random_forest", seed=1), XOR_X, XOR_Y)
    svm = fit(ClassifierSpec("svm"), XOR_X, XOR_Y)
    assert accuracy(rf, XOR_X, XOR_Y) == 1.0
    assert accuracy(svm, XOR_X, XOR_Y) <= 0.75


def test_svm_two_point_max_margin():
    X = np.array([[3.0, 0.0], [1.0, 0.0]])
    y = np.array([1, -1])
    m = fit(ClassifierSpec("svm", {"iterations": 5000, "step": 0.1}), X, y)
    w, b = m.estimator.w, m.estimator.b
    # hard-margin solution: w = (1, 0), b = -2
    np.testing.assert_allclose(w, [1.0, 0.0], atol=0.05)
    assert abs(b + 2.0) < 0.1
    rows = np.array([[2.5, 1.0], [0.0, -3.0]])
    np.testing.assert_array_equal(decision_score(m, rows), rows @ w + b)


@pytest.mark.parametrize("family", FAMILIES)
def test_blob_held_out_accuracy(family):
    X, y = blobs(500, seed=10)
    Xt, yt = blobs(500, seed=11)
    m = fit(ClassifierSpec(family, seed=3), X, y)
    assert accuracy(m, Xt, yt) >= 0.95


@pytest.mark.parametrize("family", FAMILIES)
def test_score_sign_matches_predict_and_determinism(family):
    X, y = blobs(120, seed=2, dims=3, distance=1.5)
    a = fit(ClassifierSpec(family, seed=9), X, y)
    b = fit(ClassifierSpec(family, seed=9), X, y)
    s = decision_score(a, X)
    assert np.array_equal(predict(a, X), np.where(s >= 0, 1, -1))
    assert np.array_equal(s, decision_score(b, X))
    assert predict(a, np.empty((0, 3))).shape == (0,)
    with pytest.raises(ShapeError):
        predict(a, np.zeros((2, 4)))


@pytest.mark.parametrize("family", FAMILIES)
def test_save_load_round_trip(family, tmp_path):
    X, y = blobs(100, seed=4, dims=3, distance=1.0)
    m = fit(ClassifierSpec(family, seed=5), X, y)
    path = tmp_path / f"{family}.npz"
    save_model(m, path)
    again = load_model(path)
    assert again.spec == m.spec
    assert again.oob_error == m.oob_error
    assert np.array_equal(decision_score(again, X), decision_score(m, X))


def test_oob_only_for_forest():
    X, y = blobs(80, seed=1)
    for family in FAMILIES:
        m = fit(ClassifierSpec(family), X, y)
        assert (m.oob_error is not None) == (family == "random_forest")


def test_forest_score_range_and_unanimity():
    X, y = blobs(200, seed=6)
    m = fit(ClassifierSpec("random_forest", {"n_trees": 50}), X, y)
    s = decision_score(m, X)
    assert np.all(s >= -1) and np.all(s <= 1)
    X1 = np.linspace(-1, 1, 100)[:, None]
    m = fit(ClassifierSpec("random_forest", {"n_trees": 50}), X1, np.where(X1[:, 0] > 0, 1, -1))
    far = decision_score(m, [[100.0]])
    assert far.tolist() == [1.0]


def test_tie_goes_to_active():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    y = np.array([1, -1, 1, -1])
    m = fit(ClassifierSpec("naive_bayes"), X, y)
    assert decision_score(m, [[0.5]]).tolist() == [0.0]
    assert predict(m, [[0.5]]).tolist() == [1]


def test_forest_oob_close_to_separable():
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(200, 2))
    y = np.where(X[:, 0] > 0.1, 1, -1)
    m = fit(ClassifierSpec("random_forest", seed=2), X, y)
    assert m.oob_error <= 0.05


def test_gini_values():
    assert gini_impurity([1, 1, 1]) == 0.0
    assert gini_impurity([1, -1]) == 0.5
    assert gini_impurity([1, 1, -1, -1]) == 0.5


def test_forest_splits_never_increase_impurity():
    X, y = blobs(150, seed=8, dims=4, distance=1.0)
    m = fit(ClassifierSpec("random_forest", {"n_trees": 25}, seed=4), X, y)
    rf = m.estimator
    nodes = rf.nodes
    X32 = X.astype(np.float32)
    checked = 0
    for t in range(nodes.n_trees):
        rows = np.repeat(np.arange(len(y)), rf.inbag[:, t])
        reach = {nodes.roots[t]: rows}
        frontier = [nodes.roots[t]]
        while frontier:
            node = frontier.pop()
            left, right = nodes.left[node], nodes.right[node]
            if left == node:
                continue
            here = reach[node]
            go_left = X32[here, nodes.feature[node]] <= nodes.threshold[node]
            reach[left], reach[right] = here[go_left], here[~go_left]
            n, nl, nr = len(here), go_left.sum(), (~go_left).sum()
            decrease = gini_impurity(y[here]) - (nl * gini_impurity(y[reach[left]]) + nr * gini_impurity(y[reach[right]])) / n
            assert decrease >= -1e-12
            checked += 1
            frontier += [left, right]
    assert checked > 100


def test_boosting_training_loss_non_increasing():
    X, y = blobs(300, seed=12, dims=3, distance=1.0)
    m = fit(ClassifierSpec("gradient_boosting", seed=1), X, y)
    staged = m.estimator.staged_scores(X)
    losses = np.mean(np.logaddexp(0.0, -y[None, :] * staged), axis=1)
    assert len(losses) == 100
    assert np.all(np.diff(losses) <= 1e-12)
    np.testing.assert_allclose(staged[-1], decision_score(m, X), rtol=1e-12)


def test_boosting_agrees_with_reference_scores():
    from sklearn.ensemble import GradientBoostingClassifier

    X, y = blobs(200, seed=13, dims=3, distance=1.0)
    spec = ClassifierSpec("gradient_boosting", seed=21)
    m = fit(spec, X, y)
    seed32 = int(np.random.default_rng(np.random.SeedSequence(21)).integers(0, 2**31 - 1))
    ref = GradientBoostingClassifier(n_estimators=100, max_depth=3, learning_rate=0.1, random_state=seed32)
    ref.fit(X.astype(np.float32), y)
    Xt, _ = blobs(50, seed=14, dims=3)
    np.testing.assert_allclose(decision_score(m, Xt), ref.decision_function(Xt.astype(np.float32)), atol=1e-10)


def test_oob_tracks_held_out_error():
    X, y = blobs(2000, seed=15, distance=2.0)
    Xt, yt = blobs(2000, seed=16, distance=2.0)
    m = fit(ClassifierSpec("random_forest", seed=7), X, y)
    held_out = 1.0 - accuracy(m, Xt, yt)
    assert abs(m.oob_error - held_out) <= 0.05


@pytest.mark.parametrize(
    "family, hp",
    [
        ("random_forest", {"n_trees": 0}),
        ("gradient_boosting", {"learning_rate": 0.0}),
        ("mlp", {"hidden": 0}),
        ("svm", {"bogus": 1}),
    ],
)
def test_hyperparameter_validation(family, hp):
    with pytest.raises(ModelError):
        ClassifierSpec(family, hp)


def test_unknown_family():
    with pytest.raises(ModelError):
        ClassifierSpec("knn")


def test_training_preconditions():
    X = np.zeros((4, 2))
    with pytest.raises(DegenerateTrainingError):
        fit(ClassifierSpec("svm"), X, np.ones(4, dtype=int))
    with pytest.raises(ModelError):
        fit(ClassifierSpec("svm"), np.array([[np.inf, 0], [0, 0]]), np.array([1, -1]))
    with pytest.raises(ModelError):
        fit(ClassifierSpec("svm"), X, np.array([1, 0, 1, 0]))


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.npz"
    np.savez(path, __header__=np.array('{"format": "other", "version": 1}'))
    with pytest.raises(ModelError):
        load_model(path)


def test_public_names():
    assert set(models.FAMILIES) == set(models.DEFAULT_HYPERPARAMETERS)
