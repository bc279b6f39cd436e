import json

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from explicable.errors import DegenerateDesign, MalformedModel, TooFewSamples, ZeroVariance
from explicable.regression import (
    LabeledSample,
    RegressionModel,
    as_arrays,
    best_split,
    dump_model,
    expand_grid,
    grid_search,
    load_model,
    predict,
    predict_raw,
    r2_score,
    train_forest,
    train_ridge,
    train_tree,
)


def samples_from(X, y):
    return [LabeledSample(tuple(x), float(v)) for x, v in zip(X, y)]


def random_samples(n, seed=0, noise=0.05):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 3))
    y = np.clip(1 - X.mean(axis=1) + rng.normal(0, noise, n), 0, 1)
    return samples_from(X, y)


def leaf(value):
    return {"feature": [-1], "threshold": [0.0], "left": [-1], "right": [-1], "value": [value]}


# --- samples ---------------------------------------------------------------

def test_sample_validation():
    with pytest.raises(ValueError):
        LabeledSample((0.1, 0.2, 1.5), 0.5)
    with pytest.raises(ValueError):
        LabeledSample((0.1, 0.2, 0.3), 1.2)
    with pytest.raises(ValueError):
        LabeledSample((0.1, 0.2), 0.5)


# --- ridge -----------------------------------------------------------------

def test_ridge_exact_hyperplane():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (20, 3))
    y = 0.1 + 0.2 * X[:, 0] + 0.3 * X[:, 1] + 0.15 * X[:, 2]
    m = train_ridge(samples_from(X, y), 0.0)
    assert np.allclose(m.predict_many(X), y, atol=1e-9)
    assert np.allclose(m.params["weights"], [0.2, 0.3, 0.15], atol=1e-9)


def test_ridge_huge_lambda_predicts_mean():
    s = random_samples(40)
    m = train_ridge(s, 1e9)
    assert np.allclose(m.params["weights"], 0, atol=1e-3)
    _, y = as_arrays(s)
    assert abs(predict_raw(m, (0.3, 0.3, 0.3)) - y.mean()) < 1e-3


@pytest.mark.parametrize("lam", [0.0, 0.5, 3.0])
def test_ridge_matches_gradient_descent(lam):
    s = random_samples(50, seed=4)
    X, y = as_arrays(s)
    m = train_ridge(s, lam)
    w, b = oracles.ridge_gradient_descent(X, y, lam)
    assert np.allclose(m.params["weights"], w, atol=1e-6)
    assert abs(m.params["intercept"] - b) < 1e-6


def test_ridge_matches_normal_equations():
    s = random_samples(30, seed=2)
    X, y = as_arrays(s)
    A = np.hstack([np.ones((len(y), 1)), X])
    theta = np.linalg.solve(A.T @ A, A.T @ y)
    m = train_ridge(s, 0.0)
    assert np.allclose(m.params["weights"], theta[1:], atol=1e-9)
    assert abs(m.params["intercept"] - theta[0]) < 1e-9


def test_ridge_degenerate_design():
    X = np.array([[0.1, 0.1, 0.5], [0.2, 0.2, 0.5], [0.3, 0.3, 0.5], [0.4, 0.4, 0.5]])
    s = samples_from(X, [0.1, 0.2, 0.3, 0.4])
    with pytest.raises(DegenerateDesign):
        train_ridge(s, 0.0)
    train_ridge(s, 0.1)  # regularized is fine


def test_ridge_needs_two_samples():
    with pytest.raises(TooFewSamples):
        train_ridge(random_samples(1), 1.0)


# --- trees -----------------------------------------------------------------

def test_tree_constant_targets_single_leaf():
    s = samples_from(np.random.default_rng(0).uniform(0, 1, (10, 3)), [0.4] * 10)
    m = train_tree(s)
    assert m.params["nodes"]["feature"] == [-1]
    assert predict(m, (0.9, 0.1, 0.5)) == 0.4


def test_tree_single_sample():
    m = train_tree([LabeledSample((0.2, 0.3, 0.4), 0.7)])
    assert predict(m, (0.0, 0.0, 0.0)) == 0.7


HAND_X = np.array([[0.1, 0.9, 0.5], [0.2, 0.8, 0.4], [0.3, 0.7, 0.3], [0.4, 0.6, 0.2],
                   [0.5, 0.5, 0.1], [0.6, 0.4, 0.9], [0.7, 0.3, 0.8], [0.8, 0.2, 0.7]])
HAND_Y = np.array([1.0, 0.9, 0.95, 0.6, 0.5, 0.2, 0.1, 0.0])


def _oracle_tree(X, y, depth):
    if depth == 0 or np.ptp(y) == 0 or len(y) < 2:
        return ("leaf", float(y.mean()))
    f, t, _ = oracles.best_split(X, y)
    mask = X[:, f] <= t
    return ("split", f, t, _oracle_tree(X[mask], y[mask], depth - 1), _oracle_tree(X[~mask], y[~mask], depth - 1))


def _as_structure(nodes, i=0):
    if nodes["feature"][i] < 0:
        return ("leaf", nodes["value"][i])
    return ("split", nodes["feature"][i], nodes["threshold"][i],
            _as_structure(nodes, nodes["left"][i]), _as_structure(nodes, nodes["right"][i]))


def test_tree_depth_two_matches_brute_force():
    m = train_tree(samples_from(HAND_X, HAND_Y), max_depth=2)
    got = _as_structure(m.params["nodes"])
    want = _oracle_tree(HAND_X, HAND_Y, 2)
    assert json.dumps(got) == json.dumps(want) or _close(got, want)


def _close(a, b):
    if a[0] != b[0]:
        return False
    if a[0] == "leaf":
        return abs(a[1] - b[1]) < 1e-12
    return a[1] == b[1] and abs(a[2] - b[2]) < 1e-12 and _close(a[3], b[3]) and _close(a[4], b[4])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4), st.integers(0, 4)),
                min_size=2, max_size=12))
def test_best_split_matches_oracle(rows):
    X = np.array([r[:3] for r in rows], float) / 4
    y = np.array([r[3] for r in rows], float) / 4
    got = best_split(X, y, [0, 1, 2])
    want = oracles.best_split(X, y)
    if want is None:
        assert got is None
    else:
        assert got[0] == want[0] and got[1] == pytest.approx(want[1]) and got[2] == pytest.approx(want[2], abs=1e-9)


def test_unlimited_tree_interpolates_distinct_rows():
    s = random_samples(60, seed=5)
    X, y = as_arrays(s)
    m = train_tree(s)
    assert r2_score(y, m.predict_many(X)) == 1.0


# --- forests ---------------------------------------------------------------

def test_forest_reduces_to_tree():
    s = random_samples(40, seed=6)
    f = train_forest(s, n_trees=1, feature_subset=3, bootstrap=False, seed=9)
    t = train_tree(s)
    assert f.params["trees"][0] == t.params["nodes"]


def test_forest_deterministic():
    s = random_samples(40, seed=6)
    assert dump_model(train_forest(s, 8, seed=3)) == dump_model(train_forest(s, 8, seed=3))
    assert dump_model(train_forest(s, 8, seed=3)) != dump_model(train_forest(s, 8, seed=4))


def test_forest_is_mean_of_trees():
    m = train_forest(random_samples(50, seed=7), n_trees=7, max_depth=4, seed=1)
    for x in np.random.default_rng(0).uniform(0, 1, (100, 3)):
        per_tree = m.tree_predictions(x)
        assert m.predict_raw(x) == sum(per_tree) / len(per_tree)


def test_three_tree_forest_known_leaves():
    m = RegressionModel("forest", {"trees": [leaf(0.2), leaf(0.5), leaf(0.8)]})
    assert predict(m, (0.1, 0.2, 0.3)) == pytest.approx(0.5)


def test_forest_synthetic_r2():
    from explicable.regression import cross_val_r2

    scores = cross_val_r2("forest", random_samples(200, seed=0),
                          {"n_trees": 30, "feature_subset": 2, "min_split": 5}, folds=5, seed=0)
    assert np.mean(scores) >= 0.80


def test_forest_parameter_checks():
    with pytest.raises(ValueError):
        train_forest(random_samples(5), n_trees=0)
    with pytest.raises(ValueError):
        train_forest(random_samples(5), feature_subset=4)


# --- predict / r2 ----------------------------------------------------------

def test_predict_constant_ridge():
    m = RegressionModel("ridge", {"weights": [0.0, 0.0, 0.0], "intercept": 0.5, "lambda": 1.0})
    assert predict(m, (0.9, 0.1, 0.3)) == 0.5


def test_predict_clamps_but_raw_does_not():
    m = RegressionModel("ridge", {"weights": [1.0, 1.0, 1.0], "intercept": 0.5, "lambda": 0.0})
    assert predict(m, (1, 1, 1)) == 1.0
    assert predict_raw(m, (1, 1, 1)) == 3.5


def test_predict_unknown_kind():
    with pytest.raises(MalformedModel):
        predict(RegressionModel("svm", {}), (0, 0, 0))


@pytest.mark.parametrize("actual,pred,want", [
    ([0, 1], [0, 1], 1.0),
    ([0, 1, 2], [1, 1, 1], 0.0),
    ([0, 1], [0.5, 0.5], 0.0),
    ([0, 1], [0.25, 0.75], 0.75),
])
def test_r2(actual, pred, want):
    assert r2_score(actual, pred) == pytest.approx(want, abs=1e-12)


def test_r2_errors():
    with pytest.raises(ZeroVariance):
        r2_score([1, 1], [1, 1])
    with pytest.raises(ValueError):
        r2_score([0, 1], [0])


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=20), st.randoms(use_true_random=False))
def test_r2_matches_oracle(actual, rnd):
    assume(np.var(actual) > 1e-6)
    pred = [rnd.random() for _ in actual]
    assert r2_score(actual, pred) == pytest.approx(oracles.r2(actual, pred), abs=1e-9)


def test_tree_and_forest_predictions_stay_in_target_range():
    s = random_samples(80, seed=8)
    X, y = as_arrays(s)
    probe = np.random.default_rng(1).uniform(0, 1, (300, 3))
    for m in (train_tree(s, max_depth=5), train_forest(s, 10, seed=2)):
        p = m.predict_many(probe)
        assert p.min() >= y.min() and p.max() <= y.max()


# --- grid search -----------------------------------------------------------

def test_expand_grid_order():
    assert expand_grid({"a": [1, 2], "b": ["x", "y"]}) == [
        {"a": 1, "b": "x"}, {"a": 1, "b": "y"}, {"a": 2, "b": "x"}, {"a": 2, "b": "y"}]


def test_grid_of_one():
    r = grid_search(random_samples(30), "ridge", [{"lambda": 0.1}], folds=3)
    assert r.winner == 0 and r.best_params == {"lambda": 0.1}


def test_useful_tuple_beats_depth_zero():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (40, 3))
    X[:, 1] = np.where(X[:, 1] <= 0.5, X[:, 1] * 0.6, 0.7 + X[:, 1] * 0.3)  # gap around 0.5
    y = np.where(X[:, 1] <= 0.5, 0.9, 0.1)
    r = grid_search(samples_from(X, y), "tree", [{"max_depth": 0}, {"max_depth": 1}], folds=4, seed=1)
    assert r.best_params == {"max_depth": 1}
    assert r.best_r2 == pytest.approx(1.0)


def test_grid_search_deterministic_and_table():
    s = random_samples(40, seed=3)
    grid = expand_grid({"max_depth": [2, None], "min_split": [2, 4]})
    a = grid_search(s, "tree", grid, folds=4, seed=5)
    b = grid_search(s, "tree", grid, folds=4, seed=5)
    assert a.table() == b.table() and a.mean_r2 == b.mean_r2
    assert a.table().count("\n") == 2 + len(grid)


def test_grid_search_argument_checks():
    with pytest.raises(TooFewSamples):
        grid_search(random_samples(3), "ridge", [{}], folds=5)
    with pytest.raises(ValueError):
        grid_search(random_samples(10), "ridge", [{}], folds=1)


# --- serialization ---------------------------------------------------------

@pytest.mark.parametrize("kind", ["ridge", "tree", "forest"])
def test_serialization_round_trip(kind):
    s = random_samples(60, seed=9)
    m = {"ridge": lambda: train_ridge(s, 0.5), "tree": lambda: train_tree(s, 6),
         "forest": lambda: train_forest(s, 5, seed=1)}[kind]()
    again = load_model(dump_model(m))
    probe = np.random.default_rng(2).uniform(0, 1, (1000, 3))
    assert np.array_equal(m.predict_many(probe), again.predict_many(probe))
    assert dump_model(again) == dump_model(m)


@pytest.mark.parametrize("text", [
    "not json",
    json.dumps({"format": "other", "version": 1}),
    json.dumps({"format": "explicability-model", "version": 1, "kind": "ridge", "params": {"weights": [1]}}),
    json.dumps({"format": "explicability-model", "version": 1, "kind": "forest", "params": {"trees": []}}),
])
def test_malformed_models(text):
    with pytest.raises(MalformedModel):
        load_model(text)
