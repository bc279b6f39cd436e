"""Regressors mapping plan-distance features to explicability scores.

Three model families are provided: ridge regression (closed form), CART
regression trees and random forests of such trees.  Models serialize to a
small JSON document and predict deterministically from it.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDesign, MalformedModel, TooFewSamples, ZeroVariance

MODEL_FORMAT_VERSION = 1
N_FEATURES = 3
KINDS = ("ridge", "tree", "forest")


@dataclass(frozen=True)
class LabeledSample:
    features: tuple[float, float, float]
    score: float
    provenance: str = ""

    def __post_init__(self):
        f = tuple(float(x) for x in self.features)
        if len(f) != N_FEATURES or any(not 0.0 <= x <= 1.0 for x in f):
            raise ValueError(f"features must be three values in [0, 1], got {f}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")
        object.__setattr__(self, "features", f)


def as_arrays(samples):
    X = np.array([s.features for s in samples], dtype=float).reshape(-1, N_FEATURES)
    y = np.array([s.score for s in samples], dtype=float)
    return X, y


# ---------------------------------------------------------------------------
# models
# ---------------------------------------------------------------------------

@dataclass
class RegressionModel:
    """Serializable regressor.

    ``params`` depends on ``kind``:

    * ridge: ``weights`` (3 floats), ``intercept``, ``lambda``
    * tree: ``nodes`` with parallel lists ``feature``, ``threshold``,
      ``left``, ``right``, ``value`` (``feature == -1`` marks a leaf)
    * forest: ``trees`` (list of node dicts), ``seeds``, plus the
      hyperparameters used to grow them
    """

    kind: str
    params: dict
    meta: dict = field(default_factory=dict)

    def predict_raw(self, x):
        x = tuple(float(v) for v in x)
        if self.kind == "ridge":
            w = self.params["weights"]
            return self.params["intercept"] + w[0] * x[0] + w[1] * x[1] + w[2] * x[2]
        if self.kind == "tree":
            return _tree_predict(self.params["nodes"], x)
        if self.kind == "forest":
            trees = self.params["trees"]
            return sum(_tree_predict(t, x) for t in trees) / len(trees)
        raise MalformedModel(f"unknown model kind {self.kind!r}")

    def tree_predictions(self, x):
        """Per-tree raw predictions of a forest."""
        if self.kind != "forest":
            raise MalformedModel("tree_predictions is only defined for forests")
        x = tuple(float(v) for v in x)
        return [_tree_predict(t, x) for t in self.params["trees"]]

    def predict_many(self, X):
        return np.array([self.predict_raw(row) for row in np.asarray(X, dtype=float)])


def predict_raw(model, features):
    return model.predict_raw(tuple(features))


def predict(model, features):
    """Predicted explicability score, clamped to ``[0, 1]``."""
    v = model.predict_raw(tuple(features))
    if math.isnan(v):
        raise MalformedModel("model produced NaN")
    return min(1.0, max(0.0, v))


def _tree_predict(nodes, x):
    feature, threshold = nodes["feature"], nodes["threshold"]
    left, right = nodes["left"], nodes["right"]
    i = 0
    while feature[i] >= 0:
        i = left[i] if x[feature[i]] <= threshold[i] else right[i]
    return nodes["value"][i]


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------

def train_ridge(samples, lam=1.0):
    """Ridge regression with an unpenalized intercept.

    Solves ``(Xc'Xc + lam I) b = Xc'yc`` on centred data.  At ``lam == 0`` a
    rank-deficient design raises :class:`DegenerateDesign` instead of being
    quietly regularized.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    X, y = as_arrays(samples)
    if len(y) < 2:
        raise TooFewSamples("ridge regression needs at least two samples")
    x_mean, y_mean = X.mean(axis=0), y.mean()
    Xc, yc = X - x_mean, y - y_mean
    A = Xc.T @ Xc + lam * np.eye(N_FEATURES)
    if lam == 0 and np.linalg.matrix_rank(Xc) < N_FEATURES:
        raise DegenerateDesign("design matrix is rank deficient; use lambda > 0")
    b = np.linalg.solve(A, Xc.T @ yc)
    intercept = float(y_mean - x_mean @ b)
    return RegressionModel("ridge", {"weights": [float(v) for v in b], "intercept": intercept,
                                     "lambda": float(lam)})


# ---------------------------------------------------------------------------
# trees
# ---------------------------------------------------------------------------

_TIE_EPS = 1e-12


def best_split(X, y, features):
    """Lowest-SSE split ``(feature, threshold, sse)`` over candidate midpoints.

    Features are scanned in the given order and thresholds ascending; a
    later candidate must beat the incumbent by more than ``1e-12`` to win.
    Returns ``None`` when no feature has two distinct values.
    """
    best = None
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs, ys = X[order, f], y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq, n = csum[-1], csq[-1], len(ys)
        for i in range(n - 1):
            if xs[i] == xs[i + 1]:
                continue
            nl, nr = i + 1, n - i - 1
            sl, sr = csum[i], total - csum[i]
            sse = (csq[i] - sl * sl / nl) + ((total_sq - csq[i]) - sr * sr / nr)
            if best is None or sse < best[2] - _TIE_EPS:
                thr = (xs[i] + xs[i + 1]) / 2.0
                if not xs[i] <= thr < xs[i + 1]:
                    thr = xs[i]  # adjacent floats: the midpoint rounds up
                best = (f, float(thr), sse)
    return best


def _grow(X, y, max_depth, min_split, feature_subset, rng):
    nodes = {"feature": [], "threshold": [], "left": [], "right": [], "value": []}

    def new_node():
        for k in nodes:
            nodes[k].append(-1 if k in ("feature", "left", "right") else 0.0)
        return len(nodes["value"]) - 1

    def build(idx, depth):
        i = new_node()
        ys = y[idx]
        nodes["value"][i] = float(ys.mean())
        if (max_depth is not None and depth >= max_depth) or len(idx) < min_split or np.ptp(ys) == 0:
            return i
        if feature_subset >= N_FEATURES:
            feats = list(range(N_FEATURES))
        else:
            feats = sorted(int(f) for f in rng.choice(N_FEATURES, size=feature_subset, replace=False))
        split = best_split(X[idx], ys, feats)
        if split is None:
            return i
        f, thr, _ = split
        mask = X[idx, f] <= thr
        nodes["feature"][i] = int(f)
        nodes["threshold"][i] = float(thr)
        left = build(idx[mask], depth + 1)
        right = build(idx[~mask], depth + 1)
        nodes["left"][i], nodes["right"][i] = left, right
        return i

    build(np.arange(len(y)), 0)
    return nodes


def train_tree(samples, max_depth=None, min_split=2):
    """CART regression tree on variance reduction; leaves predict the mean.

    Impure nodes are split even when the best split does not lower the
    squared error, so a fully grown tree interpolates distinct rows.
    """
    X, y = as_arrays(samples)
    if len(y) < 1:
        raise TooFewSamples("a tree needs at least one sample")
    nodes = _grow(X, y, max_depth, max(2, min_split), N_FEATURES, None)
    return RegressionModel("tree", {"nodes": nodes, "max_depth": max_depth, "min_split": min_split})


def train_forest(samples, n_trees=50, max_depth=None, min_split=2, feature_subset=1, seed=0,
                 bootstrap=True):
    """Random forest: bootstrap resamples and per-split random feature
    subsets.  Tree ``t`` draws from its own child seed of ``seed``, so the
    result does not depend on the order trees are built in."""
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    if not 1 <= feature_subset <= N_FEATURES:
        raise ValueError("feature_subset must be between 1 and 3")
    X, y = as_arrays(samples)
    if len(y) < 1:
        raise TooFewSamples("a forest needs at least one sample")
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees, seeds = [], []
    for child in children:
        rng = np.random.default_rng(child)
        idx = rng.integers(0, len(y), len(y)) if bootstrap else np.arange(len(y))
        trees.append(_grow(X[idx], y[idx], max_depth, max(2, min_split), feature_subset, rng))
        seeds.append(int(child.generate_state(1)[0]))
    params = {
        "trees": trees,
        "seed": seed,
        "tree_seeds": seeds,
        "n_trees": n_trees,
        "max_depth": max_depth,
        "min_split": min_split,
        "feature_subset": feature_subset,
        "bootstrap": bootstrap,
    }
    return RegressionModel("forest", params)


TRAINERS = {
    "ridge": lambda samples, p, seed: train_ridge(samples, p.get("lambda", 1.0)),
    "tree": lambda samples, p, seed: train_tree(samples, p.get("max_depth"), p.get("min_split", 2)),
    "forest": lambda samples, p, seed: train_forest(
        samples, p.get("n_trees", 50), p.get("max_depth"), p.get("min_split", 2),
        p.get("feature_subset", 1), seed, p.get("bootstrap", True)),
}


def train(kind, samples, params, seed=0):
    if kind not in TRAINERS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    return TRAINERS[kind](samples, params, seed)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def r2_score(actual, predicted):
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    a = np.asarray(actual, dtype=float)
    p = np.asarray(predicted, dtype=float)
    if a.shape != p.shape or a.size == 0:
        raise ValueError("actual and predicted must be non-empty and of equal length")
    ss_tot = float(((a - a.mean()) ** 2).sum())
    if ss_tot == 0:
        raise ZeroVariance("actual values have zero variance")
    return 1.0 - float(((a - p) ** 2).sum()) / ss_tot


def fold_indices(n, folds, seed):
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def expand_grid(grid):
    """``{"max_depth": [2, 4], "n_trees": [10]}`` -> list of dicts, in the
    order of the keys as given (last key varies fastest)."""
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


@dataclass
class GridSearchReport:
    kind: str
    grid: list
    mean_r2: list
    fold_r2: list
    winner: int
    folds: int
    seed: int

    @property
    def best_params(self):
        return self.grid[self.winner]

    @property
    def best_r2(self):
        return self.mean_r2[self.winner]

    def table(self):
        lines = [f"kind={self.kind} folds={self.folds} seed={self.seed}", "rank\tmean_r2\tparams"]
        for i, (p, r) in enumerate(zip(self.grid, self.mean_r2)):
            mark = "*" if i == self.winner else " "
            lines.append(f"{mark}{i}\t{r:.4f}\t{json.dumps(p, sort_keys=True)}")
        return "\n".join(lines) + "\n"


def cross_val_r2(kind, samples, params, folds=5, seed=0):
    """Per-fold held-out R².  Folds whose targets are constant are skipped."""
    parts = fold_indices(len(samples), folds, seed)
    scores = []
    for k, test_idx in enumerate(parts):
        test_set = set(test_idx.tolist())
        train_s = [s for i, s in enumerate(samples) if i not in test_set]
        test_s = [samples[i] for i in test_idx]
        model = train(kind, train_s, params, seed + k)
        predicted = [model.predict_raw(s.features) for s in test_s]
        try:
            scores.append(r2_score([s.score for s in test_s], predicted))
        except ZeroVariance:
            continue
    if not scores:
        raise ZeroVariance("every validation fold has constant targets")
    return scores


def grid_search(samples, kind, grid, folds=5, seed=0):
    """k-fold grid search; the winner has the highest mean held-out R²
    (first in grid order on ties)."""
    if folds < 2:
        raise ValueError("need at least two folds")
    if len(samples) < folds:
        raise TooFewSamples(f"{len(samples)} samples cannot fill {folds} folds")
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    means, per_fold = [], []
    for params in grid:
        scores = cross_val_r2(kind, samples, params, folds, seed)
        per_fold.append(scores)
        means.append(float(np.mean(scores)))
    winner = 0
    for i, m in enumerate(means):
        if m > means[winner]:
            winner = i
    return GridSearchReport(kind, grid, means, per_fold, winner, folds, seed)


def fit_best(samples, kind, grid, folds=5, seed=0):
    """Grid search, then refit the winner on all samples."""
    report = grid_search(samples, kind, grid, folds, seed)
    model = train(kind, samples, report.best_params, seed)
    model.meta = {"cv_r2": report.best_r2, "fold_r2": report.fold_r2[report.winner],
                  "folds": folds, "seed": seed, "n_samples": len(samples)}
    return model, report


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def model_to_dict(model):
    return {"format": "explicability-model", "version": MODEL_FORMAT_VERSION, "kind": model.kind,
            "params": model.params, "meta": model.meta}


def dump_model(model):
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def load_model(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedModel(f"model file is not valid JSON: {exc}") from exc
    if d.get("format") != "explicability-model" or d.get("version") != MODEL_FORMAT_VERSION:
        raise MalformedModel("not a version-1 explicability-model document")
    kind, params = d.get("kind"), d.get("params")
    if kind not in KINDS or not isinstance(params, dict):
        raise MalformedModel(f"bad model kind {kind!r}")
    try:
        if kind == "ridge":
            if len(params["weights"]) != N_FEATURES:
                raise MalformedModel("ridge needs three weights")
            float(params["intercept"])
        else:
            trees = [params["nodes"]] if kind == "tree" else params["trees"]
            if not trees:
                raise MalformedModel("forest without trees")
            for t in trees:
                _check_nodes(t)
    except (KeyError, TypeError) as exc:
        raise MalformedModel(f"missing model field: {exc}") from exc
    return RegressionModel(kind, params, d.get("meta", {}))


def _check_nodes(nodes):
    n = len(nodes["value"])
    if n == 0 or any(len(nodes[k]) != n for k in ("feature", "threshold", "left", "right")):
        raise MalformedModel("tree node arrays have inconsistent lengths")
    for i in range(n):
        f = nodes["feature"][i]
        if f >= 0:
            if f >= N_FEATURES or not (i < nodes["left"][i] < n and i < nodes["right"][i] < n):
                raise MalformedModel(f"tree node {i} has invalid children or feature")
