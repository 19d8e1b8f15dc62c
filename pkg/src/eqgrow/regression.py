"""Gradient-boosted regression of architecture features onto growth exponents.

Least-squares boosting with exact greedy regression trees: 200 stages of
depth-3 trees fit to residuals, shrinkage 0.1, no subsampling.  Splits
maximize variance reduction over every distinct threshold; ties break on the
lowest feature index, then the lowest threshold, so a fit is a deterministic
function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DOMAINS = ("arith", "bool", "list")
GENERATOR_ORDER = ("random", "compositional", "freq", "mdl_greedy")
FILTER_ORDER = ("any", "novelty")

N_STAGES = 200
MAX_DEPTH = 3
LEARNING_RATE = 0.1


def feature_names(include_domain: bool = False, include_seed: bool = False):
    names = [f"gen_{g}" for g in GENERATOR_ORDER]
    names += [f"filter_{f}" for f in FILTER_ORDER]
    names += ["depth", "batch_size"]
    if include_domain:
        names += [f"domain_{d}" for d in DOMAINS]
    if include_seed:
        names += ["seed"]
    return names


def build_features(rows, include_domain: bool = False,
                   include_seed: bool = False) -> np.ndarray:
    """Feature matrix from trajectory metadata dicts.

    One-hot generator (4) and filter (2), numeric depth and batch size,
    optional one-hot domain and numeric seed.
    """
    out = []
    for row in rows:
        vec = [1.0 if row["generator"] == g else 0.0 for g in GENERATOR_ORDER]
        vec += [1.0 if row["filter"] == f else 0.0 for f in FILTER_ORDER]
        vec += [float(row["depth"]), float(row["batch_size"])]
        if include_domain:
            vec += [1.0 if row["domain"] == d else 0.0 for d in DOMAINS]
        if include_seed:
            vec += [float(row["seed"])]
        out.append(vec)
    return np.array(out, dtype=float)


# ---------------------------------------------------------------------------
# Regression trees
# ---------------------------------------------------------------------------

@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    value: float = 0.0

    @property
    def is_leaf(self):
        return self.left is None


def _best_split(X: np.ndarray, y: np.ndarray):
    """Exact greedy split: (feature, threshold, gain) or None.

    Gain is the reduction in total squared error.  Candidate thresholds are
    midpoints between consecutive distinct feature values.
    """
    n = len(y)
    if n < 2:
        return None
    total = float(np.sum(y))
    total_sq = float(np.sum(y * y))
    parent_sse = total_sq - total * total / n
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        boundary = np.nonzero(xs[:-1] < xs[1:])[0]
        if len(boundary) == 0:
            continue
        k = boundary + 1  # left child sizes
        left_sse = csq[boundary] - csum[boundary] ** 2 / k
        rs = total - csum[boundary]
        rq = total_sq - csq[boundary]
        right_sse = rq - rs ** 2 / (n - k)
        gains = parent_sse - (left_sse + right_sse)
        i = int(np.argmax(gains))
        gain = float(gains[i])
        if gain > 1e-12 and (best is None or gain > best[2] + 1e-12):
            threshold = 0.5 * (xs[boundary[i]] + xs[boundary[i] + 1])
            best = (f, float(threshold), gain)
    return best


def _grow_tree(X: np.ndarray, residual: np.ndarray, depth: int) -> _Node:
    node = _Node(value=float(np.mean(residual)))
    if depth >= MAX_DEPTH:
        return node
    split = _best_split(X, residual)
    if split is None:
        return node
    f, threshold, _ = split
    mask = X[:, f] <= threshold
    node.feature = f
    node.threshold = threshold
    node.left = _grow_tree(X[mask], residual[mask], depth + 1)
    node.right = _grow_tree(X[~mask], residual[~mask], depth + 1)
    return node


def _tree_predict(node: _Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    idx = np.arange(len(X))
    stack = [(node, idx)]
    while stack:
        nd, rows = stack.pop()
        if nd.is_leaf:
            out[rows] = nd.value
            continue
        mask = X[rows, nd.feature] <= nd.threshold
        stack.append((nd.left, rows[mask]))
        stack.append((nd.right, rows[~mask]))
    return out


@dataclass
class GbmModel:
    initial_prediction: float
    trees: list[_Node] = field(default_factory=list)
    learning_rate: float = LEARNING_RATE
    train_mse_path: list[float] = field(default_factory=list)

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        pred = np.full(len(X), self.initial_prediction)
        for tree in self.trees:
            pred += self.learning_rate * _tree_predict(tree, X)
        return pred


def fit_gbm(X, y, n_stages: int = N_STAGES) -> GbmModel:
    """Least-squares gradient boosting; constant targets yield zero trees."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < 10:
        raise ValueError("fit_gbm needs at least 10 samples")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    model = GbmModel(initial_prediction=float(np.mean(y)))
    current = np.full(len(y), model.initial_prediction)
    for _ in range(n_stages):
        residual = y - current
        model.train_mse_path.append(float(np.mean(residual ** 2)))
        if np.max(np.abs(residual)) < 1e-12:
            break
        tree = _grow_tree(X, residual, 0)
        if tree.is_leaf and abs(tree.value) < 1e-15:
            break
        current = current + LEARNING_RATE * _tree_predict(tree, X)
        model.trees.append(tree)
    return model


# ---------------------------------------------------------------------------
# Evaluation protocols
# ---------------------------------------------------------------------------

@dataclass
class EvalReport:
    r2_mean: float
    r2_std: float
    mae_mean: float
    fold_r2: list[float] = field(default_factory=list)
    mean_pred: float | None = None
    mean_actual: float | None = None
    predictions: np.ndarray | None = None  # held-out, aligned to input order


def _r2(actual: np.ndarray, predicted: np.ndarray) -> float:
    ss_res = float(np.sum((actual - predicted) ** 2))
    ss_tot = float(np.sum((actual - np.mean(actual)) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res < 1e-12 else 0.0
    return 1.0 - ss_res / ss_tot


def kfold_cv(X, y, folds: int = 5, shuffle_seed: int = 0) -> EvalReport:
    """Shuffled K-fold CV; held-out R2 uses each fold's own mean."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) < folds:
        raise ValueError("fewer samples than folds")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(shuffle_seed)))
    order = rng.permutation(len(y))
    parts = np.array_split(order, folds)
    r2s, maes = [], []
    heldout = np.empty(len(y))
    for i in range(folds):
        test_idx = parts[i]
        train_idx = np.concatenate([parts[j] for j in range(folds) if j != i])
        model = fit_gbm(X[train_idx], y[train_idx])
        pred = model.predict(X[test_idx])
        heldout[test_idx] = pred
        r2s.append(_r2(y[test_idx], pred))
        maes.append(float(np.mean(np.abs(y[test_idx] - pred))))
    return EvalReport(r2_mean=float(np.mean(r2s)), r2_std=float(np.std(r2s)),
                      mae_mean=float(np.mean(maes)), fold_r2=r2s,
                      predictions=heldout)


def transfer_eval(X_train, y_train, X_test, y_test) -> EvalReport:
    """Fit on one population, score on another; R2 against the test mean."""
    model = fit_gbm(X_train, y_train)
    pred = model.predict(np.asarray(X_test, dtype=float))
    y_test = np.asarray(y_test, dtype=float)
    r2 = _r2(y_test, pred)
    mae = float(np.mean(np.abs(y_test - pred)))
    return EvalReport(r2_mean=r2, r2_std=0.0, mae_mean=mae,
                      mean_pred=float(np.mean(pred)),
                      mean_actual=float(np.mean(y_test)),
                      predictions=pred)


def pooled_eval(rows, y, folds: int = 5, shuffle_seed: int = 0,
                include_domain: bool = True) -> EvalReport:
    """K-fold CV over the pooled dataset with the domain one-hot appended."""
    X = build_features(rows, include_domain=include_domain)
    return kfold_cv(X, np.asarray(y, dtype=float), folds=folds,
                    shuffle_seed=shuffle_seed)
