"""Random Forest regression: bootstrap-aggregated CART trees.

Trees are stored as flat arrays (``feature``, ``threshold``, ``left``,
``right``, ``value``) so that batch prediction is a vectorised walk. A leaf
has ``feature == -1``. Samples with ``x[feature] <= threshold`` go left.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .config_space import Configuration
from .dataset import OfflineDataset

FLOPS_FEATURES = ("f", "k", "l_s", "m")
ACCURACY_FEATURES = ("f", "k", "l_s", "m", "snr_db")
TARGETS = {"flops": FLOPS_FEATURES, "accuracy": ACCURACY_FEATURES}
MODEL_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 2
    # None means ceil(sqrt(n_features))
    max_features: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")

    def features_per_node(self, n_features: int) -> int:
        if self.max_features is None:
            return math.ceil(math.sqrt(n_features))
        return min(self.max_features, n_features)


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.feature), dtype=np.int64)
        for node in range(len(self.feature)):
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            internal = feat >= 0
            if not internal.any():
                return self.value[node]
            idx = rows[internal]
            n = node[internal]
            go_left = X[idx, feat[internal]] <= self.threshold[n]
            node[internal] = np.where(go_left, self.left[n], self.right[n])

    def to_dict(self) -> dict[str, list]:
        return {"feature": self.feature.tolist(), "threshold": self.threshold.tolist(),
                "left": self.left.tolist(), "right": self.right.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(np.asarray(d["feature"], dtype=np.int64),
                   np.asarray(d["threshold"], dtype=np.float64),
                   np.asarray(d["left"], dtype=np.int64),
                   np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=np.float64))


def _best_split(X: np.ndarray, y: np.ndarray, features: Sequence[int],
                min_leaf: int) -> tuple[int, float, float] | None:
    """Greedy variance-reduction split over ``features``.

    Returns ``(feature, threshold, gain)`` or None. Features are scanned in
    ascending index order and thresholds ascending; only a strictly larger
    gain replaces the incumbent, so ties go to the lower feature, then the
    lower threshold.
    """
    n = len(y)
    parent_sse = float(((y - y.mean()) ** 2).sum())
    best: tuple[int, float, float] | None = None
    for j in sorted(features):
        order = np.argsort(X[:, j], kind="stable")
        xs, ys = X[order, j], y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total, total_sq = csum[-1], csq[-1]
        # candidate cut after position i (left = [0..i]), i = min_leaf-1 .. n-min_leaf-1
        i = np.arange(min_leaf - 1, n - min_leaf)
        if len(i) == 0:
            continue
        i = i[xs[i] < xs[i + 1]]
        if len(i) == 0:
            continue
        n_left = i + 1.0
        n_right = n - n_left
        sse_left = csq[i] - csum[i] ** 2 / n_left
        sse_right = (total_sq - csq[i]) - (total - csum[i]) ** 2 / n_right
        gain = parent_sse - (sse_left + sse_right)
        pos = int(np.argmax(gain))
        g = float(gain[pos])
        if g > 0.0 and (best is None or g > best[2]):
            cut = i[pos]
            best = (j, float((xs[cut] + xs[cut + 1]) / 2.0), g)
    return best


def grow_tree(X: np.ndarray, y: np.ndarray, params: ForestParams,
              rng: np.random.Generator) -> Tree:
    n_features = X.shape[1]
    per_node = params.features_per_node(n_features)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node(mean: float) -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(mean)
        return len(value) - 1

    # iterative growth: (node id, sample indices, depth)
    root = new_node(float(y.mean()))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        if (depth >= params.max_depth or len(idx) < 2 * params.min_samples_leaf
                or np.all(ys == ys[0])):
            continue
        chosen = rng.choice(n_features, size=per_node, replace=False)
        split = _best_split(X[idx], ys, chosen.tolist(), params.min_samples_leaf)
        if split is None:
            continue
        j, thr, _ = split
        mask = X[idx, j] <= thr
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node] = j, thr
        left[node] = new_node(float(y[li].mean()))
        right[node] = new_node(float(y[ri].mean()))
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(np.asarray(feature, dtype=np.int64), np.asarray(threshold, dtype=np.float64),
                np.asarray(left, dtype=np.int64), np.asarray(right, dtype=np.int64),
                np.asarray(value, dtype=np.float64))


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    params: ForestParams
    target: str
    features: tuple[str, ...]

    @property
    def n_features(self) -> int:
        return len(self.features)

    def predict(self, X) -> np.ndarray:
        """Mean of per-tree predictions for each row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ValueError(f"{self.target} model expects {self.n_features} features "
                             f"{self.features}, got {X.shape[1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("feature vectors must be finite")
        total = np.zeros(len(X))
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def predict_one(self, c: Configuration, snr_db: float | None = None) -> float:
        return float(self.predict(feature_vector(c, snr_db, self.target))[0])

    def to_dict(self) -> dict:
        return {"schema_version": MODEL_SCHEMA_VERSION,
                "kind": "random_forest_regressor",
                "target": self.target,
                "features": list(self.features),
                "params": asdict(self.params),
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        if d.get("schema_version") != MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema_version {d.get('schema_version')!r}")
        target = d["target"]
        if target not in TARGETS or tuple(d["features"]) != TARGETS[target]:
            raise ValueError(f"feature layout {d['features']} does not match target {target!r}")
        return cls(tuple(Tree.from_dict(t) for t in d["trees"]),
                   ForestParams(**d["params"]), target, tuple(d["features"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ForestModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def feature_vector(c: Configuration, snr_db: float | None, target: str) -> np.ndarray:
    if target == "flops":
        return np.array([c.f, c.k, c.l_s, c.m], dtype=np.float64)
    if snr_db is None:
        raise ValueError("the accuracy model needs snr_db as its fifth feature")
    return np.array([c.f, c.k, c.l_s, c.m, snr_db], dtype=np.float64)


def design_matrix(d: OfflineDataset, target: str) -> tuple[np.ndarray, np.ndarray]:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {sorted(TARGETS)}")
    rows = [(*r.config.as_tuple(), r.snr_db) for r in d.records]
    X = np.asarray(rows, dtype=np.float64).reshape(len(rows), 5)
    if target == "flops":
        X = X[:, :4]
        y = np.asarray([r.flops for r in d.records], dtype=np.float64)
    else:
        y = np.asarray([r.accuracy for r in d.records], dtype=np.float64)
    return X, y


def fit_arrays(X: np.ndarray, y: np.ndarray, target: str,
               params: ForestParams = ForestParams()) -> ForestModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(y) == 0:
        raise ValueError("cannot fit a forest on an empty dataset")
    if not np.all(np.isfinite(y)):
        raise ValueError("targets must be finite")
    if X.shape != (len(y), len(TARGETS[target])):
        raise ValueError(f"expected X of shape ({len(y)}, {len(TARGETS[target])}), got {X.shape}")
    n = len(y)
    trees = []
    for t in range(params.n_trees):
        # per-tree stream depends only on (seed, tree index)
        rng = np.random.default_rng([params.seed, t])
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[boot], y[boot], params, rng))
    return ForestModel(tuple(trees), params, target, TARGETS[target])


def fit(train: OfflineDataset, target: str,
        params: ForestParams = ForestParams()) -> ForestModel:
    X, y = design_matrix(train, target)
    return fit_arrays(X, y, target, params)


def r2_score(model: ForestModel, test: OfflineDataset) -> float:
    """Coefficient of determination of ``model`` on ``test``.

    With a constant test target, returns 1.0 when every residual is zero and
    raises otherwise (R² is undefined there).
    """
    if len(test) == 0:
        raise ValueError("cannot score on an empty dataset")
    X, y = design_matrix(test, model.target)
    pred = model.predict(X)
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        if ss_res == 0.0:
            return 1.0
        raise ValueError("R² undefined: constant test target with non-zero residuals")
    return 1.0 - ss_res / ss_tot
