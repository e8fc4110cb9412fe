"""Prediction-sink classifiers: a deterministic random forest and a
majority baseline behind one fit/predict contract.

The forest is CART with Gini splits: per-tree bootstrap resamples
seeded as ``seed + tree_index``, a uniform sample of candidate features
at every node (zero-variance features excluded), and thresholds at
midpoints between consecutive sorted unique values. Leaves store label
counts; probabilities are the across-tree mean of each leaf's
normalized count distribution, so output is soft, not a hard vote.
Given the same data and seed, fitting is bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientData, NoLabels
from .events import Prediction


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 50
    max_depth: int | None = None
    min_samples_split: int = 2
    features_per_split: int | str = "sqrt"  # "sqrt", "all", or an int in [1, d]
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if isinstance(self.features_per_split, str):
            if self.features_per_split not in ("sqrt", "all"):
                raise ValueError("features_per_split must be 'sqrt', 'all', or an int")
        elif self.features_per_split < 1:
            raise ValueError("features_per_split must be >= 1")

    def resolve_features(self, dim: int) -> int:
        if self.features_per_split == "sqrt":
            return max(1, int(math.floor(math.sqrt(dim))))
        if self.features_per_split == "all":
            return dim
        return min(int(self.features_per_split), dim)


@dataclass(frozen=True)
class TrainingMatrix:
    """Materialized supervision: feature vectors paired with stage ids."""

    x: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.x.ndim != 2 or len(self.x) != len(self.y):
            raise DimensionMismatch("x must be (n, d) with one label per row")

    @property
    def dim(self) -> int:
        return self.x.shape[1]


@dataclass
class Forest:
    trees: list[dict]
    dim: int
    n_classes: int
    params: ForestParams

    def predict_probs(self, vector) -> np.ndarray:
        v = np.asarray(vector, dtype=float)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"expected dim {self.dim}, got shape {v.shape}")
        acc = np.zeros(self.n_classes)
        for tree in self.trees:
            node = tree
            while "counts" not in node:
                node = node["left"] if v[node["feature"]] < node["threshold"] else node["right"]
            counts = np.asarray(node["counts"], dtype=float)
            acc += counts / counts.sum()
        return acc / len(self.trees)

    def to_state(self) -> dict:
        return {
            "trees": self.trees,
            "dim": self.dim,
            "n_classes": self.n_classes,
            "n_trees": self.params.n_trees,
        }

    @classmethod
    def from_state(cls, state: dict, params: ForestParams | None = None) -> "Forest":
        return cls(
            trees=state["trees"],
            dim=state["dim"],
            n_classes=state["n_classes"],
            params=params or ForestParams(n_trees=state["n_trees"]),
        )


def forest_fit(data: TrainingMatrix, params: ForestParams = ForestParams()) -> Forest:
    """Train n_trees CART trees; deterministic given params.seed."""
    n = len(data.y)
    if n == 0:
        raise NoLabels("no labeled samples to fit on")
    if len(np.unique(data.y)) < 2:
        raise InsufficientData("classifier fitting needs at least 2 distinct labels")
    trees = []
    for i in range(params.n_trees):
        rng = np.random.default_rng(params.seed + i)
        if params.bootstrap:
            rows = rng.integers(0, n, size=n)
        else:
            rows = np.arange(n)
        trees.append(_build_tree(data.x, data.y, rows, data.n_classes, params, rng))
    return Forest(trees=trees, dim=data.dim, n_classes=data.n_classes, params=params)


def _leaf(y: np.ndarray, rows: np.ndarray, n_classes: int) -> dict:
    counts = np.bincount(y[rows], minlength=n_classes)
    return {"counts": [int(c) for c in counts]}


def _build_tree(
    x: np.ndarray,
    y: np.ndarray,
    root_rows: np.ndarray,
    n_classes: int,
    params: ForestParams,
    rng: np.random.Generator,
) -> dict:
    # Iterative depth-first build, left child first, so the rng stream
    # depends only on the (row-order-independent) tree structure.
    m = params.resolve_features(x.shape[1])
    root: dict = {}
    stack: list[tuple[np.ndarray, int, dict]] = [(root_rows, 0, root)]
    while stack:
        rows, depth, node = stack.pop()
        labels = y[rows]
        if (
            len(rows) < params.min_samples_split
            or (params.max_depth is not None and depth >= params.max_depth)
            or (labels == labels[0]).all()
        ):
            node.update(_leaf(y, rows, n_classes))
            continue
        split = _best_split(x, y, rows, m, rng)
        if split is None:
            node.update(_leaf(y, rows, n_classes))
            continue
        feature, threshold = split
        mask = x[rows, feature] < threshold
        left_rows, right_rows = rows[mask], rows[~mask]
        node["feature"] = int(feature)
        node["threshold"] = float(threshold)
        node["left"] = {}
        node["right"] = {}
        stack.append((right_rows, depth + 1, node["right"]))
        stack.append((left_rows, depth + 1, node["left"]))
    return root


def _best_split(
    x: np.ndarray, y: np.ndarray, rows: np.ndarray, m: int, rng: np.random.Generator
) -> tuple[int, float] | None:
    xs = x[rows]
    ys = y[rows]
    n = len(rows)
    variable = np.flatnonzero(xs.min(axis=0) < xs.max(axis=0))
    if len(variable) == 0:
        return None
    if len(variable) > m:
        chosen = np.sort(rng.choice(variable, size=m, replace=False))
    else:
        chosen = variable
    n_classes = int(ys.max()) + 1
    total = np.bincount(ys, minlength=n_classes).astype(float)
    parent_gini = 1.0 - ((total / n) ** 2).sum()
    best = (parent_gini - 1e-12, -1, 0.0)
    for f in chosen:
        col = xs[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sl = ys[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), sl] = 1.0
        cum = onehot.cumsum(axis=0)
        boundary = np.flatnonzero(sv[:-1] < sv[1:])
        if len(boundary) == 0:
            continue
        mids = (sv[boundary] + sv[boundary + 1]) / 2.0
        # guard against float collapse onto a neighbor value
        ok = (sv[boundary] < mids) & (mids < sv[boundary + 1])
        boundary, mids = boundary[ok], mids[ok]
        if len(boundary) == 0:
            continue
        left = cum[boundary]
        nl = left.sum(axis=1)
        right = total[None, :] - left
        nr = n - nl
        gl = 1.0 - ((left / nl[:, None]) ** 2).sum(axis=1)
        gr = 1.0 - ((right / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nl * gl + nr * gr) / n
        j = int(weighted.argmin())
        if weighted[j] < best[0]:
            best = (float(weighted[j]), int(f), float(mids[j]))
    if best[1] < 0:
        return None
    return best[1], best[2]


def forest_predict(forest: Forest, vector, ts: int = 0, sink: str = "") -> Prediction:
    """Soft-vote prediction; stage is the lowest-index argmax."""
    return Prediction.from_probs(ts, forest.predict_probs(vector), sink=sink)


# ---------------------------------------------------------------------------
# majority baseline


@dataclass
class Baseline:
    """Unconditional empirical label distribution; the evaluation floor."""

    probs: tuple[float, ...]

    def to_state(self) -> dict:
        return {"probs": list(self.probs)}

    @classmethod
    def from_state(cls, state: dict) -> "Baseline":
        return cls(probs=tuple(state["probs"]))


def baseline_fit(labels, n_classes: int) -> Baseline:
    labels = np.asarray(labels, dtype=int)
    if len(labels) == 0:
        raise NoLabels("no labeled samples to fit on")
    counts = np.bincount(labels, minlength=n_classes).astype(float)
    return Baseline(probs=tuple(counts / counts.sum()))


def baseline_predict(model: Baseline, ts: int = 0, sink: str = "") -> Prediction:
    return Prediction.from_probs(ts, model.probs, sink=sink)
