"""Gradient-boosted regression trees on a class-weighted logistic loss.

First-order boosting: each round fits a depth-limited tree to the negative
gradient by variance reduction and uses the leaf mean as the leaf value
(a Newton step with unit hessian). Models serialise to plain JSON arrays.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .features import FEATURE_COLS, InstanceDataset, VariableFeatureRow

EPS = 1e-12


@dataclass(frozen=True)
class ClassWeights:
    w0: float = 1.0
    w1: float = 1.0

    def __post_init__(self):
        if self.w0 <= 0 or self.w1 <= 0:
            raise ValueError("class weights must be positive")


UNWEIGHTED = ClassWeights(1.0, 1.0)
PRESETS = {
    "none": UNWEIGHTED,
    "W1": ClassWeights(0.25, 0.75),
    "W2": ClassWeights(0.10, 0.90),
    "W3": ClassWeights(0.05, 0.95),
}


@dataclass(frozen=True)
class GbmConfig:
    n_trees: int = 100
    max_depth: int = 6
    learning_rate: float = 0.1
    min_leaf: int = 20
    seed: int = 0
    subsample: float = 1.0

    def __post_init__(self):
        if min(self.n_trees, self.max_depth, self.min_leaf) <= 0 or self.learning_rate <= 0:
            raise ValueError("boosting hyperparameters must be positive")
        if not 0 < self.subsample <= 1:
            raise ValueError("subsample must lie in (0, 1]")


def sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(s, dtype=float)))


def weighted_bce(pred, label, w: ClassWeights = UNWEIGHTED):
    p = np.clip(pred, EPS, 1.0 - EPS)
    y = np.asarray(label, dtype=float)
    out = -w.w1 * y * np.log(p) - w.w0 * (1.0 - y) * np.log(1.0 - p)
    return float(out) if np.ndim(out) == 0 else out


def loss_gradient(raw_score, label, w: ClassWeights = UNWEIGHTED):
    """d/ds of weighted_bce(sigmoid(s), label)."""
    s = sigmoid(raw_score)
    y = np.asarray(label, dtype=float)
    g = w.w1 * y * (s - 1.0) + w.w0 * (1.0 - y) * s
    return float(g) if np.ndim(g) == 0 else g


@dataclass
class Tree:
    feature: list[int]
    threshold: list[float]
    left: list[int]
    right: list[int]
    value: list[float]

    def predict(self, X: np.ndarray) -> np.ndarray:
        feat = np.asarray(self.feature)
        thr = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        val = np.asarray(self.value)
        node = np.zeros(len(X), dtype=int)
        active = feat[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            n = node[idx]
            go_left = X[idx, feat[n]] <= thr[n]
            node[idx] = np.where(go_left, left[n], right[n])
            active = feat[node] >= 0
        return val[node]


def _best_split(X: np.ndarray, target: np.ndarray, min_leaf: int):
    """Split maximising variance reduction; returns (gain, feature, threshold) or None."""
    n = len(target)
    if n < 2 * min_leaf:
        return None
    total = target.sum()
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ts = target[order]
        csum = np.cumsum(ts)[:-1]
        nl = np.arange(1, n)
        nr = n - nl
        valid = (xs[1:] > xs[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not valid.any():
            continue
        # SSE reduction = sl^2/nl + sr^2/nr - total^2/n
        score = csum ** 2 / nl + (total - csum) ** 2 / nr
        score = np.where(valid, score, -np.inf)
        k = int(np.argmax(score))
        gain = score[k] - total ** 2 / n
        if best is None or gain > best[0] + 1e-15:
            best = (float(gain), f, float(0.5 * (xs[k] + xs[k + 1])))
    if best is None or best[0] <= 1e-15:
        return None
    return best


def fit_tree(X: np.ndarray, target: np.ndarray, max_depth: int, min_leaf: int) -> Tree:
    tree = Tree([], [], [], [], [])

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(tree.feature)
        tree.feature.append(-1)
        tree.threshold.append(0.0)
        tree.left.append(-1)
        tree.right.append(-1)
        tree.value.append(float(target[idx].mean()))
        if depth >= max_depth:
            return node
        split = _best_split(X[idx], target[idx], min_leaf)
        if split is None:
            return node
        _, f, thr = split
        mask = X[idx, f] <= thr
        tree.feature[node] = f
        tree.threshold[node] = thr
        tree.left[node] = grow(idx[mask], depth + 1)
        tree.right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(target)), 0)
    return tree


@dataclass
class TrainedModel:
    base_score: float
    learning_rate: float
    trees: list[Tree] = field(default_factory=list)
    weights: ClassWeights = UNWEIGHTED
    # Instance id -> number of rows used; the left-out instance never appears here.
    trained_on: dict[str, int] = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def raw_score(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = np.full(len(X), self.base_score)
        for t in self.trees:
            s += self.learning_rate * t.predict(X)
        return s

    def predict_proba(self, X) -> np.ndarray:
        return np.clip(sigmoid(self.raw_score(X)), EPS, 1.0 - EPS)

    def to_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "weights": asdict(self.weights),
            "trained_on": self.trained_on,
            "loss_history": self.loss_history,
            "features": FEATURE_COLS,
            "trees": [asdict(t) for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d) -> "TrainedModel":
        return cls(d["base_score"], d["learning_rate"], [Tree(**t) for t in d["trees"]],
                   ClassWeights(**d["weights"]), dict(d["trained_on"]), list(d.get("loss_history", [])))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "TrainedModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def fit(X: np.ndarray, y: np.ndarray, w: ClassWeights = UNWEIGHTED, cfg: GbmConfig = GbmConfig()) -> TrainedModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("no training rows")
    n1 = y.sum()
    prior = w.w1 * n1 / (w.w1 * n1 + w.w0 * (len(y) - n1))
    prior = min(max(prior, EPS), 1.0 - EPS)
    model = TrainedModel(math.log(prior / (1.0 - prior)), cfg.learning_rate, weights=w)
    rng = np.random.default_rng(cfg.seed)
    score = np.full(len(y), model.base_score)
    model.loss_history.append(float(np.mean(weighted_bce(sigmoid(score), y, w))))
    for _ in range(cfg.n_trees):
        residual = -loss_gradient(score, y, w)
        if cfg.subsample < 1.0:
            rows = np.flatnonzero(rng.random(len(y)) < cfg.subsample)
        else:
            rows = np.arange(len(y))
        tree = fit_tree(X[rows], residual[rows], cfg.max_depth, cfg.min_leaf)
        model.trees.append(tree)
        score = score + cfg.learning_rate * tree.predict(X)
        model.loss_history.append(float(np.mean(weighted_bce(sigmoid(score), y, w))))
    return model


def train(corpus: Sequence[InstanceDataset], exclude: Optional[str], w: ClassWeights = UNWEIGHTED,
          cfg: GbmConfig = GbmConfig()) -> TrainedModel:
    """Fit on every labelled instance of ``corpus`` except ``exclude``."""
    used = [ds for ds in corpus if ds.instance != exclude and ds.rows]
    if not used:
        raise ValueError("training corpus is empty after excluding the test instance")
    X = np.vstack([ds.matrix() for ds in used])
    y = np.concatenate([ds.labels() for ds in used])
    model = fit(X, y, w, cfg)
    model.trained_on = {}
    for ds in used:
        model.trained_on[ds.instance] = model.trained_on.get(ds.instance, 0) + len(ds.rows)
    return model


def predict(model: TrainedModel, row: VariableFeatureRow | np.ndarray) -> tuple[float, int]:
    vec = row.vector if isinstance(row, VariableFeatureRow) else np.asarray(row, dtype=float)
    prob = float(model.predict_proba(vec[None, :])[0])
    return prob, int(prob >= 0.5)


def predict_dataset(model: TrainedModel, dataset: InstanceDataset) -> np.ndarray:
    """Hard labels for every row, aligned with the instance's binary variables."""
    if not dataset.rows:
        return np.zeros(0, dtype=int)
    return (model.predict_proba(dataset.matrix()) >= 0.5).astype(int)


@dataclass
class EvalReport:
    balanced_accuracy: float
    fnr: float
    fpr: float
    tp: int
    fn: int
    fp: int
    tn: int
    single_class: bool = False


def evaluate(preds, labels) -> EvalReport:
    p = np.asarray(preds, dtype=int)
    y = np.asarray(labels, dtype=int)
    if p.shape != y.shape:
        raise ValueError("predictions and labels differ in length")
    if y.size == 0:
        raise ValueError("nothing to evaluate")
    tp = int(np.sum((p == 1) & (y == 1)))
    fn = int(np.sum((p == 0) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    tn = int(np.sum((p == 0) & (y == 0)))
    fnr = fn / (fn + tp) if fn + tp else 0.0
    fpr = fp / (fp + tn) if fp + tn else 0.0
    if fn + tp and fp + tn:
        return EvalReport(((1 - fnr) + (1 - fpr)) / 2, fnr, fpr, tp, fn, fp, tn)
    # one class only: report that class's recall alone
    acc = 1 - fnr if fn + tp else 1 - fpr
    return EvalReport(acc, fnr, fpr, tp, fn, fp, tn, single_class=True)


def train_leave_one_out(corpus: Sequence[InstanceDataset], w: ClassWeights = UNWEIGHTED,
                        cfg: GbmConfig = GbmConfig()) -> dict[str, TrainedModel]:
    return {ds.instance: train(corpus, ds.instance, w, cfg) for ds in corpus}
