"""Bagged decision trees with out-of-bag permutation importance.

The adaptation loops only need three things from a model: ``fit``,
``predict`` and a per-column ``importance``. :class:`Classifier` fixes that
surface; :class:`TreeEnsemble` is the implementation used by default.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


@dataclass(frozen=True)
class EnsembleParams:
    n_trees: int = 100
    min_leaf: int = 1
    max_depth: int | None = None
    features_per_split: int | None = None

    def resolved_features(self, n_features):
        if self.features_per_split is not None:
            return max(1, min(int(self.features_per_split), n_features))
        return max(1, int(np.floor(np.sqrt(n_features))))


class Classifier(abc.ABC):
    """Minimal model contract used by the adaptation loops."""

    classes: tuple

    @abc.abstractmethod
    def fit(self, X, y, rng):
        """Train on rows ``X`` with labels ``y``; return ``self``."""

    @abc.abstractmethod
    def predict(self, X):
        """Predicted label per row of ``X``."""

    @abc.abstractmethod
    def importance(self, X, y, rng):
        """One importance score per column of ``X`` (the training matrix)."""


class DecisionTree:
    """Axis-aligned CART tree with Gini impurity.

    Nodes live in flat arrays; ``feature[i] == -1`` marks a leaf whose class
    index is ``value[i]``. A row goes left when ``x[feature] <= threshold``.
    """

    def __init__(self, min_leaf=1, max_depth=None, features_per_split=1):
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.features_per_split = features_per_split

    def fit(self, X, y, n_classes, rng):
        onehot = np.eye(n_classes)
        feature, threshold, left, right, value = [], [], [], [], []

        def new_node():
            for arr, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (value, 0)):
                arr.append(v)
            return len(feature) - 1

        root = new_node()
        stack = [(root, np.arange(X.shape[0]), 0)]
        while stack:
            node, rows, depth = stack.pop()
            yn = y[rows]
            counts = np.bincount(yn, minlength=n_classes)
            value[node] = int(np.argmax(counts))
            if (counts > 0).sum() < 2 or rows.size < 2 * self.min_leaf:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            split = self._best_split(X[rows], onehot[yn], rng)
            if split is None:
                continue
            f, thr = split
            go_left = X[rows, f] <= thr
            feature[node], threshold[node] = f, thr
            li, ri = new_node(), new_node()
            left[node], right[node] = li, ri
            stack.append((ri, rows[~go_left], depth + 1))
            stack.append((li, rows[go_left], depth + 1))

        self.feature = np.array(feature, dtype=np.intp)
        self.threshold = np.array(threshold)
        self.left = np.array(left, dtype=np.intp)
        self.right = np.array(right, dtype=np.intp)
        self.value = np.array(value, dtype=np.intp)
        return self

    def _best_split(self, Xn, Yn, rng):
        n = Xn.shape[0]
        varying = np.flatnonzero(Xn.max(axis=0) > Xn.min(axis=0))
        if varying.size == 0:
            return None
        # constant columns are skipped without counting against the budget
        k = min(self.features_per_split, varying.size)
        feats = varying[rng.permutation(varying.size)[:k]]

        Xs = Xn[:, feats]
        order = np.argsort(Xs, axis=0, kind="stable")
        sv = np.take_along_axis(Xs, order, axis=0)
        left = np.cumsum(Yn[order], axis=0)[:-1]          # (n-1, k, C)
        right = Yn.sum(axis=0) - left
        nl = np.arange(1, n, dtype=float)[:, None]
        nr = n - nl
        gini_l = 1.0 - ((left / nl[..., None]) ** 2).sum(axis=-1)
        gini_r = 1.0 - ((right / nr[..., None]) ** 2).sum(axis=-1)
        cost = nl * gini_l + nr * gini_r
        valid = (sv[1:] > sv[:-1]) & (nl >= self.min_leaf) & (nr >= self.min_leaf)
        if not valid.any():
            return None
        cost = np.where(valid, cost, np.inf)
        pos, j = np.unravel_index(np.argmin(cost), cost.shape)
        lo, hi = sv[pos, j], sv[pos + 1, j]
        thr = 0.5 * (lo + hi)
        if not lo <= thr < hi:
            thr = lo
        return int(feats[j]), float(thr)

    def apply(self, X):
        """Leaf class index for each row of ``X``."""
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            idx = rows[inner]
            nd = node[inner]
            go_left = X[idx, f[inner]] <= self.threshold[nd]
            node[inner] = np.where(go_left, self.left[nd], self.right[nd])

    def used_features(self):
        return np.unique(self.feature[self.feature >= 0])


class TreeEnsemble(Classifier):
    """Bootstrap-aggregated decision trees.

    Each tree is fit on ``n`` rows drawn with replacement from the ``n``
    training rows and owns a random substream spawned from the generator
    passed to :meth:`fit`. The rows a tree never saw are kept in
    ``oob_masks`` for out-of-bag importance.
    """

    def __init__(self, params=None):
        self.params = params or EnsembleParams()

    def fit(self, X, y, rng):
        X = np.asarray(X, dtype=float)
        y = list(y)
        if X.ndim != 2 or X.shape[0] != len(y):
            raise ValueError("X must be 2-d with one row per label")
        if X.shape[0] < 2:
            raise ValueError("need at least two training rows")
        self.classes = tuple(sorted(set(y)))
        if len(self.classes) < 2:
            raise ValueError("training data holds a single class; nothing to classify")
        y_idx = np.array([self.classes.index(v) for v in y], dtype=np.intp)
        n = self.n_train = X.shape[0]
        self.n_features = X.shape[1]
        k = self.params.resolved_features(self.n_features)
        self.trees, self.oob_masks = [], []
        for sub in rng.spawn(self.params.n_trees):
            boot = sub.integers(0, n, size=n)
            tree = DecisionTree(self.params.min_leaf, self.params.max_depth, k)
            tree.fit(X[boot], y_idx[boot], len(self.classes), sub)
            self.trees.append(tree)
            seen = np.zeros(n, dtype=bool)
            seen[boot] = True
            self.oob_masks.append(np.flatnonzero(~seen))
        return self

    def _check_width(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1 and X.size == 0:
            X = X.reshape(0, self.n_features)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected rows of width {self.n_features}, got shape {X.shape}")
        return X

    def vote_counts(self, X):
        X = self._check_width(X)
        counts = np.zeros((X.shape[0], len(self.classes)), dtype=np.intp)
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            counts[rows, tree.apply(X)] += 1
        return counts

    def predict(self, X):
        """Plurality vote; ties go to the class listed first in ``classes``."""
        counts = self.vote_counts(X)
        return [self.classes[i] for i in np.argmax(counts, axis=1)]

    def oob_fraction(self):
        """Mean fraction of training rows left out of a tree's bootstrap."""
        return float(np.mean([m.size / self.n_train for m in self.oob_masks]))

    def importance(self, X, y, rng):
        """Out-of-bag permutation importance per column.

        For every tree with a non-empty out-of-bag set, the score of column
        ``f`` is the tree's OOB accuracy minus its accuracy after shuffling
        ``f`` among those rows; scores are averaged over trees. Columns a
        tree never splits on cannot change its predictions and score exactly
        0 for that tree, so no shuffle is drawn for them.
        """
        X = self._check_width(X)
        y_idx = np.array([self.classes.index(v) for v in y], dtype=np.intp)
        total = np.zeros(self.n_features)
        n_used = 0
        for tree, oob, sub in zip(self.trees, self.oob_masks, rng.spawn(len(self.trees))):
            if oob.size == 0:
                continue
            n_used += 1
            Xo, yo = X[oob], y_idx[oob]
            base = np.mean(tree.apply(Xo) == yo)
            for f in tree.used_features():
                Xp = Xo.copy()
                Xp[:, f] = Xo[sub.permutation(oob.size), f]
                total[f] += base - np.mean(tree.apply(Xp) == yo)
        return total / n_used if n_used else total


def train_ensemble(fm, params=None, rng=None):
    """Fit a :class:`TreeEnsemble` on a feature matrix."""
    rng = rng if rng is not None else np.random.default_rng(0)
    return TreeEnsemble(params).fit(fm.values, fm.subject_labels, rng)


def predict(model, rows):
    return model.predict(rows)


def oob_permutation_importance(model, fm, rng):
    return model.importance(fm.values, fm.subject_labels, rng)


def average_class_accuracy(predicted, truth):
    """Mean per-class recall over the classes present in ``truth``."""
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise ValueError("predicted and truth differ in length")
    if not truth:
        raise ValueError("cannot score an empty prediction")
    # exact rationals so that equal accuracies compare equal
    classes = sorted(set(truth), key=str)
    total = Fraction(0)
    for c in classes:
        idx = [i for i, t in enumerate(truth) if t == c]
        total += Fraction(int(sum(bool(predicted[i] == c) for i in idx)), len(idx))
    return float(total / len(classes))
