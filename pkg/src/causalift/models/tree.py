"""Histogram-based regression trees shared by the forest and boosting models.

Features are quantile-binned once per fit; split search then works on bin
statistics, keeping tree growth fast at desk scale without changing which
splits are found on well-separated data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_MAX_BINS = 32

# A split must reduce the node's squared error by more than this to happen.
_MIN_GAIN = 1e-12


def bin_columns(X: np.ndarray, max_bins: int = DEFAULT_MAX_BINS):
    """Quantile-bin every column; returns (codes, edges per column).

    ``codes[i, j]`` counts the edges at or below ``X[i, j]``, so the split
    rule "code <= b" on training rows equals "value < edges[b]" on raw data.
    """
    n, m = X.shape
    codes = np.empty((n, m), dtype=np.int16)
    edges: list[np.ndarray] = []
    qs = np.linspace(0.0, 1.0, max_bins + 1)[1:-1]
    for j in range(m):
        col = X[:, j]
        e = np.unique(np.quantile(col, qs))
        e = e[(e > col.min()) & (e <= col.max())]
        codes[:, j] = np.searchsorted(e, col, side="right")
        edges.append(e)
    return codes, edges


@dataclass
class TreeParams:
    max_depth: int = 5
    min_samples_leaf: int = 5
    feature_fraction: float = 1.0
    max_bins: int = DEFAULT_MAX_BINS


class RegressionTree:
    """Flat-array binary tree: feature < 0 marks a leaf."""

    __slots__ = ("feature", "threshold", "bin_index", "left", "right", "value", "gain")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.bin_index: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.gain: list[float] = []

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.bin_index.append(-1)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        self.gain.append(0.0)
        return len(self.feature) - 1

    def predict(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        node_of = np.zeros(X.shape[0], dtype=np.int64)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        value = np.asarray(self.value)
        pending = np.arange(X.shape[0])
        while pending.size:
            nodes = node_of[pending]
            feats = feature[nodes]
            leaf = feats < 0
            done = pending[leaf]
            out[done] = value[nodes[leaf]]
            rows = pending[~leaf]
            if rows.size == 0:
                break
            nodes = nodes[~leaf]
            go_left = X[rows, feature[nodes]] < threshold[nodes]
            node_of[rows] = np.where(go_left, left[nodes], right[nodes])
            pending = rows
        return out

    def apply_binned(self, codes: np.ndarray) -> np.ndarray:
        """Predict from the training-side bin codes (used during boosting)."""
        out = np.empty(codes.shape[0])
        node_of = np.zeros(codes.shape[0], dtype=np.int64)
        feature = np.asarray(self.feature)
        bin_index = np.asarray(self.bin_index)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        value = np.asarray(self.value)
        pending = np.arange(codes.shape[0])
        while pending.size:
            nodes = node_of[pending]
            feats = feature[nodes]
            leaf = feats < 0
            out[pending[leaf]] = value[nodes[leaf]]
            rows = pending[~leaf]
            if rows.size == 0:
                break
            nodes = nodes[~leaf]
            go_left = codes[rows, feature[nodes]] <= bin_index[nodes]
            node_of[rows] = np.where(go_left, left[nodes], right[nodes])
            pending = rows
        return out


def _best_split(codes, y, rows, feats, min_leaf, max_bins):
    """Best (feature, bin, gain) over the candidate features, or None."""
    sub = codes[np.ix_(rows, feats)]
    k = feats.shape[0]
    offsets = np.arange(k, dtype=np.int64) * (max_bins + 1)
    flat = (sub + offsets[np.newaxis, :]).ravel()
    length = k * (max_bins + 1)
    counts = np.bincount(flat, minlength=length).reshape(k, -1)
    sums = np.bincount(
        flat, weights=np.repeat(y[rows], k), minlength=length
    ).reshape(k, -1)
    left_cnt = counts.cumsum(axis=1)[:, :-1]
    left_sum = sums.cumsum(axis=1)[:, :-1]
    total_cnt = rows.shape[0]
    total_sum = float(y[rows].sum())
    right_cnt = total_cnt - left_cnt
    right_sum = total_sum - left_sum
    ok = (left_cnt >= min_leaf) & (right_cnt >= min_leaf)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(
            ok,
            left_sum**2 / left_cnt + right_sum**2 / right_cnt,
            -np.inf,
        )
    flat_best = int(np.argmax(score))
    fi, b = divmod(flat_best, score.shape[1])
    gain = float(score[fi, b]) - total_sum**2 / total_cnt
    if not np.isfinite(gain) or gain <= _MIN_GAIN:
        return None
    return int(feats[fi]), int(b), gain


def grow_tree(
    codes: np.ndarray,
    edges: list[np.ndarray],
    y: np.ndarray,
    rows: np.ndarray,
    params: TreeParams,
    rng: np.random.Generator | None = None,
) -> RegressionTree:
    """Greedy depth-first growth on pre-binned features.

    ``rng`` drives the per-split feature subsample when feature_fraction < 1;
    growth order is fixed, so a seeded generator makes the tree deterministic.
    """
    n_features = codes.shape[1]
    n_sub = max(1, int(round(params.feature_fraction * n_features)))
    all_feats = np.arange(n_features)
    tree = RegressionTree()
    root = tree._new_node()
    stack = [(root, rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        yr_sum = float(y[node_rows].sum())
        tree.value[node] = yr_sum / node_rows.shape[0]
        if depth >= params.max_depth or node_rows.shape[0] < 2 * params.min_samples_leaf:
            continue
        if n_sub < n_features and rng is not None:
            feats = np.sort(rng.choice(n_features, size=n_sub, replace=False))
        else:
            feats = all_feats
        found = _best_split(
            codes, y, node_rows, feats, params.min_samples_leaf, params.max_bins
        )
        if found is None:
            continue
        fj, b, gain = found
        mask = codes[node_rows, fj] <= b
        left_id = tree._new_node()
        right_id = tree._new_node()
        tree.feature[node] = fj
        tree.bin_index[node] = b
        tree.threshold[node] = float(edges[fj][b])
        tree.left[node] = left_id
        tree.right[node] = right_id
        tree.gain[node] = gain
        stack.append((right_id, node_rows[~mask], depth + 1))
        stack.append((left_id, node_rows[mask], depth + 1))
    return tree


def tree_importances(tree: RegressionTree, n_features: int) -> np.ndarray:
    """Raw impurity-decrease totals per feature (not normalized)."""
    out = np.zeros(n_features)
    for f, g in zip(tree.feature, tree.gain):
        if f >= 0:
            out[f] += g
    return out


def tree_to_dict(tree: RegressionTree) -> dict:
    return {
        "feature": list(tree.feature),
        "threshold": [float(t) for t in tree.threshold],
        "bin_index": list(tree.bin_index),
        "left": list(tree.left),
        "right": list(tree.right),
        "value": [float(v) for v in tree.value],
        "gain": [float(g) for g in tree.gain],
    }


def tree_from_dict(d: dict) -> RegressionTree:
    tree = RegressionTree()
    tree.feature = [int(v) for v in d["feature"]]
    tree.threshold = [float(v) for v in d["threshold"]]
    tree.bin_index = [int(v) for v in d["bin_index"]]
    tree.left = [int(v) for v in d["left"]]
    tree.right = [int(v) for v in d["right"]]
    tree.value = [float(v) for v in d["value"]]
    tree.gain = [float(v) for v in d["gain"]]
    return tree
