"""Bagged forests and stagewise gradient-boosted trees on binned features."""

from __future__ import annotations

import numpy as np

from causalift.models.base import (
    ModelSpec,
    Schema,
    TrainedModel,
    check_matrix,
    check_vector,
    register_codec,
)
from causalift.models.tree import (
    DEFAULT_MAX_BINS,
    RegressionTree,
    TreeParams,
    bin_columns,
    grow_tree,
    tree_from_dict,
    tree_importances,
    tree_to_dict,
)


class ForestModel(TrainedModel):
    def __init__(self, spec, schema, summary, trees, importances):
        self.spec = spec
        self.input_schema = schema
        self.training_summary = summary
        self.trees: list[RegressionTree] = trees
        self.importances = np.asarray(importances, dtype=np.float64)

    @property
    def n_inputs(self) -> int:
        return self.importances.shape[0]

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict(X)
        return out / len(self.trees)


def fit_forest(
    X,
    y,
    n_trees: int = 16,
    max_depth: int = 5,
    feature_fraction: float = 1.0,
    min_samples_leaf: int = 5,
    max_bins: int = DEFAULT_MAX_BINS,
    schema: Schema = None,
    seed: int = 0,
) -> ForestModel:
    """Bootstrap-bagged variance-reduction trees; prediction is the tree mean.

    Importances are total impurity decrease summed over all trees and
    normalized to 1 (all-zero when no split ever fires).
    """
    X = check_matrix(X)
    y = check_vector(y, X.shape[0])
    n, m = X.shape
    codes, edges = bin_columns(X, max_bins)
    params = TreeParams(
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        feature_fraction=feature_fraction,
        max_bins=max_bins,
    )
    trees = []
    raw_imp = np.zeros(m)
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
        rows = rng.integers(0, n, size=n)
        tree = grow_tree(codes, edges, y, rows, params, rng)
        trees.append(tree)
        raw_imp += tree_importances(tree, m)
    total = raw_imp.sum()
    importances = raw_imp / total if total > 0 else raw_imp
    spec = ModelSpec(
        "forest",
        {
            "n_trees": n_trees,
            "max_depth": max_depth,
            "feature_fraction": feature_fraction,
            "min_samples_leaf": min_samples_leaf,
            "max_bins": max_bins,
        },
        seed=seed,
    )
    model = ForestModel(spec, schema, {"n_trees": n_trees}, trees, importances)
    model.training_summary["train_mae"] = float(np.abs(model.predict(X) - y).mean())
    return model


class GbtModel(TrainedModel):
    def __init__(self, spec, schema, summary, base, learning_rate, trees, n_inputs):
        self.spec = spec
        self.input_schema = schema
        self.training_summary = summary
        self.base = float(base)
        self.learning_rate = float(learning_rate)
        self.trees: list[RegressionTree] = trees
        self._n_inputs = int(n_inputs)

    @property
    def n_inputs(self) -> int:
        return self._n_inputs

    def _predict(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out


def fit_gbt(
    X,
    y,
    n_trees: int = 60,
    max_depth: int = 2,
    learning_rate: float = 0.1,
    min_samples_leaf: int = 20,
    subsample: float = 1.0,
    max_bins: int = DEFAULT_MAX_BINS,
    schema: Schema = None,
    seed: int = 0,
) -> GbtModel:
    """Stagewise squared-loss boosting from the target mean.

    Each stage fits a shallow tree to the current residuals (optionally on a
    row subsample) and moves predictions by learning_rate times its output.
    The per-stage training loss is recorded; with subsample = 1 and
    learning_rate <= 1 it is non-increasing by construction.
    """
    X = check_matrix(X)
    y = check_vector(y, X.shape[0])
    n, m = X.shape
    codes, edges = bin_columns(X, max_bins)
    params = TreeParams(
        max_depth=max_depth,
        min_samples_leaf=min_samples_leaf,
        feature_fraction=1.0,
        max_bins=max_bins,
    )
    base = float(y.mean())
    pred = np.full(n, base)
    trees = []
    losses = []
    all_rows = np.arange(n)
    for t in range(n_trees):
        rng = np.random.default_rng(np.random.SeedSequence((seed, t)))
        if subsample < 1.0:
            k = max(2 * min_samples_leaf, int(round(subsample * n)))
            rows = np.sort(rng.choice(n, size=min(k, n), replace=False))
        else:
            rows = all_rows
        resid = y - pred
        tree = grow_tree(codes, edges, resid, rows, params, rng)
        pred += learning_rate * tree.apply_binned(codes)
        trees.append(tree)
        losses.append(float(np.mean((y - pred) ** 2)))
    spec = ModelSpec(
        "gbt",
        {
            "n_trees": n_trees,
            "max_depth": max_depth,
            "learning_rate": learning_rate,
            "min_samples_leaf": min_samples_leaf,
            "subsample": subsample,
            "max_bins": max_bins,
        },
        seed=seed,
    )
    summary = {"loss": losses, "train_mae": float(np.abs(pred - y).mean())}
    return GbtModel(spec, schema, summary, base, learning_rate, trees, m)


def _encode_forest(model: ForestModel) -> dict:
    return {
        "trees": [tree_to_dict(t) for t in model.trees],
        "importances": [float(v) for v in model.importances],
    }


def _decode_forest(spec, schema, summary, params) -> ForestModel:
    trees = [tree_from_dict(d) for d in params["trees"]]
    return ForestModel(spec, schema, summary, trees, params["importances"])


def _encode_gbt(model: GbtModel) -> dict:
    return {
        "base": model.base,
        "learning_rate": model.learning_rate,
        "n_inputs": model.n_inputs,
        "trees": [tree_to_dict(t) for t in model.trees],
    }


def _decode_gbt(spec, schema, summary, params) -> GbtModel:
    trees = [tree_from_dict(d) for d in params["trees"]]
    return GbtModel(
        spec,
        schema,
        summary,
        params["base"],
        params["learning_rate"],
        trees,
        params["n_inputs"],
    )


register_codec(ForestModel, "forest", _encode_forest, _decode_forest)
register_codec(GbtModel, "gbt", _encode_gbt, _decode_gbt)
