"""Random-search hyperparameter tuning with contiguous time-block CV folds.

Folds never shuffle rows: temporal adjacency leaks lag information, so each
validation block is a contiguous slice. Draw RNGs derive from (seed, draw
index), making parallel and serial schedules agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from causalift.dataset import LaggedDesign
from causalift.models.base import (
    ColumnScaler,
    ModelError,
    ModelSpec,
    ScaledModel,
    Schema,
    TrainedModel,
)
from causalift.models.ensemble import fit_forest, fit_gbt
from causalift.models.linear import fit_lasso, fit_ols
from causalift.models.mlp import fit_mlp

# Documented default search ranges. "log" draws are uniform in log space;
# "int" draws are inclusive; "choice" picks one element.
DEFAULT_RANGES: dict[str, dict[str, tuple]] = {
    "ols": {},
    "lasso": {"alpha": ("log", 1e-3, 1.0)},
    "forest": {
        "n_trees": ("int", 8, 24),
        "max_depth": ("int", 3, 6),
        "feature_fraction": ("uniform", 0.5, 1.0),
    },
    "gbt": {
        "n_trees": ("int", 40, 80),
        "max_depth": ("int", 2, 3),
        "learning_rate": ("log", 0.03, 0.3),
        "min_samples_leaf": ("int", 5, 50),
        "subsample": ("uniform", 0.6, 1.0),
    },
    "mlp": {
        "hidden": ("choice", (16,), (32,)),
        "learning_rate": ("log", 1e-3, 1e-2),
        "epochs": ("int", 10, 24),
        "batch_size": ("choice", 256, 512),
        "l2": ("log", 1e-6, 1e-3),
    },
}


def draw_hyperparams(family: str, rng: np.random.Generator, ranges=None) -> dict:
    spec_ranges = DEFAULT_RANGES[family] if ranges is None else ranges
    out = {}
    for name, rule in spec_ranges.items():
        kind = rule[0]
        if kind == "int":
            out[name] = int(rng.integers(rule[1], rule[2] + 1))
        elif kind == "uniform":
            out[name] = float(rng.uniform(rule[1], rule[2]))
        elif kind == "log":
            out[name] = float(np.exp(rng.uniform(np.log(rule[1]), np.log(rule[2]))))
        elif kind == "choice":
            out[name] = rule[1:][int(rng.integers(0, len(rule) - 1))]
        else:
            raise ModelError(f"unknown range rule {kind!r} for {name!r}")
    return out


def fit_family(
    family: str,
    X: np.ndarray,
    y: np.ndarray,
    hyperparams: dict | None = None,
    seed: int = 0,
    schema: Schema = None,
) -> TrainedModel:
    """Fit one family, handling the standardization contract internally.

    lasso and mlp require standardized inputs; the scaler is fit on the given
    X only (the caller passes training rows), so tuning folds never leak.
    """
    hp = dict(hyperparams or {})
    if family == "ols":
        return fit_ols(X, y, schema=schema, seed=seed)
    if family == "lasso":
        scaler = ColumnScaler.fit(X)
        y_mean = float(np.asarray(y).mean())
        inner = fit_lasso(
            scaler.transform(X),
            np.asarray(y, dtype=np.float64) - y_mean,
            alpha=hp.pop("alpha", 0.1),
            schema=schema,
            seed=seed,
            **hp,
        )
        return ScaledModel(inner, scaler, y_mean)
    if family == "forest":
        return fit_forest(X, y, schema=schema, seed=seed, **hp)
    if family == "gbt":
        return fit_gbt(X, y, schema=schema, seed=seed, **hp)
    if family == "mlp":
        scaler = ColumnScaler.fit(X)
        hidden = tuple(hp.pop("hidden", (32,)))
        inner = fit_mlp(
            scaler.transform(X), y, hidden=hidden, schema=schema, seed=seed, **hp
        )
        return ScaledModel(inner, scaler, 0.0)
    raise ModelError(f"unknown model family {family!r}")


def contiguous_folds(n_rows: int, k_folds: int) -> list[np.ndarray]:
    """Split row indices into k contiguous blocks, earliest first."""
    if k_folds < 2:
        raise ModelError(f"k_folds must be >= 2, got {k_folds}")
    if n_rows < k_folds:
        raise ModelError(f"cannot make {k_folds} folds from {n_rows} rows")
    edges = np.linspace(0, n_rows, k_folds + 1).astype(int)
    return [np.arange(edges[i], edges[i + 1]) for i in range(k_folds)]


@dataclass(frozen=True)
class CvCell:
    draw: int
    hyperparams: dict
    fold_maes: tuple[float, ...]
    mean_mae: float
    error: str | None = None


@dataclass(frozen=True)
class SearchResult:
    best_spec: ModelSpec
    cv_table: tuple[CvCell, ...]
    model: TrainedModel


def random_search_cv(
    family: str,
    design: LaggedDesign,
    budget: int = 20,
    k_folds: int = 3,
    seed: int = 0,
    ranges: dict | None = None,
) -> SearchResult:
    """Tune by random draws, score by mean validation MAE, refit on all rows.

    Ties break toward the earliest draw. A draw whose every fold diverges is
    recorded with its error and skipped; if all draws fail, the cv table rides
    along on the exception.
    """
    if budget < 1:
        raise ModelError(f"budget must be >= 1, got {budget}")
    if design.role == "test":
        raise ModelError("tuning on a test-tagged design is forbidden")
    X, y = design.X, design.y
    if X.shape[0] < 3 * k_folds:
        raise ModelError(
            f"need at least 3*k_folds = {3 * k_folds} rows, got {X.shape[0]}"
        )
    folds = contiguous_folds(X.shape[0], k_folds)
    all_rows = np.arange(X.shape[0])
    table: list[CvCell] = []
    for draw in range(budget):
        rng = np.random.default_rng(np.random.SeedSequence((seed, draw)))
        hp = draw_hyperparams(family, rng, ranges)
        maes = []
        error = None
        for fold in folds:
            train_rows = np.setdiff1d(all_rows, fold, assume_unique=True)
            try:
                model = fit_family(
                    family, X[train_rows], y[train_rows], hp, seed=seed
                )
            except ModelError as exc:
                error = str(exc)
                break
            pred = model.predict(X[fold])
            maes.append(float(np.abs(pred - y[fold]).mean()))
        if error is not None:
            table.append(CvCell(draw, hp, tuple(maes), float("inf"), error))
        else:
            table.append(CvCell(draw, hp, tuple(maes), float(np.mean(maes))))
    best = min(table, key=lambda c: (c.mean_mae, c.draw))
    if not np.isfinite(best.mean_mae):
        raise ModelError(
            "every tuning draw failed: "
            + "; ".join(f"draw {c.draw}: {c.error}" for c in table)
        )
    final = fit_family(
        family, X, y, best.hyperparams, seed=seed, schema=design.columns
    )
    best_spec = ModelSpec(family, best.hyperparams, seed=seed)
    return SearchResult(best_spec=best_spec, cv_table=tuple(table), model=final)
