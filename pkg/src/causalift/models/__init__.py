"""Regression models and tuning: OLS, lasso, forest, GBT, MLP, random search."""

from causalift.models.base import (
    FAMILIES,
    ColumnScaler,
    ModelError,
    ModelSpec,
    ScaledModel,
    TrainedModel,
    model_from_json,
    model_to_json,
)
from causalift.models.ensemble import ForestModel, GbtModel, fit_forest, fit_gbt
from causalift.models.linear import (
    LinearModel,
    fit_lasso,
    fit_ols,
    lasso_duality_gap,
    soft_threshold,
)
from causalift.models.mlp import MlpModel, fit_mlp, forward, init_params, loss_and_grad
from causalift.models.search import (
    DEFAULT_RANGES,
    CvCell,
    SearchResult,
    contiguous_folds,
    draw_hyperparams,
    fit_family,
    random_search_cv,
)

__all__ = [
    "FAMILIES",
    "ColumnScaler",
    "ModelError",
    "ModelSpec",
    "ScaledModel",
    "TrainedModel",
    "model_from_json",
    "model_to_json",
    "ForestModel",
    "GbtModel",
    "fit_forest",
    "fit_gbt",
    "LinearModel",
    "fit_lasso",
    "fit_ols",
    "lasso_duality_gap",
    "soft_threshold",
    "MlpModel",
    "fit_mlp",
    "forward",
    "init_params",
    "loss_and_grad",
    "DEFAULT_RANGES",
    "CvCell",
    "SearchResult",
    "contiguous_folds",
    "draw_hyperparams",
    "fit_family",
    "random_search_cv",
]
