"""Linear models: ordinary least squares and L1-penalized coordinate descent."""

from __future__ import annotations

import numpy as np

from causalift.models.base import (
    ModelError,
    ModelSpec,
    Schema,
    TrainedModel,
    _arr,
    check_matrix,
    check_vector,
    register_codec,
)


class LinearModel(TrainedModel):
    def __init__(self, spec, schema, summary, coef, intercept):
        self.spec = spec
        self.input_schema = schema
        self.training_summary = summary
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    @property
    def n_inputs(self) -> int:
        return self.coef.shape[0]

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef + self.intercept


def fit_ols(X, y, schema: Schema = None, seed: int = 0) -> LinearModel:
    """Least squares with intercept via SVD; minimum-norm when rank-deficient.

    With fewer rows than columns + 1 the problem is underdetermined; the
    minimum-norm solution is returned and noted in the training summary.
    """
    X = check_matrix(X)
    y = check_vector(y, X.shape[0])
    n, m = X.shape
    A = np.column_stack([np.ones(n), X])
    beta, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    summary: dict = {"rank": int(rank), "n_rows": n}
    if n < m + 1:
        summary["note"] = "minimum-norm solution (rows < columns + 1)"
    model = LinearModel(
        ModelSpec("ols", seed=seed), schema, summary, beta[1:], beta[0]
    )
    summary["train_mae"] = float(np.abs(model.predict(X) - y).mean())
    return model


def _lasso_objective(X, y, beta, alpha: float) -> float:
    r = y - X @ beta
    n = X.shape[0]
    return float(r @ r) / (2.0 * n) + alpha * float(np.abs(beta).sum())


def lasso_duality_gap(X, y, beta, alpha: float) -> float:
    """Gap between the primal objective and the scaled dual feasible value."""
    n = X.shape[0]
    r = y - X @ beta
    primal = float(r @ r) / (2.0 * n) + alpha * float(np.abs(beta).sum())
    corr = float(np.abs(X.T @ r).max()) / n if X.shape[1] else 0.0
    theta = r / max(corr / alpha, 1.0)
    dual = float(theta @ y) / n - float(theta @ theta) / (2.0 * n)
    return primal - dual


def fit_lasso(
    X,
    y,
    alpha: float,
    max_sweeps: int = 10000,
    tol: float = 1e-7,
    schema: Schema = None,
    seed: int = 0,
) -> LinearModel:
    """Cyclic coordinate descent on (1/2n)||y - Xb||^2 + alpha*||b||_1.

    The caller standardizes X and centers y; no intercept is fit. Converged
    when the largest coefficient change in a sweep drops below ``tol``.
    """
    X = check_matrix(X)
    y = check_vector(y, X.shape[0])
    if alpha < 0.0:
        raise ModelError(f"alpha must be >= 0, got {alpha}")
    n, m = X.shape
    col_sq = np.einsum("ij,ij->j", X, X) / n
    beta = np.zeros(m)
    resid = y.copy()
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(m):
            if col_sq[j] == 0.0:
                continue
            old = beta[j]
            rho = float(X[:, j] @ resid) / n + col_sq[j] * old
            new = soft_threshold(rho, alpha) / col_sq[j]
            if new != old:
                resid += X[:, j] * (old - new)
                beta[j] = new
                max_delta = max(max_delta, abs(new - old))
        if max_delta < tol:
            break
    else:
        gap = lasso_duality_gap(X, y, beta, alpha) if alpha > 0 else float("nan")
        raise ModelError(
            f"lasso did not converge in {max_sweeps} sweeps "
            f"(final duality gap {gap:.3e})"
        )
    summary = {
        "sweeps": sweeps,
        "n_nonzero": int(np.count_nonzero(beta)),
        "objective": _lasso_objective(X, y, beta, alpha),
    }
    spec = ModelSpec(
        "lasso",
        {"alpha": alpha, "max_sweeps": max_sweeps, "tol": tol},
        seed=seed,
    )
    return LinearModel(spec, schema, summary, beta, 0.0)


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def _encode_linear(model: LinearModel) -> dict:
    return {"coef": _arr(model.coef), "intercept": model.intercept}


def _decode_linear(spec, schema, summary, params) -> LinearModel:
    return LinearModel(spec, schema, summary, params["coef"], params["intercept"])


register_codec(LinearModel, "linear", _encode_linear, _decode_linear)
