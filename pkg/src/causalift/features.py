"""Predictor-set construction: graph-derived sets and the classic baselines.

Seven methods produce a FeatureSet for one target: two read the causal graph
(exact lagged parents, or every lag of every parent variable), one takes the
full lag expansion, and four are data-driven baselines (recursive elimination
under least squares, principal components to a variance target, forest
importances, L1 support). Data-driven selectors only accept training designs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from causalift.dataset import LaggedDesign, full_lag_columns
from causalift.graph import TimeSeriesGraph
from causalift.jsonutil import expect
from causalift.models.ensemble import fit_forest
from causalift.models.linear import fit_lasso

__all__ = [
    "FeatureError",
    "METHODS",
    "PcaLoadings",
    "FeatureSet",
    "causal_lags",
    "causal_all",
    "all_features",
    "rfe",
    "pca_select",
    "tree_select",
    "lasso_select",
    "featureset_to_json",
    "featureset_from_json",
]

METHODS = ("causal-lags", "causal-all", "all", "rfe", "pca", "tree", "lasso")

EMPTY_FLAG = "empty-selection"


class FeatureError(ValueError):
    """Raised for invalid selector inputs or malformed FeatureSet JSON."""


@dataclass(frozen=True)
class PcaLoadings:
    """Principal-component definitions over a fixed set of lagged columns.

    ``transform`` maps a raw design matrix (columns in ``columns`` order) to
    component scores: standardize with the stored mean/scale, then project
    onto the loading vectors.
    """

    columns: tuple[tuple[str, int], ...]
    mean: tuple[float, ...]
    scale: tuple[float, ...]
    vectors: tuple[tuple[float, ...], ...]
    explained: tuple[float, ...]

    def __post_init__(self) -> None:
        p = len(self.columns)
        if len(self.mean) != p or len(self.scale) != p:
            raise FeatureError(
                f"loadings mean/scale must have one entry per column ({p})"
            )
        if len(self.vectors) != len(self.explained):
            raise FeatureError("one explained-variance ratio per loading vector")
        for i, vec in enumerate(self.vectors):
            if len(vec) != p:
                raise FeatureError(
                    f"loading vector {i} has {len(vec)} entries, expected {p}"
                )

    @property
    def n_components(self) -> int:
        return len(self.vectors)

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != len(self.columns):
            raise FeatureError(
                f"loadings expect {len(self.columns)} input columns, "
                f"got {X.shape[1] if X.ndim == 2 else 'non-matrix input'}"
            )
        Z = (X - np.asarray(self.mean)) / np.asarray(self.scale)
        return Z @ np.asarray(self.vectors).T


@dataclass(frozen=True)
class FeatureSet:
    """One method's chosen predictors for one target.

    ``columns`` holds (variable, lag) pairs for every method except "pca",
    which carries ``loadings`` instead (downstream models consume component
    scores, not raw columns). An empty selection is legal but must be flagged.
    """

    method: str
    target: str
    columns: tuple[tuple[str, int], ...] = ()
    loadings: PcaLoadings | None = None
    params: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    audit: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise FeatureError(
                f"unknown method {self.method!r}; expected one of {list(METHODS)}"
            )
        columns = tuple((str(v), int(l)) for v, l in self.columns)
        if self.method == "pca":
            if self.loadings is None:
                raise FeatureError("pca feature set needs loadings")
            if columns:
                raise FeatureError("pca feature set carries loadings, not columns")
        elif self.loadings is not None:
            raise FeatureError(f"method {self.method!r} does not carry loadings")
        for v, lag in columns:
            if lag < 1:
                raise FeatureError(f"column ({v!r}, {lag}): lag must be >= 1")
        if len(set(columns)) != len(columns):
            raise FeatureError("duplicate columns in feature set")
        if not columns and self.loadings is None and EMPTY_FLAG not in self.flags:
            raise FeatureError(f"empty feature set must carry the {EMPTY_FLAG!r} flag")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "flags", tuple(self.flags))
        object.__setattr__(self, "audit", tuple(self.audit))

    @property
    def n_features(self) -> int:
        if self.loadings is not None:
            return self.loadings.n_components
        return len(self.columns)


def _flag_if_empty(columns) -> tuple[str, ...]:
    return (EMPTY_FLAG,) if not columns else ()


def causal_lags(graph: TimeSeriesGraph, target: str) -> FeatureSet:
    """Exactly the (source, lag) pairs of links into the target."""
    columns = tuple((l.source, l.lag) for l in graph.links_into(target))
    return FeatureSet(
        method="causal-lags",
        target=target,
        columns=columns,
        params={"tau_max": graph.tau_max},
        flags=_flag_if_empty(columns),
    )


def causal_all(graph: TimeSeriesGraph, target: str) -> FeatureSet:
    """Every lag 1..tau_max of every variable with a link into the target."""
    parents = {l.source for l in graph.links_into(target)}
    ordered = [v for v in graph.variables if v in parents]
    columns = tuple((v, lag) for v in ordered for lag in range(1, graph.tau_max + 1))
    return FeatureSet(
        method="causal-all",
        target=target,
        columns=columns,
        params={"tau_max": graph.tau_max},
        flags=_flag_if_empty(columns),
    )


def all_features(variables, tau_max: int, target: str) -> FeatureSet:
    """The full lag expansion: every variable (target included), every lag."""
    variables = tuple(str(v) for v in variables)
    if target not in variables:
        raise FeatureError(f"unknown target {target!r}; have {list(variables)}")
    if tau_max < 1:
        raise FeatureError(f"tau_max must be >= 1, got {tau_max}")
    return FeatureSet(
        method="all",
        target=target,
        columns=full_lag_columns(variables, tau_max),
        params={"tau_max": tau_max},
    )


def _require_train(design: LaggedDesign, op: str) -> None:
    # Leakage guard: selectors must never see held-out rows.
    if design.role == "test":
        raise FeatureError(f"{op} on a test-tagged design is forbidden")


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Center/scale columns; zero-variance columns get scale 1 (become zeros)."""
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    degenerate = scale == 0.0
    scale = np.where(degenerate, 1.0, scale)
    return (X - mean) / scale, mean, scale, degenerate


def rfe(design: LaggedDesign, n_keep: int | None = None, ridge: float = 1e-6) -> FeatureSet:
    """Drop the smallest-|coefficient| column one at a time until n_keep remain.

    Columns are standardized and the target centered before each least-squares
    fit. Zero-variance columns are dropped up front with an audit note. When
    rows <= surviving columns the normal equations are ridge-stabilized; the
    fallback is audited.
    """
    _require_train(design, "feature selection")
    p = design.n_columns
    if n_keep is None:
        n_keep = p // 2
    if not 0 <= n_keep <= p:
        raise FeatureError(f"n_keep must be in 0..{p}, got {n_keep}")
    Z, _, _, degenerate = _standardize(design.X)
    y = design.y - design.y.mean()
    audit: list[str] = []
    alive = [j for j in range(p) if not degenerate[j]]
    for j in np.flatnonzero(degenerate):
        audit.append(f"dropped degenerate column {design.columns[j]}: zero variance")
    used_ridge = False
    while len(alive) > n_keep:
        Za = Z[:, alive]
        if design.n_rows > len(alive):
            beta, *_ = np.linalg.lstsq(Za, y, rcond=None)
        else:
            used_ridge = True
            G = Za.T @ Za
            G[np.diag_indices_from(G)] += ridge * design.n_rows
            beta = np.linalg.solve(G, Za.T @ y)
        alive.pop(int(np.argmin(np.abs(beta))))
    if used_ridge:
        audit.append(f"ridge-stabilized fits (rows <= columns), penalty {ridge}")
    columns = tuple(design.columns[j] for j in alive)
    return FeatureSet(
        method="rfe",
        target=design.target,
        columns=columns,
        params={"n_keep": n_keep},
        flags=_flag_if_empty(columns),
        audit=tuple(audit),
    )


def pca_select(design: LaggedDesign, variance_target: float = 0.85) -> FeatureSet:
    """Principal components of the standardized design up to a variance target.

    Keeps the smallest k whose cumulative explained variance reaches the
    target and stores the k loading vectors; consumers project new rows with
    ``loadings.transform``. Each vector's sign is fixed so its largest-
    magnitude entry is positive.
    """
    _require_train(design, "feature selection")
    if not 0.0 < variance_target <= 1.0:
        raise FeatureError(f"variance_target must be in (0, 1], got {variance_target}")
    Z, mean, scale, _ = _standardize(design.X)
    _, svals, Vt = np.linalg.svd(Z, full_matrices=False)
    var = svals**2
    total = var.sum()
    if total == 0.0:
        # All columns constant: one all-zero component, flagged via audit.
        ratios = np.zeros(1)
        Vt = np.zeros((1, design.n_columns))
        k = 1
        audit = ("design has no variance; single zero component",)
    else:
        ratios = var / total
        k = int(np.searchsorted(np.cumsum(ratios), variance_target) + 1)
        k = min(k, len(ratios))
        audit = ()
    vectors = []
    for i in range(k):
        vec = Vt[i]
        pivot = int(np.argmax(np.abs(vec)))
        if vec[pivot] < 0:
            vec = -vec
        vectors.append(tuple(float(x) for x in vec))
    loadings = PcaLoadings(
        columns=design.columns,
        mean=tuple(float(m) for m in mean),
        scale=tuple(float(s) for s in scale),
        vectors=tuple(vectors),
        explained=tuple(float(r) for r in ratios[:k]),
    )
    return FeatureSet(
        method="pca",
        target=design.target,
        loadings=loadings,
        params={"variance_target": variance_target, "k": k},
        audit=audit,
    )


def tree_select(design: LaggedDesign, rule: str = "mean", seed: int = 0) -> FeatureSet:
    """Keep columns by forest importance: above the mean ("mean") or > 0 ("zero").

    "mean" is the default; with importances normalized to sum 1 the mean is
    1/p, so dense random data keeps roughly half the columns instead of nearly
    all of them (the "zero" rule's failure mode).
    """
    _require_train(design, "feature selection")
    if rule not in ("mean", "zero"):
        raise FeatureError(f"unknown threshold rule {rule!r}; expected 'mean' or 'zero'")
    model = fit_forest(design.X, design.y, schema=design.columns, seed=seed)
    importances = model.importances
    threshold = float(importances.mean()) if rule == "mean" else 0.0
    keep = np.flatnonzero(importances > threshold)
    columns = tuple(design.columns[j] for j in keep)
    return FeatureSet(
        method="tree",
        target=design.target,
        columns=columns,
        params={"rule": rule, "seed": seed},
        flags=_flag_if_empty(columns),
    )


def lasso_select(design: LaggedDesign, alpha: float = 0.1) -> FeatureSet:
    """Keep columns with nonzero L1-penalized coefficients (|b| > 1e-10).

    Columns are standardized and the target centered before the coordinate-
    descent fit; non-convergence propagates with the final duality gap.
    """
    _require_train(design, "feature selection")
    if alpha <= 0:
        raise FeatureError(f"alpha must be > 0, got {alpha}")
    Z, _, _, _ = _standardize(design.X)
    y = design.y - design.y.mean()
    model = fit_lasso(Z, y, alpha, schema=design.columns)
    keep = np.flatnonzero(np.abs(model.coef) > 1e-10)
    columns = tuple(design.columns[j] for j in keep)
    return FeatureSet(
        method="lasso",
        target=design.target,
        columns=columns,
        params={"alpha": alpha},
        flags=_flag_if_empty(columns),
    )


def featureset_to_json(fs: FeatureSet) -> str:
    payload: dict = {
        "method": fs.method,
        "target": fs.target,
        "params": fs.params,
        "flags": list(fs.flags),
        "audit": list(fs.audit),
    }
    if fs.loadings is not None:
        payload["loadings"] = {
            "columns": [list(c) for c in fs.loadings.columns],
            "mean": list(fs.loadings.mean),
            "scale": list(fs.loadings.scale),
            "vectors": [list(v) for v in fs.loadings.vectors],
            "explained": list(fs.loadings.explained),
        }
    else:
        payload["columns"] = [list(c) for c in fs.columns]
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _expect(payload: dict, key: str, kinds, path: str, default=None, required=True):
    if required:
        return expect(payload, key, kinds, path, error_cls=FeatureError)
    return expect(payload, key, kinds, path, error_cls=FeatureError, default=default)


def _parse_columns(raw: list, path: str) -> tuple[tuple[str, int], ...]:
    columns = []
    for i, item in enumerate(raw):
        if not (isinstance(item, list) and len(item) == 2):
            raise FeatureError(f"{path}[{i}]: expected [variable, lag] pair")
        name, lag = item
        if not isinstance(name, str):
            raise FeatureError(f"{path}[{i}]: variable must be str, got {type(name).__name__}")
        if not isinstance(lag, int) or isinstance(lag, bool):
            raise FeatureError(f"{path}[{i}]: lag must be int, got {type(lag).__name__}")
        columns.append((name, lag))
    return tuple(columns)


def _parse_floats(raw: list, path: str) -> tuple[float, ...]:
    out = []
    for i, x in enumerate(raw):
        if not isinstance(x, (int, float)) or isinstance(x, bool):
            raise FeatureError(f"{path}[{i}]: expected number, got {type(x).__name__}")
        out.append(float(x))
    return tuple(out)


def featureset_from_json(text: str) -> FeatureSet:
    """Parse and validate a serialized FeatureSet; errors carry field paths."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FeatureError(f"invalid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise FeatureError(f"featureset: expected object, got {type(payload).__name__}")
    method = _expect(payload, "method", str, "featureset")
    target = _expect(payload, "target", str, "featureset")
    params = _expect(payload, "params", dict, "featureset", default={}, required=False)
    flags = _expect(payload, "flags", list, "featureset", default=[], required=False)
    audit = _expect(payload, "audit", list, "featureset", default=[], required=False)
    loadings = None
    columns: tuple[tuple[str, int], ...] = ()
    if "loadings" in payload:
        raw = _expect(payload, "loadings", dict, "featureset")
        path = "featureset.loadings"
        raw_vectors = _expect(raw, "vectors", list, path)
        vectors = []
        for i, vec in enumerate(raw_vectors):
            if not isinstance(vec, list):
                raise FeatureError(f"{path}.vectors[{i}]: expected list")
            vectors.append(_parse_floats(vec, f"{path}.vectors[{i}]"))
        try:
            loadings = PcaLoadings(
                columns=_parse_columns(_expect(raw, "columns", list, path), f"{path}.columns"),
                mean=_parse_floats(_expect(raw, "mean", list, path), f"{path}.mean"),
                scale=_parse_floats(_expect(raw, "scale", list, path), f"{path}.scale"),
                vectors=tuple(vectors),
                explained=_parse_floats(_expect(raw, "explained", list, path), f"{path}.explained"),
            )
        except FeatureError as exc:
            if str(exc).startswith(path):
                raise
            raise FeatureError(f"{path}: {exc}") from None
    else:
        columns = _parse_columns(
            _expect(payload, "columns", list, "featureset"), "featureset.columns"
        )
    try:
        return FeatureSet(
            method=method,
            target=target,
            columns=columns,
            loadings=loadings,
            params=params,
            flags=tuple(str(f) for f in flags),
            audit=tuple(str(a) for a in audit),
        )
    except FeatureError as exc:
        raise FeatureError(f"featureset: {exc}") from None
