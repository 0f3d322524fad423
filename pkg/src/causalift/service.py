"""HTTP facade for the interactive graph-editing loop.

One service instance holds one current graph plus the dataset backing
quick evaluations. Edits arrive as reviewable batches: ``commit=false``
stages a preview graph without touching the current state, ``commit=true``
replaces the state and persists the edited graph beside the input file.
All numbers the UI shows come from these endpoints; the browser never
computes statistics of its own.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from causalift.dataset import (
    LaggedDesign,
    TimeSeriesDataset,
    build_lagged_design,
    read_csv,
    temporal_split,
)
from causalift.features import METHODS, FeatureError, FeatureSet, featureset_to_json
from causalift.graph import (
    EditEntry,
    EditSpec,
    GraphError,
    TimeSeriesGraph,
    apply_edits,
    from_json,
    summary_graph,
    to_json,
)
from causalift.metrics import MetricError, evaluate
from causalift.models import ModelError, fit_family
from causalift.pipeline import restrict_design, select_features

__all__ = ["create_app"]


class LinkEditIn(BaseModel):
    source: str
    target: str
    lag: int = Field(default=1, ge=1)
    note: str = ""


class EditSpecIn(BaseModel):
    author: str
    add: list[LinkEditIn] = []
    remove: list[LinkEditIn] = []
    commit: bool = True


class QuickEvalIn(BaseModel):
    target: str
    method: str = "causal-lags"
    horizon: int | None = Field(default=None, ge=1)
    preview: bool = False


class _State:
    """Current graph, staged preview, and caches; mutations hold the lock."""

    def __init__(
        self,
        graph: TimeSeriesGraph,
        dataset: TimeSeriesDataset,
        split_fraction: float,
        horizon: int,
        edited_path: Path,
    ) -> None:
        self.lock = threading.Lock()
        self.graph = graph
        self.preview: TimeSeriesGraph | None = None
        self.version = 0
        self.preview_version = 0
        self.train, self.test = temporal_split(dataset, split_fraction)
        self.horizon = horizon
        self.edited_path = edited_path
        self._designs: dict[tuple[str, str], LaggedDesign] = {}
        self._features: dict[tuple, FeatureSet] = {}

    def pick(self, preview: bool) -> TimeSeriesGraph:
        if not preview:
            return self.graph
        if self.preview is None:
            raise HTTPException(
                status_code=409,
                detail="no preview staged; POST /api/edits with commit=false first",
            )
        return self.preview

    def design(self, target: str, role: str) -> LaggedDesign:
        # tau_max is fixed at load time, so designs never go stale
        key = (target, role)
        if key not in self._designs:
            ds = self.train if role == "train" else self.test
            self._designs[key] = build_lagged_design(
                ds, target, self.graph.tau_max, role=role
            )
        return self._designs[key]

    def features(self, target: str, method: str, preview: bool) -> FeatureSet:
        graph = self.pick(preview)
        key = (
            self.preview_version if preview else -1,
            self.version,
            target,
            method,
        )
        if key not in self._features:
            design = self.design(target, "train")
            self._features[key] = select_features(method, graph, design, seed=0)
        return self._features[key]


def _graph_payload(graph: TimeSeriesGraph) -> dict:
    return json.loads(to_json(graph))


def _summary_payload(graph: TimeSeriesGraph) -> dict:
    return {
        "variables": list(graph.variables),
        "tau_max": graph.tau_max,
        "edges": [
            {
                "source": e.source,
                "target": e.target,
                "lags": list(e.lags),
                "max_abs_strength": e.max_abs_strength,
                "provenances": list(e.provenances),
            }
            for e in summary_graph(graph)
        ],
    }


def create_app(
    graph_path: str | Path,
    data_path: str | Path,
    split_fraction: float = 0.5,
    horizon: int = 5,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the service around one graph JSON file and one dataset CSV."""
    graph_path = Path(graph_path)
    graph = from_json(graph_path.read_text())
    dataset = read_csv(data_path)
    edited_path = graph_path.with_name(graph_path.stem + "_edited" + graph_path.suffix)
    state = _State(graph, dataset, split_fraction, horizon, edited_path)

    app = FastAPI(title="causalift graph service", docs_url=None, redoc_url=None)
    app.state.graphs = state

    @app.get("/api/graph")
    def get_graph() -> dict:
        return _graph_payload(state.graph)

    @app.get("/api/summary")
    def get_summary() -> dict:
        return _summary_payload(state.graph)

    @app.post("/api/edits")
    def post_edits(payload: EditSpecIn) -> dict:
        with state.lock:
            try:
                edits = EditSpec(
                    author=payload.author,
                    add=tuple(
                        EditEntry(e.source, e.target, e.lag, e.note) for e in payload.add
                    ),
                    remove=tuple(
                        EditEntry(e.source, e.target, e.lag, e.note)
                        for e in payload.remove
                    ),
                )
                edited = apply_edits(state.graph, edits)
            except GraphError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            if payload.commit:
                state.graph = edited
                state.preview = None
                state.version += 1
                state.edited_path.write_text(to_json(edited))
            else:
                state.preview = edited
                state.preview_version += 1
        return {
            "committed": payload.commit,
            "graph": _graph_payload(edited),
            "summary": _summary_payload(edited),
        }

    @app.get("/api/features")
    def get_features(target: str, method: str, preview: bool = False) -> dict:
        if method not in METHODS:
            raise HTTPException(
                status_code=422,
                detail=f"unknown method {method!r}; expected one of {list(METHODS)}",
            )
        try:
            fs = state.features(target, method, preview)
        except (FeatureError, GraphError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return json.loads(featureset_to_json(fs))

    @app.post("/api/quick-eval")
    def quick_eval(payload: QuickEvalIn) -> dict:
        if payload.method not in METHODS:
            raise HTTPException(
                status_code=422,
                detail=f"unknown method {payload.method!r}; "
                f"expected one of {list(METHODS)}",
            )
        try:
            fs = state.features(payload.target, payload.method, payload.preview)
        except (FeatureError, GraphError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        if fs.n_features == 0:
            raise HTTPException(
                status_code=409,
                detail=f"method {payload.method!r} selects no features for "
                f"{payload.target!r}; edit the graph or pick another method",
            )
        horizon = payload.horizon if payload.horizon is not None else state.horizon
        try:
            train = restrict_design(fs, state.design(payload.target, "train"))
            test = restrict_design(fs, state.design(payload.target, "test"))
            model = fit_family("ols", train.X, train.y)
            row = evaluate(
                model,
                test,
                events=state.test.interventions,
                horizon=horizon,
                selector=payload.method,
                n_features=fs.n_features,
            )
        except (ModelError, MetricError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {
            "mae": row.mae,
            "mape": row.mape,
            "mae_w": row.mae_w,
            "n_features": fs.n_features,
            "windows": row.window_count,
        }

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
