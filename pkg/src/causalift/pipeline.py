"""End-to-end experiment orchestration: data, discovery, selection, tuning, scoring.

One experiment = n_runs simulated (or loaded) series, each split into past
and future halves. The causal graph is discovered once, on run 1's training
half, optionally expert-edited, and shared across runs. Every
run x target x selector x family cell tunes on the training design, scores on
the test design, and lands in one results bundle. Everything derives from the
master seed; a rerun of the same config writes byte-identical files apart
from measured runtimes.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from causalift.dataset import (
    LaggedDesign,
    TimeSeriesDataset,
    build_lagged_design,
    read_csv,
    temporal_split,
)
from causalift.discovery import DiscoveryConfig, discover_graph
from causalift.features import (
    METHODS,
    FeatureSet,
    all_features,
    causal_all,
    causal_lags,
    featureset_to_json,
    lasso_select,
    pca_select,
    rfe,
    tree_select,
)
from causalift.graph import TimeSeriesGraph, apply_edits, editspec_from_json, to_json
from causalift.jsonutil import expect
from causalift.metrics import (
    EvalReport,
    EvalRow,
    best_counts,
    evaluate,
    reports_to_csv,
)
from causalift.models import FAMILIES, random_search_cv
from causalift.simulator import ScmSpec, default_spec, simulate, spec_from_json, spec_to_json

__all__ = [
    "PipelineError",
    "ExperimentConfig",
    "ExperimentResult",
    "DEFAULT_TARGETS",
    "DEFAULT_FAMILIES",
    "config_to_dict",
    "config_from_dict",
    "load_config",
    "select_features",
    "restrict_design",
    "run_experiment",
    "render_report",
]

DEFAULT_TARGETS = ("In_Temp", "HVAC_Ener")
DEFAULT_FAMILIES = ("ols", "forest", "gbt", "mlp")

# One year per run when no spec is given: half trains, half tests. Keeps the
# stock 20-run study inside a desk-scale compute budget.
DEFAULT_EXPERIMENT_STEPS = 8760

BUNDLE_FILES = (
    "graph.json",
    "graph_final.json",
    "results.csv",
    "results.json",
    "aggregate.json",
    "profiles.json",
    "report.md",
)


class PipelineError(ValueError):
    """Raised for invalid experiment configuration or a fully failed stage."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything run_experiment needs; defaults reproduce the stock study."""

    scm: ScmSpec | None = None
    data_dir: str | None = None
    n_runs: int = 20
    split_fraction: float = 0.5
    targets: tuple[str, ...] = DEFAULT_TARGETS
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    edits_path: str | None = None
    selectors: tuple[str, ...] = METHODS
    families: tuple[str, ...] = DEFAULT_FAMILIES
    tuning_budget: int = 4
    horizon: int = 5
    per_run_discovery: bool = False
    out_dir: str = "results"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.scm is not None and self.data_dir is not None:
            raise PipelineError("config gives both an SCM spec and a data directory")
        if self.n_runs < 1:
            raise PipelineError(f"n_runs must be >= 1, got {self.n_runs}")
        if not 0.0 < self.split_fraction < 1.0:
            raise PipelineError(
                f"split_fraction must be in (0, 1), got {self.split_fraction}"
            )
        for name, values, allowed in (
            ("targets", self.targets, None),
            ("selectors", self.selectors, METHODS),
            ("families", self.families, FAMILIES),
        ):
            if not values:
                raise PipelineError(f"config needs at least one entry in {name}")
            if allowed is not None:
                for v in values:
                    if v not in allowed:
                        raise PipelineError(
                            f"unknown entry {v!r} in {name}; expected one of {list(allowed)}"
                        )
        if len(set(self.targets)) != len(self.targets):
            raise PipelineError("duplicate targets")
        if self.tuning_budget < 1:
            raise PipelineError(f"tuning_budget must be >= 1, got {self.tuning_budget}")
        if self.horizon < 1:
            raise PipelineError(f"horizon must be >= 1, got {self.horizon}")
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "selectors", tuple(self.selectors))
        object.__setattr__(self, "families", tuple(self.families))


def _derive_seed(*parts: int) -> int:
    """Stable per-cell seed so parallel and serial schedules agree."""
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def config_to_dict(cfg: ExperimentConfig) -> dict:
    data: dict = {"scm": "default"}
    if cfg.scm is not None:
        data = {"scm": json.loads(spec_to_json(cfg.scm))}
    elif cfg.data_dir is not None:
        data = {"dir": cfg.data_dir}
    return {
        "data": data,
        "n_runs": cfg.n_runs,
        "split_fraction": cfg.split_fraction,
        "targets": list(cfg.targets),
        "discovery": {
            "alpha": cfg.discovery.alpha,
            "max_scan_lag": cfg.discovery.max_scan_lag,
            "tau_max": cfg.discovery.tau_max,
            "max_condition_size": cfg.discovery.max_condition_size,
            "stationarity_threshold": cfg.discovery.stationarity_threshold,
        },
        "edits": cfg.edits_path,
        "selectors": list(cfg.selectors),
        "families": list(cfg.families),
        "tuning_budget": cfg.tuning_budget,
        "horizon": cfg.horizon,
        "per_run_discovery": cfg.per_run_discovery,
        "out_dir": cfg.out_dir,
        "seed": cfg.seed,
    }


def _ex(payload, key, kinds, path, **kw):
    return expect(payload, key, kinds, path, error_cls=PipelineError, **kw)


def config_from_dict(payload: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Build a config from a key-value tree; relative paths resolve against base_dir."""
    if not isinstance(payload, dict):
        raise PipelineError(f"config: expected object, got {type(payload).__name__}")
    base = Path(base_dir)
    scm = None
    data_dir = None
    data = _ex(payload, "data", dict, "config", default={"scm": "default"})
    if "dir" in data:
        data_dir = str(base / _ex(data, "dir", str, "config.data"))
    else:
        raw = _ex(data, "scm", (str, dict), "config.data", default="default")
        if raw != "default":
            scm = spec_from_json(json.dumps(raw))
    disco_raw = _ex(payload, "discovery", dict, "config", default={})
    discovery = DiscoveryConfig(
        alpha=_ex(disco_raw, "alpha", float, "config.discovery", default=0.01),
        max_scan_lag=_ex(disco_raw, "max_scan_lag", int, "config.discovery", default=24),
        tau_max=_ex(disco_raw, "tau_max", (int, type(None)), "config.discovery", default=None),
        max_condition_size=_ex(
            disco_raw, "max_condition_size", (int, type(None)), "config.discovery", default=None
        ),
        stationarity_threshold=_ex(
            disco_raw, "stationarity_threshold", float, "config.discovery", default=0.01
        ),
    )
    edits = _ex(payload, "edits", (str, type(None)), "config", default=None)
    if edits is not None:
        edits = str(base / edits)
    cfg = ExperimentConfig(
        scm=scm,
        data_dir=data_dir,
        n_runs=_ex(payload, "n_runs", int, "config", default=20),
        split_fraction=float(_ex(payload, "split_fraction", float, "config", default=0.5)),
        targets=tuple(_ex(payload, "targets", list, "config", default=list(DEFAULT_TARGETS))),
        discovery=discovery,
        edits_path=edits,
        selectors=tuple(_ex(payload, "selectors", list, "config", default=list(METHODS))),
        families=tuple(_ex(payload, "families", list, "config", default=list(DEFAULT_FAMILIES))),
        tuning_budget=_ex(payload, "tuning_budget", int, "config", default=4),
        horizon=_ex(payload, "horizon", int, "config", default=5),
        per_run_discovery=_ex(payload, "per_run_discovery", bool, "config", default=False),
        out_dir=_ex(payload, "out_dir", str, "config", default="results"),
        seed=_ex(payload, "seed", int, "config", default=0),
    )
    _check_paths(cfg)
    return cfg


def _check_paths(cfg: ExperimentConfig) -> None:
    if cfg.data_dir is not None and not Path(cfg.data_dir).is_dir():
        raise PipelineError(f"data directory not found: {cfg.data_dir}")
    if cfg.edits_path is not None and not Path(cfg.edits_path).is_file():
        raise PipelineError(f"edits file not found: {cfg.edits_path}")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise PipelineError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise PipelineError(f"config file {path}: invalid JSON: {exc}") from None
    return config_from_dict(payload, base_dir=path.parent)


def _prepare_runs(cfg: ExperimentConfig) -> list[TimeSeriesDataset]:
    if cfg.data_dir is not None:
        paths = sorted(Path(cfg.data_dir).glob("run*.csv"))
        if not paths:
            raise PipelineError(f"no run*.csv files in {cfg.data_dir}")
        if len(paths) < cfg.n_runs:
            raise PipelineError(
                f"config asks for {cfg.n_runs} runs but {cfg.data_dir} has {len(paths)}"
            )
        return [read_csv(p) for p in paths[: cfg.n_runs]]
    if cfg.scm is not None:
        spec = cfg.scm
    else:
        spec = replace(default_spec(), horizon_steps=DEFAULT_EXPERIMENT_STEPS)
    runs = []
    for r in range(cfg.n_runs):
        spec_r = replace(spec, seed=_derive_seed(cfg.seed, 0, r))
        ds, _ = simulate(spec_r)
        runs.append(ds)
    return runs


def select_features(
    method: str,
    graph: TimeSeriesGraph,
    train_design: LaggedDesign,
    seed: int = 0,
) -> FeatureSet:
    """Dispatch one selector; graph methods read the graph, the rest fit on train."""
    target = train_design.target
    if method == "causal-lags":
        return causal_lags(graph, target)
    if method == "causal-all":
        return causal_all(graph, target)
    if method == "all":
        return all_features(graph.variables, graph.tau_max, target)
    if method == "rfe":
        return rfe(train_design)
    if method == "pca":
        return pca_select(train_design)
    if method == "tree":
        return tree_select(train_design, seed=seed)
    if method == "lasso":
        return lasso_select(train_design)
    raise PipelineError(f"unknown selector {method!r}; expected one of {list(METHODS)}")


def _component_design(fs: FeatureSet, design: LaggedDesign) -> LaggedDesign:
    scores = fs.loadings.transform(design.X)
    return LaggedDesign(
        target=design.target,
        tau_max=design.tau_max,
        columns=tuple((f"pc{i}", 1) for i in range(scores.shape[1])),
        X=scores,
        y=design.y,
        row_time_index=design.row_time_index,
        role=design.role,
    )


def restrict_design(fs: FeatureSet, design: LaggedDesign) -> LaggedDesign:
    """The design a model sees under this feature set: column subset, or
    component scores when the set carries loadings."""
    if fs.loadings is not None:
        return _component_design(fs, design)
    return design.with_columns(fs.columns)


def _feature_digest(fs: FeatureSet) -> str:
    return hashlib.sha256(featureset_to_json(fs).encode()).hexdigest()[:16]


def _target_cells(args) -> tuple[list[dict], list[dict]]:
    """All (selector, family) cells for one run and target. Pure; picklable."""
    (run_index, run_id, target, t_index, train_ds, test_ds, graph, cfg) = args
    cells: list[dict] = []
    failures: list[dict] = []
    train_design = build_lagged_design(train_ds, target, graph.tau_max, role="train")
    test_design = build_lagged_design(test_ds, target, graph.tau_max, role="test")
    for s_index, method in enumerate(cfg.selectors):
        sel_seed = _derive_seed(cfg.seed, 1, run_index, t_index, s_index)
        try:
            fs = select_features(method, graph, train_design, seed=sel_seed)
            if fs.n_features == 0:
                raise PipelineError("empty feature set")
            sub_train = restrict_design(fs, train_design)
            sub_test = restrict_design(fs, test_design)
        except Exception as exc:
            for family in cfg.families:
                failures.append(
                    {
                        "run": run_id,
                        "target": target,
                        "selector": method,
                        "family": family,
                        "stage": "select",
                        "error": str(exc),
                    }
                )
            continue
        for f_index, family in enumerate(cfg.families):
            cell_seed = _derive_seed(cfg.seed, 2, run_index, t_index, s_index, f_index)
            started = time.perf_counter()
            try:
                search = random_search_cv(
                    family, sub_train, budget=cfg.tuning_budget, seed=cell_seed
                )
                row = evaluate(
                    search.model,
                    sub_test,
                    events=test_ds.interventions,
                    horizon=cfg.horizon,
                    selector=method,
                    n_features=fs.n_features,
                    runtime_s=round(time.perf_counter() - started, 3),
                )
            except Exception as exc:
                failures.append(
                    {
                        "run": run_id,
                        "target": target,
                        "selector": method,
                        "family": family,
                        "stage": "tune-train-eval",
                        "error": str(exc),
                    }
                )
                continue
            cells.append(
                {
                    "run": run_id,
                    "target": target,
                    "selector": method,
                    "family": family,
                    "n_features": fs.n_features,
                    "features": None if fs.loadings is not None else [list(c) for c in fs.columns],
                    "features_digest": _feature_digest(fs),
                    "hyperparams": dict(search.best_spec.hyperparams),
                    "mae": row.mae,
                    "mape": row.mape,
                    "mape_excluded": row.mape_excluded,
                    "mae_w": row.mae_w,
                    "mape_w": row.mape_w,
                    "mape_w_excluded": row.mape_w_excluded,
                    "window_count": row.window_count,
                    "horizon": row.horizon,
                    "profile": list(row.profile),
                    "runtime_s": row.runtime_s,
                }
            )
    return cells, failures


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    graph: TimeSeriesGraph
    final_graph: TimeSeriesGraph
    reports: tuple[EvalReport, ...]
    cells: tuple[dict, ...]
    failures: tuple[dict, ...]
    aggregate: dict
    profiles: dict
    out_dir: Path


def _row_from_cell(cell: dict) -> EvalRow:
    return EvalRow(
        selector=cell["selector"],
        family=cell["family"],
        n_features=cell["n_features"],
        mae=cell["mae"],
        mape=cell["mape"],
        mape_excluded=cell["mape_excluded"],
        mae_w=cell["mae_w"],
        mape_w=cell["mape_w"],
        mape_w_excluded=cell["mape_w_excluded"],
        window_count=cell["window_count"],
        horizon=cell["horizon"],
        profile=tuple(cell["profile"]),
        runtime_s=cell["runtime_s"],
    )


def _build_reports(cfg: ExperimentConfig, run_ids, cells) -> tuple[EvalReport, ...]:
    grouped: dict[tuple[str, str], list[EvalRow]] = {}
    for cell in cells:
        grouped.setdefault((cell["run"], cell["target"]), []).append(_row_from_cell(cell))
    reports = []
    for run_id in run_ids:
        for target in cfg.targets:
            rows = grouped.get((run_id, target), [])
            reports.append(EvalReport(run_id=run_id, target=target, rows=tuple(rows)))
    return tuple(reports)


def _mean_or_none(values) -> float | None:
    defined = [v for v in values if v is not None]
    return float(np.mean(defined)) if defined else None


def _aggregate(cfg: ExperimentConfig, reports, failures) -> tuple[dict, dict]:
    aggregate: dict = {"n_runs": cfg.n_runs, "targets": {}}
    profiles: dict = {}
    for target in cfg.targets:
        target_reports = [r for r in reports if r.target == target]
        grouped: dict[tuple[str, str], list[EvalRow]] = {}
        for report in target_reports:
            for row in report.rows:
                grouped.setdefault((row.selector, row.family), []).append(row)
        failed: dict[tuple[str, str], int] = {}
        for f in failures:
            if f["target"] == target:
                key = (f["selector"], f["family"])
                failed[key] = failed.get(key, 0) + 1
        cells = []
        for (selector, family) in sorted(set(grouped) | set(failed)):
            rows = grouped.get((selector, family), [])
            cells.append(
                {
                    "selector": selector,
                    "family": family,
                    "mean_n_features": _mean_or_none([r.n_features for r in rows]),
                    "mean_mae": _mean_or_none([r.mae for r in rows]),
                    "mean_mape": _mean_or_none([r.mape for r in rows]),
                    "mean_mae_w": _mean_or_none([r.mae_w for r in rows]),
                    "mean_mape_w": _mean_or_none([r.mape_w for r in rows]),
                    "n_runs_ok": len(rows),
                    "n_failed": failed.get((selector, family), 0),
                }
            )
        cells.sort(
            key=lambda c: (
                c["mean_mae"] if c["mean_mae"] is not None else float("inf"),
                c["selector"],
                c["family"],
            )
        )
        counts = {}
        for metric in ("mae", "mae_w"):
            bc = best_counts(target_reports, metric)
            counts[metric] = {
                "counts": {k: bc.counts[k] for k in sorted(bc.counts)},
                "tie_runs": list(bc.tie_runs),
                "skipped_runs": list(bc.skipped_runs),
            }
        aggregate["targets"][target] = {"cells": cells, "best_counts": counts}
        curves: dict[str, list] = {}
        for (selector, family), rows in sorted(grouped.items()):
            horizon = rows[0].horizon
            curve = []
            for j in range(horizon):
                curve.append(_mean_or_none([r.profile[j] for r in rows]))
            curves[f"{selector}/{family}"] = curve
        profiles[target] = curves
    return aggregate, profiles


def _fmt(value, digits: int = 4) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}g}"


def render_report(meta: dict, aggregate: dict, failures) -> str:
    """The bundle's human-readable summary: per-target tables sorted by MAE."""
    lines = ["# Lagged-prediction experiment", ""]
    lines.append(
        f"- runs: {meta['n_runs']}, seed: {meta['seed']}, "
        f"tuning budget: {meta['tuning_budget']}, horizon: {meta['horizon']}"
    )
    lines.append(
        f"- graph: tau_max {meta['tau_max']}, {meta['n_links']} discovered links"
        + (f", {meta['n_final_links']} after edits" if meta["n_final_links"] != meta["n_links"] else "")
    )
    lines.append("")
    for target, block in aggregate["targets"].items():
        lines.append(f"## Target: {target}")
        lines.append("")
        lines.append("| selector | family | n_features | MAE | MAPE | MAE_w | MAPE_w | runs |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for cell in block["cells"]:
            runs_note = str(cell["n_runs_ok"])
            if cell["n_failed"]:
                runs_note += f" ({cell['n_failed']} failed)"
            lines.append(
                "| {selector} | {family} | {nf} | {mae} | {mape} | {mae_w} | {mape_w} | {runs} |".format(
                    selector=cell["selector"],
                    family=cell["family"],
                    nf=_fmt(cell["mean_n_features"], 3),
                    mae=_fmt(cell["mean_mae"]),
                    mape=_fmt(cell["mean_mape"]),
                    mae_w=_fmt(cell["mean_mae_w"]),
                    mape_w=_fmt(cell["mean_mape_w"]),
                    runs=runs_note,
                )
            )
        lines.append("")
        for metric in ("mae", "mae_w"):
            counts = block["best_counts"][metric]["counts"]
            ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
            shown = ", ".join(f"{sel} {_fmt(n, 3)}" for sel, n in ranked if n > 0) or "none"
            lines.append(f"Best-{metric} wins by selector: {shown}")
        lines.append("")
    if failures:
        lines.append("## Failed cells")
        lines.append("")
        for f in failures:
            lines.append(
                f"- {f['run']} {f['target']} {f['selector']}/{f['family']} "
                f"at {f['stage']}: {f['error']}"
            )
        lines.append("")
    else:
        lines.append("No failed cells.")
        lines.append("")
    return "\n".join(lines)


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | Path | None = None, n_jobs: int = 1
) -> ExperimentResult:
    """Run the full study and write the results bundle; see module docstring.

    ``n_jobs`` > 1 fans (run, target) blocks out to worker processes; results
    are identical to the serial schedule because every cell derives its own
    seed and outputs are reassembled in plan order.
    """
    _check_paths(cfg)
    out = Path(out_dir) if out_dir is not None else Path(cfg.out_dir)
    runs = _prepare_runs(cfg)
    run_ids = [f"run{r:02d}" for r in range(len(runs))]
    for ds in runs:
        for target in cfg.targets:
            if target not in ds.names:
                raise PipelineError(
                    f"target {target!r} not in dataset variables {list(ds.names)}"
                )
    halves = [temporal_split(ds, cfg.split_fraction) for ds in runs]

    graphs: list[TimeSeriesGraph]
    if cfg.per_run_discovery:
        graphs = [discover_graph(train, cfg.discovery) for train, _ in halves]
    else:
        graphs = [discover_graph(halves[0][0], cfg.discovery)] * len(runs)
    base_graph = graphs[0]

    if cfg.edits_path is not None:
        edits = editspec_from_json(Path(cfg.edits_path).read_text())
        graphs = [apply_edits(g, edits) for g in graphs]
    final_graph = graphs[0]

    jobs = []
    for r, (train_ds, test_ds) in enumerate(halves):
        for t_index, target in enumerate(cfg.targets):
            jobs.append(
                (r, run_ids[r], target, t_index, train_ds, test_ds, graphs[r], cfg)
            )
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outputs = list(pool.map(_target_cells, jobs))
    else:
        outputs = [_target_cells(job) for job in jobs]

    cells: list[dict] = []
    failures: list[dict] = []
    for cell_list, failure_list in outputs:
        cells.extend(cell_list)
        failures.extend(failure_list)
    if not cells:
        first = failures[0]["error"] if failures else "no cells planned"
        raise PipelineError(
            f"every cell failed ({len(failures)} failures); first error: {first}"
        )

    reports = _build_reports(cfg, run_ids, cells)
    aggregate, profiles = _aggregate(cfg, reports, failures)
    meta = {
        "n_runs": cfg.n_runs,
        "seed": cfg.seed,
        "tuning_budget": cfg.tuning_budget,
        "horizon": cfg.horizon,
        "tau_max": final_graph.tau_max,
        "n_links": len(base_graph.links),
        "n_final_links": len(final_graph.links),
    }
    result = ExperimentResult(
        config=cfg,
        graph=base_graph,
        final_graph=final_graph,
        reports=reports,
        cells=tuple(cells),
        failures=tuple(failures),
        aggregate=aggregate,
        profiles=profiles,
        out_dir=out,
    )
    _write_bundle(result, meta)
    return result


def _dump(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _write_bundle(result: ExperimentResult, meta: dict) -> None:
    out = result.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "graph.json").write_text(to_json(result.graph))
    (out / "graph_final.json").write_text(to_json(result.final_graph))
    (out / "results.csv").write_text(reports_to_csv(result.reports))
    results_payload = {
        "config": config_to_dict(result.config),
        "meta": meta,
        "cells": list(result.cells),
        "failures": list(result.failures),
    }
    (out / "results.json").write_text(_dump(results_payload))
    (out / "aggregate.json").write_text(_dump(result.aggregate))
    (out / "profiles.json").write_text(_dump(result.profiles))
    (out / "report.md").write_text(render_report(meta, result.aggregate, result.failures))
