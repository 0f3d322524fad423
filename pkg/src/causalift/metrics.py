"""Prediction scoring: full-series MAE/MAPE, post-intervention windows, win counts.

Windowed metrics pool the UNION of {t+1..t+horizon} indices over all
intervention events, so a test point covered by two nearby events is counted
once. The per-offset profile (mean absolute error j steps after an event)
preserves the per-event view. MAPE excludes near-zero actuals and reports the
exclusion count; a metric with no usable samples is None, never NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from causalift.dataset import InterventionEvent, LaggedDesign, format_float
from causalift.jsonutil import expect

__all__ = [
    "MetricError",
    "MAPE_ZERO_GUARD",
    "MapeResult",
    "EvalRow",
    "EvalReport",
    "BestCounts",
    "mae",
    "mape",
    "intervention_windows",
    "evaluate",
    "best_counts",
    "reports_to_csv",
    "report_to_dict",
    "report_from_dict",
]

MAPE_ZERO_GUARD = 1e-8

CSV_HEADER = "run,target,selector,family,n_features,mae,mape,mae_w,mape_w,windows,runtime_s"


class MetricError(ValueError):
    """Raised for malformed metric inputs."""


def _check_pair(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.ndim != 1 or yhat.ndim != 1:
        raise MetricError("metric inputs must be vectors")
    if y.shape[0] != yhat.shape[0]:
        raise MetricError(f"length mismatch: y has {y.shape[0]}, yhat has {yhat.shape[0]}")
    if y.shape[0] == 0:
        raise MetricError("metric inputs are empty")
    return y, yhat


def mae(y, yhat) -> float:
    """Mean absolute error, (1/n) sum |y_i - yhat_i|."""
    y, yhat = _check_pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


@dataclass(frozen=True)
class MapeResult:
    """MAPE with its zero-exclusion audit; ``value`` is None when nothing remains."""

    value: float | None
    n_used: int
    n_excluded: int

    @property
    def undefined(self) -> bool:
        return self.value is None


def mape(y, yhat) -> MapeResult:
    """Mean absolute percentage error, excluding samples with |y_i| < 1e-8."""
    y, yhat = _check_pair(y, yhat)
    keep = np.abs(y) >= MAPE_ZERO_GUARD
    n_used = int(keep.sum())
    n_excluded = y.shape[0] - n_used
    if n_used == 0:
        return MapeResult(None, 0, n_excluded)
    value = float(100.0 * np.mean(np.abs((y[keep] - yhat[keep]) / y[keep])))
    return MapeResult(value, n_used, n_excluded)


def intervention_windows(
    events: Sequence[InterventionEvent], horizon: int = 5, t_range=None
) -> list[tuple[int, ...]]:
    """Per-event index windows {t+1..t+horizon}, truncated to t_range.

    Windows that truncate to nothing are dropped. ``t_range`` is any iterable
    of admissible time indices (None = unbounded). Events are processed in
    time order so the output is deterministic regardless of input order.
    """
    if horizon < 1:
        raise MetricError(f"horizon must be >= 1, got {horizon}")
    allowed = None if t_range is None else {int(t) for t in t_range}
    windows: list[tuple[int, ...]] = []
    for ev in sorted(events, key=lambda e: (e.time_index, e.variable)):
        idx = tuple(
            t
            for t in range(ev.time_index + 1, ev.time_index + horizon + 1)
            if allowed is None or t in allowed
        )
        if idx:
            windows.append(idx)
    return windows


def _non_negative(name: str, value) -> None:
    if value is not None and value < 0:
        raise MetricError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True)
class EvalRow:
    """One (selector, model family) cell of a run's evaluation table."""

    selector: str
    family: str
    n_features: int
    mae: float
    mape: float | None
    mape_excluded: int
    mae_w: float | None
    mape_w: float | None
    mape_w_excluded: int
    window_count: int
    horizon: int
    profile: tuple[float | None, ...]
    runtime_s: float = 0.0

    def __post_init__(self) -> None:
        for name in ("mae", "mape", "mae_w", "mape_w"):
            _non_negative(name, getattr(self, name))
        if self.window_count < 0:
            raise MetricError(f"window_count must be >= 0, got {self.window_count}")
        if len(self.profile) != self.horizon:
            raise MetricError(
                f"profile length {len(self.profile)} != horizon {self.horizon}"
            )
        object.__setattr__(self, "profile", tuple(self.profile))


@dataclass(frozen=True)
class EvalReport:
    """Evaluation table for one run and one target."""

    run_id: str
    target: str
    rows: tuple[EvalRow, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))


def evaluate(
    model,
    design: LaggedDesign,
    events=(),
    horizon: int = 5,
    selector: str = "",
    n_features: int | None = None,
    runtime_s: float = 0.0,
) -> EvalRow:
    """Score a trained model on a test design, full-series and post-event.

    Windows are built on the design's own time indices, so rows consumed by
    lag construction never contribute phantom window points. The model family
    is read off the model's spec; ``n_features`` defaults to the design width.
    """
    yhat = model.predict(design.X)
    y = design.y
    full_mape = mape(y, yhat)
    windows = intervention_windows(events, horizon, design.row_time_index)
    pos = {int(t): i for i, t in enumerate(design.row_time_index)}
    union = sorted({t for w in windows for t in w})
    rows = [pos[t] for t in union]
    if rows:
        mae_w = mae(y[rows], yhat[rows])
        w_mape = mape(y[rows], yhat[rows])
        mape_w, mape_w_excluded = w_mape.value, w_mape.n_excluded
    else:
        mae_w, mape_w, mape_w_excluded = None, None, 0
    abs_err = np.abs(y - yhat)
    profile: list[float | None] = []
    starts = [ev.time_index for ev in events]
    for offset in range(1, horizon + 1):
        hits = [abs_err[pos[t0 + offset]] for t0 in starts if t0 + offset in pos]
        profile.append(float(np.mean(hits)) if hits else None)
    return EvalRow(
        selector=selector,
        family=model.spec.family,
        n_features=design.n_columns if n_features is None else n_features,
        mae=mae(y, yhat),
        mape=full_mape.value,
        mape_excluded=full_mape.n_excluded,
        mae_w=mae_w,
        mape_w=mape_w,
        mape_w_excluded=mape_w_excluded,
        window_count=len(windows),
        horizon=horizon,
        profile=tuple(profile),
        runtime_s=runtime_s,
    )


_METRIC_FIELDS = ("mae", "mape", "mae_w", "mape_w")


@dataclass(frozen=True)
class BestCounts:
    """Per-selector win counts over runs; ties split into equal fractions."""

    metric: str
    counts: dict = field(default_factory=dict)
    tie_runs: tuple[str, ...] = ()
    skipped_runs: tuple[str, ...] = ()

    @property
    def total(self) -> float:
        return float(sum(self.counts.values()))


def best_counts(reports, metric: str = "mae") -> BestCounts:
    """Count, per selector, how many runs it won on the given metric.

    A selector's score in a run is its best family's value; the run's winners
    share one count equally. Runs where every cell is undefined are skipped
    and listed, so total counts equal the number of scoreable runs. Reports
    should all concern the same target.
    """
    if metric not in _METRIC_FIELDS:
        raise MetricError(f"unknown metric {metric!r}; expected one of {list(_METRIC_FIELDS)}")
    counts: dict[str, float] = {}
    tie_runs: list[str] = []
    skipped: list[str] = []
    for report in reports:
        per_selector: dict[str, float] = {}
        for row in report.rows:
            counts.setdefault(row.selector, 0.0)
            value = getattr(row, metric)
            if value is None:
                continue
            best = per_selector.get(row.selector)
            if best is None or value < best:
                per_selector[row.selector] = value
        if not per_selector:
            skipped.append(report.run_id)
            continue
        floor = min(per_selector.values())
        winners = sorted(s for s, v in per_selector.items() if v == floor)
        share = 1.0 / len(winners)
        for s in winners:
            counts[s] = counts.get(s, 0.0) + share
        if len(winners) > 1:
            tie_runs.append(report.run_id)
    return BestCounts(
        metric=metric,
        counts=counts,
        tie_runs=tuple(tie_runs),
        skipped_runs=tuple(skipped),
    )


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def reports_to_csv(reports) -> str:
    """Flatten reports to CSV, rows sorted by MAE ascending within (run, target)."""
    lines = [CSV_HEADER]
    for report in reports:
        for row in sorted(report.rows, key=lambda r: (r.mae, r.selector, r.family)):
            lines.append(
                ",".join(
                    [
                        report.run_id,
                        report.target,
                        row.selector,
                        row.family,
                        str(row.n_features),
                        _cell(row.mae),
                        _cell(row.mape),
                        _cell(row.mae_w),
                        _cell(row.mape_w),
                        str(row.window_count),
                        _cell(row.runtime_s),
                    ]
                )
            )
    return "\n".join(lines) + "\n"


def _row_to_dict(row: EvalRow) -> dict:
    return {
        "selector": row.selector,
        "family": row.family,
        "n_features": row.n_features,
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


def report_to_dict(report: EvalReport) -> dict:
    return {
        "run_id": report.run_id,
        "target": report.target,
        "rows": [_row_to_dict(r) for r in report.rows],
    }


def _expect(payload, key, kinds, path, **kw):
    return expect(payload, key, kinds, path, error_cls=MetricError, **kw)


def report_from_dict(payload: dict) -> EvalReport:
    if not isinstance(payload, dict):
        raise MetricError(f"report: expected object, got {type(payload).__name__}")
    run_id = _expect(payload, "run_id", str, "report")
    target = _expect(payload, "target", str, "report")
    raw_rows = _expect(payload, "rows", list, "report")
    rows = []
    for i, item in enumerate(raw_rows):
        path = f"report.rows[{i}]"
        if not isinstance(item, dict):
            raise MetricError(f"{path}: expected object, got {type(item).__name__}")
        profile = _expect(item, "profile", list, path)
        try:
            rows.append(
                EvalRow(
                    selector=_expect(item, "selector", str, path),
                    family=_expect(item, "family", str, path),
                    n_features=_expect(item, "n_features", int, path),
                    mae=float(_expect(item, "mae", float, path)),
                    mape=_opt_float(item, "mape", path),
                    mape_excluded=_expect(item, "mape_excluded", int, path, default=0),
                    mae_w=_opt_float(item, "mae_w", path),
                    mape_w=_opt_float(item, "mape_w", path),
                    mape_w_excluded=_expect(item, "mape_w_excluded", int, path, default=0),
                    window_count=_expect(item, "window_count", int, path),
                    horizon=_expect(item, "horizon", int, path),
                    profile=tuple(None if x is None else float(x) for x in profile),
                    runtime_s=float(_expect(item, "runtime_s", float, path, default=0.0)),
                )
            )
        except MetricError as exc:
            if str(exc).startswith(path):
                raise
            raise MetricError(f"{path}: {exc}") from None
    return EvalReport(run_id=run_id, target=target, rows=tuple(rows))


def _opt_float(payload: dict, key: str, path: str) -> float | None:
    value = _expect(payload, key, (int, float, type(None)), path, default=None)
    return None if value is None else float(value)
