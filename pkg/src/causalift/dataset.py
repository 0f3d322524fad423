"""Immutable time series containers, lagged design matrices, splits, CSV I/O."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class DatasetError(ValueError):
    """Raised for malformed datasets, designs, or dataset files."""


class Variable(NamedTuple):
    name: str
    unit: str = ""


@dataclass(frozen=True)
class InterventionEvent:
    """A recorded setpoint change: at ``time_index`` the variable jumps to ``new_value``."""

    time_index: int
    variable: str
    new_value: float


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """A fixed-step multivariate series with optional intervention log.

    Values are stored as a read-only float64 array of shape (T, V). Missing or
    non-finite entries are rejected at construction; downstream code never has
    to guard against NaN.
    """

    values: np.ndarray
    variables: tuple[Variable, ...]
    step_minutes: int = 60
    interventions: tuple[InterventionEvent, ...] = ()
    seed: int | None = None

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 2:
            raise DatasetError(f"values must be 2-D (rows, variables), got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise DatasetError("dataset needs at least one row")
        variables = tuple(Variable(*v) for v in self.variables)
        if arr.shape[1] != len(variables):
            raise DatasetError(
                f"{len(variables)} variables declared but values have {arr.shape[1]} columns"
            )
        names = [v.name for v in variables]
        if len(set(names)) != len(names):
            raise DatasetError(f"duplicate variable names: {sorted(names)}")
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            r, c = bad[0]
            raise DatasetError(
                f"non-finite value at row {r}, column {names[c]!r}; missing values are not allowed"
            )
        if self.step_minutes <= 0:
            raise DatasetError(f"step_minutes must be positive, got {self.step_minutes}")
        for ev in self.interventions:
            if ev.variable not in names:
                raise DatasetError(f"intervention targets unknown variable {ev.variable!r}")
            if not 0 <= ev.time_index < arr.shape[0]:
                raise DatasetError(
                    f"intervention time_index {ev.time_index} outside [0, {arr.shape[0]})"
                )
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "interventions", tuple(self.interventions))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def column(self, name: str) -> np.ndarray:
        try:
            idx = self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown variable {name!r}; have {list(self.names)}") from None
        return self.values[:, idx]


@dataclass(frozen=True, eq=False)
class LaggedDesign:
    """A supervised view of a dataset: rows are time steps, columns are (variable, lag) pairs.

    Row r predicts ``y[r]`` = target at time ``row_time_index[r]`` from values
    strictly in the past. ``role`` tags where the design came from ("train" or
    "test"); feature selectors and tuners refuse test-tagged designs.
    """

    target: str
    tau_max: int
    columns: tuple[tuple[str, int], ...]
    X: np.ndarray
    y: np.ndarray
    row_time_index: np.ndarray
    role: str | None = None

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def n_columns(self) -> int:
        return self.X.shape[1]

    def with_columns(self, columns: Sequence[tuple[str, int]]) -> "LaggedDesign":
        """Restrict to a subset of columns, keeping the given order."""
        index = {col: j for j, col in enumerate(self.columns)}
        try:
            sel = [index[tuple(c)] for c in columns]
        except KeyError as exc:
            raise DatasetError(f"column {exc.args[0]!r} not present in design") from None
        return LaggedDesign(
            target=self.target,
            tau_max=self.tau_max,
            columns=tuple((str(v), int(l)) for v, l in columns),
            X=self.X[:, sel],
            y=self.y,
            row_time_index=self.row_time_index,
            role=self.role,
        )


def full_lag_columns(names: Sequence[str], tau_max: int) -> tuple[tuple[str, int], ...]:
    """Canonical column order: variable-major (dataset order), lag ascending."""
    return tuple((name, lag) for name in names for lag in range(1, tau_max + 1))


def build_lagged_design(
    ds: TimeSeriesDataset,
    target: str,
    tau_max: int,
    columns: Sequence[tuple[str, int]] | None = None,
    role: str | None = None,
) -> LaggedDesign:
    """Materialize the lagged regression problem for ``target``.

    Parameters
    ----------
    ds : TimeSeriesDataset
    target : str
        Variable to predict (its own lags are legal features).
    tau_max : int
        Largest lag included; rows start at time tau_max so every lag exists.
    columns : sequence of (variable, lag), optional
        Feature subset. Defaults to every variable at every lag 1..tau_max in
        canonical order. Duplicates or out-of-range lags are rejected.
    role : str, optional
        "train"/"test" tag carried through to selectors.
    """
    if target not in ds.names:
        raise DatasetError(f"unknown target {target!r}; have {list(ds.names)}")
    if tau_max < 1:
        raise DatasetError(f"tau_max must be >= 1, got {tau_max}")
    if tau_max >= ds.n_rows:
        raise DatasetError(f"tau_max {tau_max} leaves no rows (T = {ds.n_rows})")
    if columns is None:
        cols = full_lag_columns(ds.names, tau_max)
    else:
        cols = tuple((str(v), int(l)) for v, l in columns)
        seen: set[tuple[str, int]] = set()
        for var, lag in cols:
            if var not in ds.names:
                raise DatasetError(f"design column references unknown variable {var!r}")
            if not 1 <= lag <= tau_max:
                raise DatasetError(f"lag {lag} for {var!r} outside 1..{tau_max}")
            if (var, lag) in seen:
                raise DatasetError(f"duplicate design column ({var!r}, {lag})")
            seen.add((var, lag))
    t0 = tau_max
    n = ds.n_rows - tau_max
    name_idx = {name: j for j, name in enumerate(ds.names)}
    X = np.empty((n, len(cols)), dtype=np.float64)
    for j, (var, lag) in enumerate(cols):
        X[:, j] = ds.values[t0 - lag : ds.n_rows - lag, name_idx[var]]
    y = ds.values[t0:, name_idx[target]].copy()
    rows = np.arange(t0, ds.n_rows, dtype=np.int64)
    return LaggedDesign(
        target=target, tau_max=tau_max, columns=cols, X=X, y=y, row_time_index=rows, role=role
    )


def temporal_split(
    ds: TimeSeriesDataset, fraction: float
) -> tuple[TimeSeriesDataset, TimeSeriesDataset]:
    """Split into past/future halves at floor(T * fraction), never shuffling.

    Interventions are routed to the half containing them; events in the second
    half are re-based so their time_index is relative to that half's first row.
    """
    if not 0.0 < fraction < 1.0:
        raise DatasetError(f"fraction must be in (0, 1), got {fraction}")
    cut = math.floor(ds.n_rows * fraction)
    if cut < 1 or cut >= ds.n_rows:
        raise DatasetError(
            f"fraction {fraction} makes an empty half (T = {ds.n_rows}, cut = {cut})"
        )
    first = [ev for ev in ds.interventions if ev.time_index < cut]
    second = [
        InterventionEvent(ev.time_index - cut, ev.variable, ev.new_value)
        for ev in ds.interventions
        if ev.time_index >= cut
    ]
    train = TimeSeriesDataset(
        values=ds.values[:cut],
        variables=ds.variables,
        step_minutes=ds.step_minutes,
        interventions=tuple(first),
        seed=ds.seed,
    )
    test = TimeSeriesDataset(
        values=ds.values[cut:],
        variables=ds.variables,
        step_minutes=ds.step_minutes,
        interventions=tuple(second),
        seed=ds.seed,
    )
    return train, test


# CSV + sidecar I/O. The sidecar keeps everything the CSV cannot express.


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def format_float(x: float) -> str:
    """Shortest text that round-trips the exact double (up to 17 significant digits)."""
    return f"{x:.17g}"


def write_csv(ds: TimeSeriesDataset, path: str | Path) -> Path:
    """Write values as CSV and metadata (units, step, seed, interventions) as a sidecar.

    Returns the sidecar path. Reading the pair back reconstructs the dataset
    bit-for-bit.
    """
    path = Path(path)
    lines = [",".join(ds.names)]
    for row in ds.values:
        lines.append(",".join(format_float(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    meta = {
        "step": ds.step_minutes,
        "units": {v.name: v.unit for v in ds.variables},
        "seed": ds.seed,
        "interventions": [
            {"time_index": ev.time_index, "variable": ev.variable, "new_value": ev.new_value}
            for ev in ds.interventions
        ],
    }
    meta_path = _meta_path(path)
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return meta_path


def read_csv(path: str | Path) -> TimeSeriesDataset:
    """Read a CSV written by :func:`write_csv`; the sidecar is optional.

    Without a sidecar the dataset gets empty units, a 60-minute step, and no
    intervention log. Malformed rows, missing cells, and duplicate headers
    raise with row/column context.
    """
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.split("\n") if ln != ""]
    if not lines:
        raise DatasetError(f"{path}: empty file")
    header = lines[0].split(",")
    names = [h.strip() for h in header]
    if any(not n for n in names):
        raise DatasetError(f"{path}: empty column name in header")
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DatasetError(f"{path}: duplicate header columns {dupes}")
    rows = np.empty((len(lines) - 1, len(names)), dtype=np.float64)
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(names):
            raise DatasetError(
                f"{path}: row {i} has {len(cells)} cells, expected {len(names)}"
            )
        for j, cell in enumerate(cells):
            cell = cell.strip()
            if cell == "":
                raise DatasetError(f"{path}: row {i} column {names[j]!r} is empty")
            try:
                rows[i - 2, j] = float(cell)
            except ValueError:
                raise DatasetError(
                    f"{path}: row {i} column {names[j]!r}: not a number: {cell!r}"
                ) from None
    meta_path = _meta_path(path)
    step, seed = 60, None
    units: dict[str, str] = {}
    interventions: list[InterventionEvent] = []
    if meta_path.exists():
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{meta_path}: invalid JSON: {exc}") from None
        step = int(meta.get("step", 60))
        seed = meta.get("seed")
        units = dict(meta.get("units", {}))
        for k, ev in enumerate(meta.get("interventions", [])):
            try:
                interventions.append(
                    InterventionEvent(
                        int(ev["time_index"]), str(ev["variable"]), float(ev["new_value"])
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{meta_path}: interventions[{k}]: {exc}") from None
    variables = tuple(Variable(n, units.get(n, "")) for n in names)
    return TimeSeriesDataset(
        values=rows,
        variables=variables,
        step_minutes=step,
        interventions=tuple(interventions),
        seed=seed,
    )
