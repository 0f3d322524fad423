"""Lagged causal discovery: tau_max selection and PC_1 condition selection.

PC_1 keeps one conditioning set per candidate per iteration: the p strongest
other alive candidates by the smallest absolute partial correlation seen so
far. Kills take effect immediately within a pass; the rank order is frozen at
the start of each pass and re-sorted afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from causalift.dataset import TimeSeriesDataset, build_lagged_design
from causalift.graph import Link, TimeSeriesGraph
from causalift.stats import make_stationary, parcorr_pvalues

__all__ = [
    "DiscoveryError",
    "DiscoveryConfig",
    "CandidateState",
    "select_tau_max",
    "pc1_parents",
    "discover_graph",
]


class DiscoveryError(ValueError):
    """Raised for invalid discovery configuration or inputs."""


@dataclass(frozen=True)
class DiscoveryConfig:
    alpha: float = 0.01
    max_scan_lag: int = 24
    tau_max: int | None = None
    max_condition_size: int | None = None
    stationarity_threshold: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise DiscoveryError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.max_scan_lag < 1:
            raise DiscoveryError(f"max_scan_lag must be >= 1, got {self.max_scan_lag}")
        if self.tau_max is not None and self.tau_max < 1:
            raise DiscoveryError(f"tau_max must be >= 1, got {self.tau_max}")
        if self.max_condition_size is not None and self.max_condition_size < 0:
            raise DiscoveryError(
                f"max_condition_size must be >= 0, got {self.max_condition_size}"
            )
        if not 0.0 < self.stationarity_threshold < 1.0:
            raise DiscoveryError(
                f"stationarity_threshold must be in (0, 1), "
                f"got {self.stationarity_threshold}"
            )


@dataclass(frozen=True)
class CandidateState:
    """Outcome of the tests for one (source, lag) candidate parent."""

    source: str
    lag: int
    min_abs_stat: float
    last_stat: float
    last_p: float
    alive: bool


_DEGENERATE_NORM = 1e-13


def _column_norms_ok(arr: np.ndarray) -> np.ndarray:
    """Boolean mask of columns with non-degenerate variance."""
    centered = arr - arr.mean(axis=0, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->j", centered, centered))
    scale = math.sqrt(arr.shape[0]) * (1.0 + np.abs(arr).max(axis=0))
    return norms > _DEGENERATE_NORM * scale


def select_tau_max(ds: TimeSeriesDataset, max_scan_lag: int = 24) -> int:
    """Mean over ordered variable pairs of the lag with the largest |corr|.

    For every ordered pair (i, j) of non-constant columns, finds
    argmax over lag in 1..max_scan_lag of |corr(X^i_{t-lag}, X^j_t)|, then
    returns the arithmetic mean of those lags rounded half-up, clamped to
    at least 1. Ties inside a pair resolve to the smallest lag.
    """
    if max_scan_lag < 1:
        raise DiscoveryError(f"max_scan_lag must be >= 1, got {max_scan_lag}")
    V = len(ds.variables)
    if V < 2:
        raise DiscoveryError(f"need at least 2 variables, got {V}")
    T = ds.n_rows
    if T <= max_scan_lag + 2:
        raise DiscoveryError(
            f"need more than max_scan_lag + 2 = {max_scan_lag + 2} rows, got {T}"
        )
    usable = _column_norms_ok(ds.values)
    cols = [ds.values[:, j] for j in range(V)]
    argmaxes: list[int] = []
    for i in range(V):
        if not usable[i]:
            continue
        for j in range(V):
            if i == j or not usable[j]:
                continue
            best_lag, best_abs = 1, -1.0
            for lag in range(1, max_scan_lag + 1):
                x = cols[i][: T - lag]
                y = cols[j][lag:]
                xc = x - x.mean()
                yc = y - y.mean()
                nx = math.sqrt(float(xc @ xc))
                ny = math.sqrt(float(yc @ yc))
                if nx == 0.0 or ny == 0.0:
                    continue
                r = abs(float(xc @ yc) / (nx * ny))
                if r > best_abs:
                    best_abs, best_lag = r, lag
            argmaxes.append(best_lag)
    if not argmaxes:
        raise DiscoveryError("all variable pairs are degenerate (constant columns)")
    mean = sum(argmaxes) / len(argmaxes)
    return max(1, math.floor(mean + 0.5))


def _resolve_tau_max(ds: TimeSeriesDataset, cfg: DiscoveryConfig) -> tuple[int, str]:
    if cfg.tau_max is not None:
        return cfg.tau_max, "config-override"
    if len(ds.variables) < 2:
        # single column: nothing to scan; self-links at lag 1 remain testable
        return 1, "single-variable-fallback"
    return select_tau_max(ds, cfg.max_scan_lag), "scanned"


class _Projector:
    """Orthonormal basis of [1, Z] with exact-collinearity detection."""

    def __init__(self, Z: np.ndarray):
        n = Z.shape[0]
        A = np.column_stack([np.ones(n), Z])
        Q, R = np.linalg.qr(A)
        diag = np.abs(np.diag(R))
        tol = (diag.max() if diag.size else 0.0) * max(A.shape) * np.finfo(float).eps
        # positions after the intercept whose R diagonal collapsed
        self.dependent = [int(i) - 1 for i in np.nonzero(diag <= tol)[0] if i >= 1]
        self.Q = Q

    def residual(self, v: np.ndarray) -> np.ndarray:
        return v - self.Q @ (self.Q.T @ v)


def _corr_of_residuals(rx: np.ndarray, ry: np.ndarray, scale_x: float, scale_y: float):
    """Correlation of two residual vectors; None when either is degenerate."""
    nx = math.sqrt(float(rx @ rx))
    ny = math.sqrt(float(ry @ ry))
    n = rx.shape[0]
    if nx <= _DEGENERATE_NORM * math.sqrt(n) * (1.0 + scale_x):
        return None
    if ny <= _DEGENERATE_NORM * math.sqrt(n) * (1.0 + scale_y):
        return None
    r = float(rx @ ry) / (nx * ny)
    return min(1.0, max(-1.0, r))


def pc1_parents(
    ds: TimeSeriesDataset,
    target: str,
    cfg: DiscoveryConfig,
    audit: list | None = None,
) -> tuple[CandidateState, ...]:
    """PC_1 condition-selection for one target; alive states are the parents.

    The dataset must already be stationarity-transformed. Candidates are all
    (variable, lag) pairs for lag 1..tau_max including the target's own lags.
    Constant candidate columns are dead on arrival (p = 1). Collinear
    conditioning sets drop their lowest-ranked dependent condition and retry
    once; unresolved collisions leave the candidate untouched. Both outcomes
    are recorded in ``audit`` when a list is passed.
    """
    if target not in ds.names:
        raise DiscoveryError(f"unknown target {target!r}")
    tau_max, _ = _resolve_tau_max(ds, cfg)
    if ds.n_rows <= tau_max + 10:
        raise DiscoveryError(
            f"need more than tau_max + 10 = {tau_max + 10} rows, got {ds.n_rows}"
        )
    design = build_lagged_design(ds, target, tau_max)
    X, y = design.X, design.y
    n, m = X.shape
    columns = design.columns
    var_index = {name: i for i, name in enumerate(ds.names)}

    # pass 0: unconditional tests, vectorized
    Xc = X - X.mean(axis=0, keepdims=True)
    yc = y - y.mean()
    xnorm = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    ynorm = math.sqrt(float(yc @ yc))
    xscale = np.sqrt(n) * (1.0 + np.abs(X).max(axis=0))
    yok = ynorm > _DEGENERATE_NORM * math.sqrt(n) * (1.0 + float(np.abs(y).max()))
    ok = (xnorm > _DEGENERATE_NORM * xscale) & yok
    r0 = np.zeros(m)
    np.divide(Xc.T @ yc, xnorm * ynorm, out=r0, where=ok)
    np.clip(r0, -1.0, 1.0, out=r0)
    p0 = np.ones(m)
    p0[ok] = parcorr_pvalues(r0[ok], n, 0)

    alive = ok & (p0 <= cfg.alpha)
    min_abs = np.abs(r0)
    min_abs[~ok] = 0.0
    last_stat = r0.copy()
    last_p = p0.copy()

    def sort_key(j: int):
        src, lag = columns[j]
        return (-min_abs[j], var_index[src], lag)

    order = sorted(range(m), key=sort_key)

    p = 0
    while True:
        p += 1
        n_alive = int(alive.sum())
        if p >= n_alive - 1:
            break
        if cfg.max_condition_size is not None and p > cfg.max_condition_size:
            break
        snapshot = [j for j in order if alive[j]]
        proj: _Projector | None = None
        proj_conds: tuple[int, ...] = ()
        resid_y: np.ndarray | None = None
        for c in snapshot:
            if not alive[c]:
                continue
            others = [j for j in order if alive[j] and j != c][:p]
            if not others:
                continue
            conds = tuple(others)
            if proj is None or conds != proj_conds:
                proj = _Projector(X[:, conds])
                dropped = None
                if proj.dependent:
                    # collinear set: retry once without the lowest-ranked
                    # dependent condition
                    dropped = conds[max(proj.dependent)]
                    retry = tuple(j for j in conds if j != dropped)
                    proj = _Projector(X[:, retry])
                    if proj.dependent:
                        if audit is not None:
                            audit.append(
                                {
                                    "event": "collinearity-unresolved",
                                    "target": target,
                                    "candidate": list(columns[c]),
                                    "pass": p,
                                }
                            )
                        proj = None
                        continue
                    if audit is not None:
                        audit.append(
                            {
                                "event": "collinearity-retry",
                                "target": target,
                                "candidate": list(columns[c]),
                                "pass": p,
                                "dropped_condition": list(columns[dropped]),
                            }
                        )
                    conds = retry
                proj_conds = conds
                resid_y = proj.residual(y)
            k = len(proj_conds)
            rx = proj.residual(X[:, c])
            r = _corr_of_residuals(
                rx, resid_y, float(np.abs(X[:, c]).max()), float(np.abs(y).max())
            )
            if r is None:
                # candidate (or target) fully explained by the conditions
                alive[c] = False
                last_stat[c] = 0.0
                last_p[c] = 1.0
                continue
            pval = float(parcorr_pvalues(np.array([r]), n, k)[0])
            last_stat[c] = r
            last_p[c] = pval
            if pval > cfg.alpha:
                alive[c] = False
            else:
                min_abs[c] = min(min_abs[c], abs(r))
        order = sorted(range(m), key=sort_key)

    return tuple(
        CandidateState(
            source=columns[j][0],
            lag=columns[j][1],
            min_abs_stat=float(min_abs[j]),
            last_stat=float(last_stat[j]),
            last_p=float(last_p[j]),
            alive=bool(alive[j]),
        )
        for j in order
    )


def discover_graph(ds: TimeSeriesDataset, cfg: DiscoveryConfig) -> TimeSeriesGraph:
    """Full discovery: stationarity screen, tau_max, PC_1 per target.

    Links carry the signed partial correlation of each surviving candidate's
    final (largest conditioning set) test. The audit trail records the
    configuration, the stationarity report, the tau_max source, and any
    collinearity events.
    """
    work, report = make_stationary(ds, cfg.stationarity_threshold)
    tau_max, tau_source = _resolve_tau_max(work, cfg)
    audit: list[dict] = [
        {
            "event": "discovery-config",
            "alpha": cfg.alpha,
            "max_scan_lag": cfg.max_scan_lag,
            "tau_max": tau_max,
            "tau_max_source": tau_source,
            "max_condition_size": cfg.max_condition_size,
            "stationarity_threshold": cfg.stationarity_threshold,
        },
        {
            "event": "stationarity",
            "rows_dropped": report.rows_dropped,
            "columns": [
                {
                    "name": c.name,
                    "action": c.action,
                    "p_value": c.p_value,
                    "used_lag": c.used_lag,
                }
                for c in report.columns
            ],
        },
    ]
    resolved = replace(cfg, tau_max=tau_max)
    links: list[Link] = []
    for target in work.names:
        states = pc1_parents(work, target, resolved, audit=audit)
        for st in states:
            if st.alive:
                links.append(
                    Link(
                        source=st.source,
                        target=target,
                        lag=st.lag,
                        strength=st.last_stat,
                        provenance="discovered",
                    )
                )
    return TimeSeriesGraph(
        variables=work.names,
        tau_max=tau_max,
        alpha=cfg.alpha,
        links=tuple(links),
        audit=tuple(audit),
    )
