"""Correlation and stationarity primitives used by discovery.

All hypothesis tests here are linear-Gaussian: partial correlation via double
residualization with a Student-t significance test, and an augmented
Dickey-Fuller regression with a response-surface p-value approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from causalift.dataset import InterventionEvent, TimeSeriesDataset


class DegenerateInputError(ValueError):
    """Input has (near-)zero variance or is otherwise unusable for a test."""


class CollinearityError(ValueError):
    """Conditioning matrix is rank deficient.

    ``offending`` holds indices of conditioning columns implicated by pivoted
    QR (the ones a caller should consider dropping).
    """

    def __init__(self, message: str, offending: list[int]):
        super().__init__(message)
        self.offending = offending


@dataclass(frozen=True)
class CiResult:
    """Outcome of a (partial) correlation significance test."""

    statistic: float
    t_stat: float
    p_value: float
    n: int
    k: int

    def __post_init__(self) -> None:
        if self.n <= self.k + 2:
            raise DegenerateInputError(
                f"test needs n > k + 2 samples, got n = {self.n}, k = {self.k}"
            )
        if not -1.0 <= self.statistic <= 1.0:
            raise ValueError(f"correlation out of [-1, 1]: {self.statistic}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value out of [0, 1]: {self.p_value}")


@dataclass(frozen=True)
class AdfResult:
    """Unit-root test outcome; p_value < threshold means 'stationary'."""

    statistic: float
    p_value: float
    used_lag: int
    n_obs: int


def _check_finite(name: str, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DegenerateInputError(f"{name} contains non-finite values")
    return x


def _centered_norm(x: np.ndarray) -> tuple[np.ndarray, float]:
    c = x - x.mean()
    return c, float(np.sqrt(c @ c))


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation; raises on length mismatch or degenerate variance."""
    x = _check_finite("x", x)
    y = _check_finite("y", y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < 3:
        raise DegenerateInputError(f"need at least 3 samples, got {x.shape[0]}")
    cx, nx = _centered_norm(x)
    cy, ny = _centered_norm(y)
    # Near-zero variance relative to magnitude counts as degenerate.
    for label, norm, arr in (("x", nx, x), ("y", ny, y)):
        if norm <= 1e-13 * math.sqrt(len(arr)) * (1.0 + float(np.abs(arr).max())):
            raise DegenerateInputError(f"{label} has (near-)zero variance")
    r = float(cx @ cy / (nx * ny))
    return min(1.0, max(-1.0, r))


def _residualize(cols: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Residuals of each column of ``cols`` after OLS on [intercept, Z]."""
    n = cols.shape[0]
    A = np.column_stack([np.ones(n), Z]) if Z.size else np.ones((n, 1))
    k = A.shape[1]
    beta, _, rank, _ = np.linalg.lstsq(A, cols, rcond=None)
    if rank < k:
        # Pivoted QR attributes the deficiency to specific conditioning columns.
        from scipy.linalg import qr

        _, R, piv = qr(A, mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = diag.max() * max(A.shape) * np.finfo(float).eps if diag.size else 0.0
        bad = [int(piv[i]) - 1 for i in range(len(diag)) if diag[i] <= tol and piv[i] != 0]
        raise CollinearityError(
            f"conditioning set is rank deficient (rank {rank} < {k})", offending=bad
        )
    return cols - A @ beta


def partial_corr(x: np.ndarray, y: np.ndarray, Z: np.ndarray | None = None) -> float:
    """Correlation of x and y after removing the linear effect of Z from both.

    Z is an (n, k) matrix; k = 0 reduces exactly to :func:`pearson`. Raises
    CollinearityError when [1, Z] is rank deficient, DegenerateInputError when
    a residual has no variance left.
    """
    x = _check_finite("x", x)
    y = _check_finite("y", y)
    if Z is None:
        Z = np.empty((x.shape[0], 0))
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    if not np.all(np.isfinite(Z)):
        raise DegenerateInputError("Z contains non-finite values")
    if Z.shape[0] != x.shape[0] or y.shape[0] != x.shape[0]:
        raise ValueError("x, y, Z row counts differ")
    if Z.shape[1] == 0:
        return pearson(x, y)
    res = _residualize(np.column_stack([x, y]), Z)
    return pearson(res[:, 0], res[:, 1])


def t_two_sided_p(t: float, df: int) -> float:
    """P(|T_df| >= |t|) via the regularized incomplete beta function."""
    if df <= 0:
        raise ValueError(f"degrees of freedom must be positive, got {df}")
    if math.isinf(t):
        return 0.0
    t2 = t * t
    return float(betainc(df / 2.0, 0.5, df / (df + t2)))


def parcorr_pvalues(r: np.ndarray, n: int, k: int) -> np.ndarray:
    """Two-sided p-values for an array of partial correlations at once.

    Same statistic as :func:`parcorr_test`: t = r * sqrt(df / (1 - r^2)) with
    df = n - 2 - k; |r| = 1 maps to p = 0.
    """
    if n <= k + 2:
        raise DegenerateInputError(f"test needs n > k + 2 samples, got n = {n}, k = {k}")
    r = np.asarray(r, dtype=np.float64)
    df = n - 2 - k
    denom = 1.0 - r * r
    p = np.zeros_like(r)
    ok = denom > 0.0
    t2 = np.zeros_like(r)
    t2[ok] = r[ok] * r[ok] * df / denom[ok]
    p[ok] = betainc(df / 2.0, 0.5, df / (df + t2[ok]))
    return p


def parcorr_test(x: np.ndarray, y: np.ndarray, Z: np.ndarray | None = None) -> CiResult:
    """Partial-correlation significance test.

    t = r * sqrt((n - 2 - k) / (1 - r^2)), two-sided p from Student-t with
    n - 2 - k degrees of freedom. |r| -> 1 yields p = 0 without overflow.
    """
    k = 0
    if Z is not None:
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim == 1:
            Z = Z[:, None]
        k = Z.shape[1]
    n = np.asarray(x).shape[0]
    if n <= k + 2:
        raise DegenerateInputError(f"test needs n > k + 2 samples, got n = {n}, k = {k}")
    r = partial_corr(x, y, Z)
    df = n - 2 - k
    denom = 1.0 - r * r
    t = math.inf * np.sign(r) if denom <= 0.0 else r * math.sqrt(df / denom)
    p = t_two_sided_p(t, df)
    return CiResult(statistic=r, t_stat=float(t), p_value=p, n=n, k=k)


def difference(series: np.ndarray) -> np.ndarray:
    """First difference; output length n - 1, float64."""
    series = _check_finite("series", series)
    if series.shape[0] < 2:
        raise DegenerateInputError("need at least 2 samples to difference")
    return np.diff(series)


# ADF p-values use a response-surface approximation for the constant-only
# regression: p = Phi(polynomial(stat)), with separate polynomials for the
# small-p and large-p regions and hard cutoffs at the table edges.
_ADF_TAU_STAR = -1.61
_ADF_TAU_MIN = -18.83
_ADF_TAU_MAX = 2.74
_ADF_SMALLP = (2.1659, 1.4412, 0.038269)
_ADF_LARGEP = (1.7339, 0.93202, -0.12745, -0.010368)


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _adf_pvalue(stat: float) -> float:
    if stat <= _ADF_TAU_MIN:
        return 0.0
    if stat >= _ADF_TAU_MAX:
        return 1.0
    coefs = _ADF_SMALLP if stat <= _ADF_TAU_STAR else _ADF_LARGEP
    z = sum(c * stat**i for i, c in enumerate(coefs))
    return _norm_cdf(z)


def default_adf_max_lag(n: int) -> int:
    """Schwert-style rule: floor(12 * (n/100)^(1/4))."""
    return int(math.floor(12.0 * (n / 100.0) ** 0.25))


def adf_test(series: np.ndarray, max_lag: int | None = None) -> AdfResult:
    """Augmented Dickey-Fuller test with constant, no trend.

    Regresses dy_t on [1, y_{t-1}, dy_{t-1}..dy_{t-p}] with p chosen by AIC up
    to ``max_lag`` (default floor(12 * (n/100)^(1/4))). The statistic is the
    t-ratio of the y_{t-1} coefficient; small (very negative) values reject
    the unit root. The AIC search scores every lag order on a common sample,
    then the chosen order is refit on the longest usable sample.
    """
    y = _check_finite("series", series)
    n = y.shape[0]
    if n < 10:
        raise DegenerateInputError(f"series too short for ADF: n = {n}")
    cy, norm = _centered_norm(y)
    if norm <= 1e-13 * math.sqrt(n) * (1.0 + float(np.abs(y).max())):
        raise DegenerateInputError("constant series has no unit-root behavior to test")
    dy = np.diff(y)
    if max_lag is None:
        max_lag = default_adf_max_lag(n)
    # Keep enough rows to estimate the widest model.
    max_lag = max(0, min(max_lag, (n - 1) // 2 - 2))

    def build(p: int, common: bool) -> tuple[np.ndarray, np.ndarray]:
        start = max_lag if common else p
        rows = np.arange(start, dy.shape[0])
        cols = [np.ones(rows.shape[0]), y[rows]]
        for i in range(1, p + 1):
            cols.append(dy[rows - i])
        return np.column_stack(cols), dy[rows]

    # One QR of the widest design scores all nested lag orders at once:
    # columns are ordered [1, y_{t-1}, dy lags], so leading-k spans are nested.
    X_full, target = build(max_lag, common=True)
    n_eff = target.shape[0]
    if n_eff <= max_lag + 3:
        max_lag = 0
        X_full, target = build(0, common=True)
        n_eff = target.shape[0]
    Q, _ = np.linalg.qr(X_full)
    qty = Q.T @ target
    yy = float(target @ target)
    ssr_prefix = yy - np.cumsum(qty**2)
    best_p, best_aic = 0, math.inf
    for p in range(0, max_lag + 1):
        k = p + 2
        ssr = max(float(ssr_prefix[k - 1]), 1e-300)
        aic = n_eff * math.log(ssr / n_eff) + 2 * k
        if aic < best_aic - 1e-12:
            best_aic, best_p = aic, p
    X, t_vec = build(best_p, common=False)
    n_fit, k_fit = X.shape
    beta, _, rank, _ = np.linalg.lstsq(X, t_vec, rcond=None)
    if rank < k_fit:
        raise DegenerateInputError("ADF regression is rank deficient")
    resid = t_vec - X @ beta
    sigma2 = float(resid @ resid) / (n_fit - k_fit)
    xtx_inv = np.linalg.inv(X.T @ X)
    se_gamma = math.sqrt(max(sigma2 * xtx_inv[1, 1], 0.0))
    if se_gamma == 0.0:
        raise DegenerateInputError("ADF regression has zero residual variance")
    stat = float(beta[1] / se_gamma)
    return AdfResult(
        statistic=stat, p_value=_adf_pvalue(stat), used_lag=best_p, n_obs=n_fit
    )


@dataclass(frozen=True)
class ColumnStationarity:
    name: str
    # "none" | "differenced" | "constant-skipped" | "step-skipped"
    # | "regime-adjusted" (kept raw: stationary around held-setpoint shifts)
    action: str
    p_value: float | None
    used_lag: int | None


@dataclass(frozen=True)
class StationarityReport:
    columns: tuple[ColumnStationarity, ...]
    threshold: float
    rows_dropped: int

    @property
    def differenced(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.action == "differenced")

    @property
    def skipped(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.action.endswith("-skipped"))

    @property
    def regime_adjusted(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.action == "regime-adjusted")


# Fraction of rows allowed to move for a column to count as a held setpoint.
STEP_COLUMN_MOVE_FRACTION = 0.05

# Critical value for the ADF statistic after regressing a column on held
# setpoint columns. Removing fitted break levels shifts the unit-root null
# distribution left of the plain Dickey-Fuller criticals, so the retest must
# clear a far stricter bar than the threshold's. True random walks stay above
# roughly -4.5 even after adjustment; series that are stationary around the
# regime shifts land far below.
REGIME_ADJUSTED_CRITICAL = -6.0


def _is_step_like(col: np.ndarray) -> bool:
    """True for piecewise-constant columns: rare moves, flat plateaus between.

    Such columns (setpoints, operating modes) carry no stochastic trend, so a
    unit-root test on them is uninformative; differencing would replace a
    bounded column with a sparse impulse train.
    """
    moves = np.diff(col) != 0.0
    return bool(moves.mean() <= STEP_COLUMN_MOVE_FRACTION)


def make_stationary(
    ds: TimeSeriesDataset, threshold: float = 0.01, max_lag: int | None = None
) -> tuple[TimeSeriesDataset, StationarityReport]:
    """Difference columns whose ADF p-value is >= threshold; at most one pass.

    Constant and piecewise-constant (setpoint-plateau) columns are left
    untouched and reported. A column that fails the plain unit-root test is
    still kept raw when it is stationary around the held setpoint columns'
    regime shifts: it is regressed on the step-like columns and the residual
    re-tested (a true random walk fails both tests). If any column was
    differenced, the first row of ALL columns is dropped so the result stays
    aligned; intervention times shift accordingly (an event at the dropped
    row is discarded). Differencing is never applied twice.
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    values = ds.values
    names = ds.names
    constant = np.zeros(len(names), dtype=bool)
    step_like = np.zeros(len(names), dtype=bool)
    for j in range(len(names)):
        col = values[:, j]
        if float(np.ptp(col)) <= 1e-12 * (1.0 + float(np.abs(col).max())):
            constant[j] = True
        elif _is_step_like(col):
            step_like[j] = True
    step_basis = values[:, step_like] if step_like.any() else None

    entries: list[ColumnStationarity] = []
    to_diff: list[int] = []
    for j, name in enumerate(names):
        col = values[:, j]
        if constant[j]:
            entries.append(ColumnStationarity(name, "constant-skipped", None, None))
            continue
        if step_like[j]:
            entries.append(ColumnStationarity(name, "step-skipped", None, None))
            continue
        res = adf_test(col, max_lag=max_lag)
        if res.p_value < threshold:
            entries.append(ColumnStationarity(name, "none", res.p_value, res.used_lag))
            continue
        if step_basis is not None:
            try:
                resid = _residualize(col, step_basis)
                adj = adf_test(resid, max_lag=max_lag)
            except (CollinearityError, DegenerateInputError):
                adj = None
            if adj is not None and adj.statistic <= REGIME_ADJUSTED_CRITICAL:
                entries.append(
                    ColumnStationarity(name, "regime-adjusted", adj.p_value, adj.used_lag)
                )
                continue
        entries.append(ColumnStationarity(name, "differenced", res.p_value, res.used_lag))
        to_diff.append(j)
    if not to_diff:
        report = StationarityReport(tuple(entries), threshold, rows_dropped=0)
        return ds, report
    out = ds.values[1:].copy()
    for j in to_diff:
        out[:, j] = np.diff(ds.values[:, j])
    events = [
        InterventionEvent(ev.time_index - 1, ev.variable, ev.new_value)
        for ev in ds.interventions
        if ev.time_index >= 1
    ]
    new_ds = TimeSeriesDataset(
        values=out,
        variables=ds.variables,
        step_minutes=ds.step_minutes,
        interventions=tuple(events),
        seed=ds.seed,
    )
    return new_ds, StationarityReport(tuple(entries), threshold, rows_dropped=1)
