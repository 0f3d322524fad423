"""Structural causal model simulator with a known lagged ground-truth graph.

The default model is an hourly data-center room: outdoor weather, an IT load
riding a diurnal cycle, a cooling setpoint changed occasionally by an
exogenous policy, and room temperature / energy equations. Every cross-variable
dependency has lag >= 1, so the truth graph is a lagged DAG by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from causalift.dataset import InterventionEvent, TimeSeriesDataset, Variable, write_csv
from causalift.graph import Link, TimeSeriesGraph
from causalift.jsonutil import expect

STEPS_PER_YEAR = 8760


class ScmSpecError(ValueError):
    """Raised for inconsistent simulator specifications."""


class InstabilityError(RuntimeError):
    """Simulation produced a non-finite or runaway value."""


@dataclass(frozen=True)
class LinearTerm:
    source: str
    lag: int
    coef: float


@dataclass(frozen=True)
class RectifiedGap:
    """coef * max(0, plus_source[t - plus_lag] - minus_source[t - minus_lag])."""

    plus_source: str
    plus_lag: int
    minus_source: str
    minus_lag: int
    coef: float


@dataclass(frozen=True)
class SineDriver:
    """Deterministic forcing amplitude * sin(2*pi*t/period + phase)."""

    amplitude: float
    period: float
    phase: float = 0.0


@dataclass(frozen=True)
class Equation:
    """One structural assignment.

    kind "linear": intercept + linear terms + rectified gaps + sine drivers
    + noise_std * eps. kind "policy": piecewise-constant value held by the
    exogenous intervention schedule; holding the previous value between
    events is a lag-1 self-dependence, so policy equations contribute a
    self-link.
    """

    target: str
    kind: str = "linear"
    intercept: float = 0.0
    terms: tuple[LinearTerm, ...] = ()
    gaps: tuple[RectifiedGap, ...] = ()
    drivers: tuple[SineDriver, ...] = ()
    noise_std: float = 0.0
    initial: float = 0.0

    def lagged_dependencies(self) -> list[tuple[str, int, float | None]]:
        """(source, lag, coefficient) pairs implied by this equation."""
        deps: dict[tuple[str, int], float | None] = {}
        if self.kind == "policy":
            return [(self.target, 1, None)]
        for term in self.terms:
            if term.coef == 0.0:
                continue
            key = (term.source, term.lag)
            # repeated (source, lag) means no single coefficient describes it
            deps[key] = term.coef if key not in deps else None
        for gap in self.gaps:
            if gap.coef != 0.0:
                deps[(gap.plus_source, gap.plus_lag)] = None
                deps[(gap.minus_source, gap.minus_lag)] = None
        return [(src, lag, coef) for (src, lag), coef in deps.items()]


@dataclass(frozen=True)
class InterventionPolicy:
    """Exogenous setpoint schedule: occasional uniform redraws with min spacing."""

    variable: str = "Cool_set"
    changes_per_year: float = 8.0
    low: float = 18.0
    high: float = 27.0
    min_spacing: int = 240


@dataclass(frozen=True)
class GroundTruth:
    links: tuple[Link, ...]
    equations: tuple[Equation, ...]
    notes: str = ""

    def link_keys(self) -> set[tuple[str, str, int]]:
        return {l.key for l in self.links}


@dataclass(frozen=True)
class ScmSpec:
    variables: tuple[Variable, ...]
    equations: tuple[Equation, ...]
    policy: InterventionPolicy
    horizon_steps: int = 2 * STEPS_PER_YEAR
    burn_in: int = 100
    step_minutes: int = 60
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", tuple(Variable(*v) for v in self.variables))
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ScmSpecError(f"duplicate variable names: {names}")
        eq_targets = [eq.target for eq in self.equations]
        if sorted(eq_targets) != sorted(names):
            raise ScmSpecError(
                f"equations must cover every variable exactly once; "
                f"variables {sorted(names)}, equations {sorted(eq_targets)}"
            )
        for eq in self.equations:
            if eq.kind not in ("linear", "policy"):
                raise ScmSpecError(f"{eq.target}: unknown equation kind {eq.kind!r}")
            if eq.noise_std < 0:
                raise ScmSpecError(f"{eq.target}: negative noise_std")
            for src, lag, _ in eq.lagged_dependencies():
                if src not in names:
                    raise ScmSpecError(f"{eq.target}: term references unknown {src!r}")
                if lag < 1:
                    raise ScmSpecError(
                        f"{eq.target}: lag {lag} on {src!r}; every dependency needs lag >= 1"
                    )
        if self.policy.variable not in names:
            raise ScmSpecError(f"policy variable {self.policy.variable!r} not declared")
        policy_eq = next(eq for eq in self.equations if eq.target == self.policy.variable)
        if policy_eq.kind != "policy":
            raise ScmSpecError(
                f"policy variable {self.policy.variable!r} needs a 'policy' equation"
            )
        if self.policy.low >= self.policy.high:
            raise ScmSpecError("policy range is empty")
        if self.policy.min_spacing < 1:
            raise ScmSpecError("policy min_spacing must be >= 1")
        slowest = self.max_lag
        if self.horizon_steps < 10 * max(slowest, 1):
            raise ScmSpecError(
                f"horizon_steps {self.horizon_steps} too short for max lag {slowest}"
            )
        if self.burn_in < 0:
            raise ScmSpecError("burn_in must be >= 0")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def max_lag(self) -> int:
        lags = [lag for eq in self.equations for _, lag, _ in eq.lagged_dependencies()]
        return max(lags, default=1)

    def equation_for(self, name: str) -> Equation:
        for eq in self.equations:
            if eq.target == name:
                return eq
        raise ScmSpecError(f"no equation for {name!r}")


def truth_links(spec: ScmSpec) -> tuple[Link, ...]:
    """Links generated from the equations; never hand-maintained."""
    links = []
    for eq in spec.equations:
        for src, lag, coef in eq.lagged_dependencies():
            links.append(Link(src, eq.target, lag, strength=coef, provenance="truth"))
    return tuple(links)


def ground_truth(spec: ScmSpec, notes: str = "") -> GroundTruth:
    return GroundTruth(links=truth_links(spec), equations=spec.equations, notes=notes)


def truth_graph(spec: ScmSpec, alpha: float = 0.01) -> TimeSeriesGraph:
    links = truth_links(spec)
    tau = max((l.lag for l in links), default=1)
    return TimeSeriesGraph(
        variables=spec.names,
        tau_max=tau,
        alpha=alpha,
        links=links,
        audit=({"event": "ground-truth", "source": "structural equations"},),
    )


_OVERFLOW_LIMIT = 1e9


def _draw_schedule(
    spec: ScmSpec, rng: np.random.Generator, total_steps: int
) -> tuple[np.ndarray, list[InterventionEvent]]:
    pol = spec.policy
    sched = np.empty(total_steps)
    current = rng.uniform(pol.low, pol.high)
    mean_gap = STEPS_PER_YEAR / pol.changes_per_year
    scale = max(mean_gap - pol.min_spacing, 1.0)
    events: list[InterventionEvent] = []
    t = spec.burn_in + pol.min_spacing + rng.exponential(scale)
    change_times: list[int] = []
    while t < total_steps:
        change_times.append(int(t))
        t += pol.min_spacing + rng.exponential(scale)
    values = [rng.uniform(pol.low, pol.high) for _ in change_times]
    pos = 0
    for step, value in zip(change_times, values):
        sched[pos:step] = current
        current = value
        pos = step
        events.append(InterventionEvent(step - spec.burn_in, pol.variable, value))
    sched[pos:] = current
    return sched, events


def simulate(spec: ScmSpec, seed: int | None = None) -> tuple[TimeSeriesDataset, GroundTruth]:
    """Run the SCM; returns the post-burn-in dataset and the ground truth.

    Deterministic given (spec, seed); seed defaults to spec.seed. The first
    ``burn_in`` steps are discarded, so intervention time indices refer to the
    returned dataset's clock. Non-finite or runaway values raise
    InstabilityError naming the variable and step.
    """
    if seed is None:
        seed = spec.seed
    rng = np.random.default_rng(seed)
    names = spec.names
    idx = {n: j for j, n in enumerate(names)}
    total = spec.burn_in + spec.horizon_steps
    sched, events = _draw_schedule(spec, rng, total)
    noise = rng.standard_normal((total, len(names)))

    # Precompute the exogenous part of each linear equation (intercept, sine
    # drivers, scaled noise); the time loop then only accumulates lagged terms.
    base = np.zeros((total, len(names)))
    tgrid = np.arange(total, dtype=np.float64)
    compiled: list[tuple] = []
    for j, name in enumerate(names):
        eq = spec.equation_for(name)
        if eq.kind == "linear":
            col = np.full(total, eq.intercept)
            for drv in eq.drivers:
                col += drv.amplitude * np.sin(2.0 * math.pi * tgrid / drv.period + drv.phase)
            col += eq.noise_std * noise[:, j]
            base[:, j] = col
            terms = [(idx[t.source], t.lag, t.coef) for t in eq.terms]
            gaps = [
                (idx[g.plus_source], g.plus_lag, idx[g.minus_source], g.minus_lag, g.coef)
                for g in eq.gaps
            ]
            compiled.append(("linear", j, eq, terms, gaps))
        else:
            compiled.append(("policy", j, eq, None, None))

    cols: list[list[float]] = [[0.0] * total for _ in names]
    init = [spec.equation_for(n).initial for n in names]
    isfinite = math.isfinite
    for t in range(total):
        for kind, j, eq, terms, gaps in compiled:
            if kind == "policy":
                v = float(sched[t])
            else:
                v = base[t, j]
                for si, lag, coef in terms:
                    tt = t - lag
                    v += coef * (cols[si][tt] if tt >= 0 else init[si])
                for pi, plag, mi, mlag, coef in gaps:
                    tp, tm = t - plag, t - mlag
                    gap = (cols[pi][tp] if tp >= 0 else init[pi]) - (
                        cols[mi][tm] if tm >= 0 else init[mi]
                    )
                    if gap > 0.0:
                        v += coef * gap
            if not isfinite(v) or abs(v) > _OVERFLOW_LIMIT:
                raise InstabilityError(
                    f"simulation diverged: variable {names[j]!r} at step {t} "
                    f"(value {v!r}); check equation coefficients"
                )
            cols[j][t] = v

    values = np.array(cols).T[spec.burn_in :]
    ds = TimeSeriesDataset(
        values=values,
        variables=spec.variables,
        step_minutes=spec.step_minutes,
        interventions=tuple(events),
        seed=seed,
    )
    return ds, ground_truth(spec)


def run_batch(
    spec: ScmSpec, n_runs: int, out_dir: str | Path | None = None
) -> tuple[list[TimeSeriesDataset], GroundTruth]:
    """Simulate n_runs datasets; run i uses seed spec.seed + i.

    All runs share the same mechanism and truth graph; schedules and noise
    differ. With ``out_dir`` set, writes run00.csv, run00.meta.json, ... and
    truth_graph.json there.
    """
    if n_runs < 1:
        raise ScmSpecError(f"n_runs must be >= 1, got {n_runs}")
    datasets = []
    truth = ground_truth(spec)
    for i in range(n_runs):
        ds, _ = simulate(spec, seed=spec.seed + i)
        datasets.append(ds)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for i, ds in enumerate(datasets):
            write_csv(ds, out / f"run{i:02d}.csv")
        from causalift.graph import to_json

        (out / "truth_graph.json").write_text(to_json(truth_graph(spec)))
    return datasets, truth


DEFAULT_MODEL_NOTES = (
    "Hourly data-center room model. A stochastic diurnal cycle drives the IT "
    "load and an outdoor-temperature component; outdoor humidity tracks "
    "outdoor temperature inversely; return-air temperature relaxes toward the "
    "supply setpoint plus a delta-T offset (the setpoint acts at lag 2), with "
    "small outdoor-temperature and IT-load disturbances; IT energy follows "
    "load and return-air temperature; HVAC energy is a rectified function of "
    "the return-air/setpoint gap plus outdoor load. The setpoint is "
    "piecewise-constant: an exogenous schedule redraws it a handful of times "
    "per year."
)

# Diurnal cycle: AR(2) with complex roots at radius 0.97 and period 24, so
# the column keeps a 24 h rhythm with slowly wandering phase and amplitude.
# A noiseless clock would make the cycle's lag unidentifiable to any linear
# conditional-independence test (every lag of a sinusoid lies in the span of
# two others); the innovations pin each consumer to its true lag.
_CYCLE_RADIUS = 0.97
_CYCLE_AR1 = 2.0 * _CYCLE_RADIUS * math.cos(2.0 * math.pi / 24.0)
_CYCLE_AR2 = -_CYCLE_RADIUS * _CYCLE_RADIUS
_CYCLE_MEAN = 11.5


def default_spec(seed: int = 0) -> ScmSpec:
    """The stock eight-variable room model. The room relaxes toward the
    setpoint with gain 0.55 per step, settling a setpoint step to within 5%
    about five steps after it takes effect."""
    variables = (
        Variable("Hour", "h"),
        Variable("Out_Temp", "degC"),
        Variable("Out_Hum", "%"),
        Variable("IT_Load", "kW"),
        Variable("Cool_set", "degC"),
        Variable("In_Temp", "degC"),
        Variable("ITE_Ener", "kW"),
        Variable("HVAC_Ener", "kW"),
    )
    equations = (
        Equation(
            target="Hour",
            intercept=_CYCLE_MEAN * (1.0 - _CYCLE_AR1 - _CYCLE_AR2),
            terms=(LinearTerm("Hour", 1, _CYCLE_AR1), LinearTerm("Hour", 2, _CYCLE_AR2)),
            noise_std=0.8,
            initial=_CYCLE_MEAN,
        ),
        Equation(
            target="Out_Temp",
            intercept=5.64,
            terms=(LinearTerm("Out_Temp", 1, 0.3), LinearTerm("Hour", 1, 0.24)),
            drivers=(SineDriver(amplitude=0.1, period=STEPS_PER_YEAR, phase=-math.pi / 2),),
            noise_std=3.9,
            initial=12.0,
        ),
        Equation(
            target="Out_Hum",
            intercept=18.9,
            terms=(LinearTerm("Out_Hum", 1, 0.7), LinearTerm("Out_Temp", 1, -0.2)),
            noise_std=2.0,
            initial=55.0,
        ),
        Equation(
            target="IT_Load",
            intercept=55.05,
            terms=(LinearTerm("Hour", 1, 1.3),),
            noise_std=14.0,
            initial=70.0,
        ),
        Equation(target="Cool_set", kind="policy", initial=22.0),
        Equation(
            target="In_Temp",
            intercept=5.511,
            terms=(
                LinearTerm("In_Temp", 1, 0.45),
                LinearTerm("Cool_set", 2, 0.55),
                LinearTerm("Out_Temp", 1, 0.022),
            ),
            noise_std=0.15,
            initial=33.0,
        ),
        Equation(
            target="ITE_Ener",
            intercept=-19.4,
            terms=(LinearTerm("IT_Load", 1, 0.9), LinearTerm("In_Temp", 1, 0.8)),
            noise_std=1.0,
            initial=70.0,
        ),
        Equation(
            target="HVAC_Ener",
            intercept=52.6,
            terms=(LinearTerm("Out_Temp", 1, 0.45),),
            gaps=(RectifiedGap("In_Temp", 1, "Cool_set", 1, 4.0),),
            noise_std=25.0,
            initial=100.0,
        ),
    )
    return ScmSpec(
        variables=variables,
        equations=equations,
        policy=InterventionPolicy(),
        horizon_steps=2 * STEPS_PER_YEAR,
        burn_in=100,
        seed=seed,
    )


def zero_noise(spec: ScmSpec) -> ScmSpec:
    """Copy of the spec with every noise_std set to 0 (for exactness checks)."""
    eqs = tuple(
        Equation(
            target=eq.target,
            kind=eq.kind,
            intercept=eq.intercept,
            terms=eq.terms,
            gaps=eq.gaps,
            drivers=eq.drivers,
            noise_std=0.0,
            initial=eq.initial,
        )
        for eq in spec.equations
    )
    return ScmSpec(
        variables=spec.variables,
        equations=eqs,
        policy=spec.policy,
        horizon_steps=spec.horizon_steps,
        burn_in=spec.burn_in,
        step_minutes=spec.step_minutes,
        seed=spec.seed,
    )


# Spec file round-trip (JSON).


def spec_to_json(spec: ScmSpec) -> str:
    payload = {
        "variables": [{"name": v.name, "unit": v.unit} for v in spec.variables],
        "policy": {
            "variable": spec.policy.variable,
            "changes_per_year": spec.policy.changes_per_year,
            "low": spec.policy.low,
            "high": spec.policy.high,
            "min_spacing": spec.policy.min_spacing,
        },
        "horizon_steps": spec.horizon_steps,
        "burn_in": spec.burn_in,
        "step_minutes": spec.step_minutes,
        "seed": spec.seed,
        "equations": [
            {
                "target": eq.target,
                "kind": eq.kind,
                "intercept": eq.intercept,
                "terms": [
                    {"source": t.source, "lag": t.lag, "coef": t.coef} for t in eq.terms
                ],
                "gaps": [
                    {
                        "plus_source": g.plus_source,
                        "plus_lag": g.plus_lag,
                        "minus_source": g.minus_source,
                        "minus_lag": g.minus_lag,
                        "coef": g.coef,
                    }
                    for g in eq.gaps
                ],
                "drivers": [
                    {"amplitude": d.amplitude, "period": d.period, "phase": d.phase}
                    for d in eq.drivers
                ],
                "noise_std": eq.noise_std,
                "initial": eq.initial,
            }
            for eq in spec.equations
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def spec_from_json(text: str) -> ScmSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScmSpecError(f"invalid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise ScmSpecError(f"spec: expected object, got {type(payload).__name__}")

    def ex(d, key, kinds, path, **kw):
        return expect(d, key, kinds, path, error_cls=ScmSpecError, **kw)

    raw_vars = ex(payload, "variables", list, "spec")
    variables = []
    for i, item in enumerate(raw_vars):
        path = f"spec.variables[{i}]"
        if not isinstance(item, dict):
            raise ScmSpecError(f"{path}: expected object")
        variables.append(
            Variable(ex(item, "name", str, path), ex(item, "unit", str, path, default=""))
        )
    rp = ex(payload, "policy", dict, "spec")
    policy = InterventionPolicy(
        variable=ex(rp, "variable", str, "spec.policy"),
        changes_per_year=float(ex(rp, "changes_per_year", float, "spec.policy")),
        low=float(ex(rp, "low", float, "spec.policy")),
        high=float(ex(rp, "high", float, "spec.policy")),
        min_spacing=ex(rp, "min_spacing", int, "spec.policy"),
    )
    equations = []
    for i, raw in enumerate(ex(payload, "equations", list, "spec")):
        path = f"spec.equations[{i}]"
        if not isinstance(raw, dict):
            raise ScmSpecError(f"{path}: expected object")
        terms = tuple(
            LinearTerm(
                ex(t, "source", str, f"{path}.terms[{k}]"),
                ex(t, "lag", int, f"{path}.terms[{k}]"),
                float(ex(t, "coef", float, f"{path}.terms[{k}]")),
            )
            for k, t in enumerate(ex(raw, "terms", list, path, default=[]))
        )
        gaps = tuple(
            RectifiedGap(
                ex(g, "plus_source", str, f"{path}.gaps[{k}]"),
                ex(g, "plus_lag", int, f"{path}.gaps[{k}]"),
                ex(g, "minus_source", str, f"{path}.gaps[{k}]"),
                ex(g, "minus_lag", int, f"{path}.gaps[{k}]"),
                float(ex(g, "coef", float, f"{path}.gaps[{k}]")),
            )
            for k, g in enumerate(ex(raw, "gaps", list, path, default=[]))
        )
        drivers = tuple(
            SineDriver(
                float(ex(d, "amplitude", float, f"{path}.drivers[{k}]")),
                float(ex(d, "period", float, f"{path}.drivers[{k}]")),
                float(ex(d, "phase", float, f"{path}.drivers[{k}]", default=0.0)),
            )
            for k, d in enumerate(ex(raw, "drivers", list, path, default=[]))
        )
        equations.append(
            Equation(
                target=ex(raw, "target", str, path),
                kind=ex(raw, "kind", str, path, default="linear"),
                intercept=float(ex(raw, "intercept", float, path, default=0.0)),
                terms=terms,
                gaps=gaps,
                drivers=drivers,
                noise_std=float(ex(raw, "noise_std", float, path, default=0.0)),
                initial=float(ex(raw, "initial", float, path, default=0.0)),
            )
        )
    try:
        return ScmSpec(
            variables=tuple(variables),
            equations=tuple(equations),
            policy=policy,
            horizon_steps=ex(payload, "horizon_steps", int, "spec", default=2 * STEPS_PER_YEAR),
            burn_in=ex(payload, "burn_in", int, "spec", default=100),
            step_minutes=ex(payload, "step_minutes", int, "spec", default=60),
            seed=ex(payload, "seed", int, "spec", default=0),
        )
    except ScmSpecError:
        raise
    except ValueError as exc:
        raise ScmSpecError(f"spec: {exc}") from None
