"""Lagged causal graph, expert edits, and canonical serialization.

A graph is a set of (source, target, lag) links over named variables, each
with an optional signed strength and a provenance tag. Serialization is
canonical: equal graphs produce byte-equal JSON.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from causalift.jsonutil import _MISSING, expect

PROVENANCES = ("discovered", "expert-added", "truth")


class GraphError(ValueError):
    """Raised for invalid graphs, links, edits, or serialized forms."""


@dataclass(frozen=True)
class Link:
    source: str
    target: str
    lag: int
    strength: float | None
    provenance: str

    def __post_init__(self) -> None:
        if self.lag < 1:
            raise GraphError(
                f"link {self.source}->{self.target}: lag must be >= 1, got {self.lag}"
            )
        if self.provenance not in PROVENANCES:
            raise GraphError(
                f"link {self.source}->{self.target}: unknown provenance {self.provenance!r}"
            )
        if self.provenance == "expert-added" and self.strength is not None:
            raise GraphError(
                f"link {self.source}->{self.target}: expert-added links carry no strength"
            )
        if self.provenance == "discovered" and self.strength is None:
            raise GraphError(
                f"link {self.source}->{self.target}: discovered links need a strength"
            )
        if self.strength is not None:
            object.__setattr__(self, "strength", float(self.strength))

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.source, self.target, self.lag)


@dataclass(frozen=True)
class EditEntry:
    source: str
    target: str
    lag: int
    note: str = ""


@dataclass(frozen=True)
class EditSpec:
    """A reviewable batch of expert graph edits."""

    author: str
    add: tuple[EditEntry, ...] = ()
    remove: tuple[EditEntry, ...] = ()
    created_at: str = ""

    def __post_init__(self) -> None:
        if not self.author:
            raise GraphError("EditSpec needs a non-empty author")
        object.__setattr__(self, "add", tuple(self.add))
        object.__setattr__(self, "remove", tuple(self.remove))
        for label, entries in (("add", self.add), ("remove", self.remove)):
            keys = [(e.source, e.target, e.lag) for e in entries]
            if len(set(keys)) != len(keys):
                raise GraphError(f"EditSpec {label} list contains duplicates")
        overlap = {(e.source, e.target, e.lag) for e in self.add} & {
            (e.source, e.target, e.lag) for e in self.remove
        }
        if overlap:
            raise GraphError(f"EditSpec adds and removes the same links: {sorted(overlap)}")


@dataclass(frozen=True)
class SummaryEdge:
    source: str
    target: str
    lags: tuple[int, ...]
    max_abs_strength: float | None
    provenances: tuple[str, ...]


@dataclass(frozen=True)
class TimeSeriesGraph:
    variables: tuple[str, ...]
    tau_max: int
    alpha: float
    links: tuple[Link, ...]
    audit: tuple[Any, ...] = ()

    def __post_init__(self) -> None:
        variables = tuple(str(v) for v in self.variables)
        if not variables:
            raise GraphError("graph needs at least one variable")
        if len(set(variables)) != len(variables):
            raise GraphError(f"duplicate variable names: {list(variables)}")
        if self.tau_max < 1:
            raise GraphError(f"tau_max must be >= 1, got {self.tau_max}")
        if not 0.0 < self.alpha < 1.0:
            raise GraphError(f"alpha must be in (0, 1), got {self.alpha}")
        index = {name: i for i, name in enumerate(variables)}
        seen: set[tuple[str, str, int]] = set()
        for link in self.links:
            for endpoint in (link.source, link.target):
                if endpoint not in index:
                    raise GraphError(
                        f"link {link.source}->{link.target} references unknown "
                        f"variable {endpoint!r}"
                    )
            if link.lag > self.tau_max:
                raise GraphError(
                    f"link {link.source}->{link.target} lag {link.lag} exceeds "
                    f"tau_max {self.tau_max}"
                )
            if link.key in seen:
                raise GraphError(f"duplicate link {link.key}")
            seen.add(link.key)
        # Canonical order: target-major by variable position, then source, then lag.
        ordered = tuple(
            sorted(self.links, key=lambda l: (index[l.target], index[l.source], l.lag))
        )
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "links", ordered)
        object.__setattr__(self, "audit", tuple(self.audit))

    def links_into(self, target: str) -> tuple[Link, ...]:
        if target not in self.variables:
            raise GraphError(f"unknown variable {target!r}")
        return tuple(l for l in self.links if l.target == target)

    def has_link(self, source: str, target: str, lag: int) -> bool:
        return any(l.key == (source, target, lag) for l in self.links)

    def with_audit(self, entry: Any) -> "TimeSeriesGraph":
        return TimeSeriesGraph(
            variables=self.variables,
            tau_max=self.tau_max,
            alpha=self.alpha,
            links=self.links,
            audit=self.audit + (entry,),
        )


def apply_edits(graph: TimeSeriesGraph, edits: EditSpec) -> TimeSeriesGraph:
    """Apply an EditSpec, returning a new graph; inputs are never mutated.

    Strict by design: removing a link that is not present or adding one that
    already exists is an error, and every offending entry is listed at once.
    Added links get provenance "expert-added" and no strength. The applied
    EditSpec is appended to the audit trail.
    """
    existing = {l.key for l in graph.links}
    problems: list[str] = []
    for e in edits.remove:
        key = (e.source, e.target, e.lag)
        if key not in existing:
            problems.append(f"remove: link {key} not in graph")
    for e in edits.add:
        key = (e.source, e.target, e.lag)
        if key in existing:
            problems.append(f"add: link {key} already in graph")
        for endpoint in (e.source, e.target):
            if endpoint not in graph.variables:
                problems.append(f"add: link {key} references unknown variable {endpoint!r}")
        if not 1 <= e.lag <= graph.tau_max:
            problems.append(f"add: link {key} lag outside 1..{graph.tau_max}")
    if problems:
        raise GraphError("edit rejected: " + "; ".join(problems))
    removed = {(e.source, e.target, e.lag) for e in edits.remove}
    links = [l for l in graph.links if l.key not in removed]
    links.extend(
        Link(e.source, e.target, e.lag, strength=None, provenance="expert-added")
        for e in edits.add
    )
    audit_entry = {
        "event": "edits-applied",
        "author": edits.author,
        "created_at": edits.created_at,
        "added": [
            {"source": e.source, "target": e.target, "lag": e.lag, "note": e.note}
            for e in edits.add
        ],
        "removed": [
            {"source": e.source, "target": e.target, "lag": e.lag, "note": e.note}
            for e in edits.remove
        ],
    }
    return TimeSeriesGraph(
        variables=graph.variables,
        tau_max=graph.tau_max,
        alpha=graph.alpha,
        links=tuple(links),
        audit=graph.audit + (audit_entry,),
    )


def summary_graph(graph: TimeSeriesGraph) -> tuple[SummaryEdge, ...]:
    """Collapse lags per (source, target); keep the lag list and max |strength|."""
    index = {name: i for i, name in enumerate(graph.variables)}
    grouped: dict[tuple[str, str], list[Link]] = {}
    for link in graph.links:
        grouped.setdefault((link.source, link.target), []).append(link)
    edges = []
    for (source, target), links in grouped.items():
        strengths = [abs(l.strength) for l in links if l.strength is not None]
        edges.append(
            SummaryEdge(
                source=source,
                target=target,
                lags=tuple(sorted(l.lag for l in links)),
                max_abs_strength=max(strengths) if strengths else None,
                provenances=tuple(sorted({l.provenance for l in links})),
            )
        )
    return tuple(sorted(edges, key=lambda e: (index[e.target], index[e.source])))


# Canonical JSON form.


def _link_to_dict(link: Link) -> dict:
    return {
        "source": link.source,
        "target": link.target,
        "lag": link.lag,
        "strength": link.strength,
        "provenance": link.provenance,
    }


def to_json(graph: TimeSeriesGraph) -> str:
    payload = {
        "variables": list(graph.variables),
        "tau_max": graph.tau_max,
        "alpha": graph.alpha,
        "links": [_link_to_dict(l) for l in graph.links],
        "audit": list(graph.audit),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _expect(payload: dict, key: str, kinds, path: str, default=_MISSING):
    return expect(payload, key, kinds, path, error_cls=GraphError, default=default)


def from_json(text: str) -> TimeSeriesGraph:
    """Parse and validate a serialized graph; errors carry field paths."""
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise GraphError(f"graph: expected object, got {type(payload).__name__}")
    variables = _expect(payload, "variables", list, "graph")
    for i, v in enumerate(variables):
        if not isinstance(v, str):
            raise GraphError(f"graph.variables[{i}]: expected str, got {type(v).__name__}")
    tau_max = _expect(payload, "tau_max", int, "graph")
    alpha = _expect(payload, "alpha", (int, float), "graph")
    raw_links = _expect(payload, "links", list, "graph")
    audit = _expect(payload, "audit", list, "graph", default=[])
    links = []
    for i, item in enumerate(raw_links):
        path = f"links[{i}]"
        if not isinstance(item, dict):
            raise GraphError(f"{path}: expected object, got {type(item).__name__}")
        source = _expect(item, "source", str, path)
        target = _expect(item, "target", str, path)
        lag = _expect(item, "lag", int, path)
        strength = _expect(item, "strength", (int, float, type(None)), path)
        provenance = _expect(item, "provenance", str, path)
        try:
            links.append(Link(source, target, lag, strength, provenance))
        except GraphError as exc:
            raise GraphError(f"{path}: {exc}") from None
    try:
        return TimeSeriesGraph(
            variables=tuple(variables),
            tau_max=tau_max,
            alpha=float(alpha),
            links=tuple(links),
            audit=tuple(audit),
        )
    except GraphError as exc:
        raise GraphError(f"graph: {exc}") from None


def editspec_to_json(edits: EditSpec) -> str:
    payload = {
        "author": edits.author,
        "created_at": edits.created_at,
        "add": [
            {"source": e.source, "target": e.target, "lag": e.lag, "note": e.note}
            for e in edits.add
        ],
        "remove": [
            {"source": e.source, "target": e.target, "lag": e.lag, "note": e.note}
            for e in edits.remove
        ],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def editspec_from_json(text: str) -> EditSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphError(f"invalid JSON: {exc}") from None
    if not isinstance(payload, dict):
        raise GraphError(f"editspec: expected object, got {type(payload).__name__}")
    author = _expect(payload, "author", str, "editspec")
    created_at = _expect(payload, "created_at", str, "editspec", default="")
    entries: dict[str, list[EditEntry]] = {"add": [], "remove": []}
    for label in ("add", "remove"):
        raw = _expect(payload, label, list, "editspec", default=[])
        for i, item in enumerate(raw):
            path = f"editspec.{label}[{i}]"
            if not isinstance(item, dict):
                raise GraphError(f"{path}: expected object, got {type(item).__name__}")
            entries[label].append(
                EditEntry(
                    source=_expect(item, "source", str, path),
                    target=_expect(item, "target", str, path),
                    lag=_expect(item, "lag", int, path),
                    note=_expect(item, "note", str, path, default=""),
                )
            )
    try:
        return EditSpec(
            author=author,
            add=tuple(entries["add"]),
            remove=tuple(entries["remove"]),
            created_at=created_at,
        )
    except GraphError as exc:
        raise GraphError(f"editspec: {exc}") from None


def to_dot(graph: TimeSeriesGraph) -> str:
    """DOT rendering of the summary graph.

    Edge labels list the lags; expert-added edges are dashed and colored so
    manual additions stand out in review.
    """
    lines = [
        "digraph causal {",
        "  rankdir=LR;",
        '  node [shape=box, fontname="Helvetica"];',
    ]
    for v in graph.variables:
        lines.append(f'  "{v}";')
    for edge in summary_graph(graph):
        label = ",".join(str(l) for l in edge.lags)
        attrs = [f'label="{label}"']
        if "expert-added" in edge.provenances:
            attrs.append("style=dashed")
            attrs.append("color=firebrick")
        if edge.max_abs_strength is not None:
            attrs.append(f'tooltip="max |strength| = {edge.max_abs_strength:.3f}"')
        lines.append(f'  "{edge.source}" -> "{edge.target}" [{", ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
