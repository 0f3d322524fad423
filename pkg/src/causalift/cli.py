"""Command-line surface: every subcommand is a thin client of the library.

Exit codes: 0 on success, 1 for usage errors (bad flags, unknown
subcommands), 2 for runtime failures (missing files, invalid inputs,
failed experiments).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from causalift.dataset import build_lagged_design, read_csv, temporal_split
from causalift.discovery import DiscoveryConfig, discover_graph
from causalift.features import (
    METHODS,
    all_features,
    causal_all,
    causal_lags,
    featureset_to_json,
)
from causalift.graph import apply_edits, editspec_from_json, from_json, to_json
from causalift.pipeline import (
    load_config,
    render_report,
    run_experiment,
    select_features,
)
from causalift.simulator import default_spec, run_batch, spec_from_json

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1; argparse's default of 2 is reserved for runtime failures
    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="causalift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate datasets from an SCM spec")
    p.add_argument("--spec", help="spec JSON; omit for the stock room model")
    p.add_argument("--runs", type=int, default=1, help="number of runs (default 1)")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    p.add_argument("--seed", type=int, help="override the spec's seed")
    p.add_argument("--steps", type=int, help="override the spec's horizon_steps")

    p = sub.add_parser("discover", help="discover a lagged causal graph from a CSV")
    p.add_argument("--data", required=True, help="time-series CSV")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--max-lag", type=int, default=24, help="largest scanned lag")
    p.add_argument("--tau", type=int, help="fix tau_max instead of scanning")
    p.add_argument("--out", help="write graph JSON here instead of stdout")

    p = sub.add_parser("edit", help="apply an edit batch to a graph")
    p.add_argument("--graph", required=True, help="graph JSON")
    p.add_argument("--edits", required=True, help="edit batch JSON")
    p.add_argument("--out", help="write edited graph here instead of stdout")

    p = sub.add_parser("features", help="project or fit a feature set")
    p.add_argument("--graph", required=True, help="graph JSON")
    p.add_argument("--target", required=True)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--data", help="CSV; required for data-driven methods")
    p.add_argument(
        "--split",
        type=float,
        default=0.5,
        help="data-driven methods fit on the first fraction of --data (default 0.5)",
    )
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write feature-set JSON here instead of stdout")

    p = sub.add_parser("run", help="run a full experiment from a config file")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", help="override the config's output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")

    p = sub.add_parser("report", help="re-render the summary from a results bundle")
    p.add_argument("--bundle", required=True, help="experiment output directory")

    p = sub.add_parser("serve", help="serve the graph-editing HTTP API")
    p.add_argument("--graph", required=True, help="graph JSON to load")
    p.add_argument("--data", required=True, help="time-series CSV backing quick-eval")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--split", type=float, default=0.5)
    p.add_argument("--horizon", type=int, default=5)
    p.add_argument("--static", help="directory of UI assets to serve at /")
    return parser


def _emit(text: str, out: str | None) -> None:
    if out is None:
        print(text, end="" if text.endswith("\n") else "\n")
    else:
        Path(out).write_text(text)


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"file not found: {p}")
    return p.read_text()


def cmd_simulate(args) -> int:
    spec = spec_from_json(_read(args.spec)) if args.spec else default_spec()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.steps is not None:
        spec = replace(spec, horizon_steps=args.steps)
    run_batch(spec, args.runs, args.out)
    print(f"wrote {args.runs} run(s) and truth_graph.json to {args.out}")
    return 0


def cmd_discover(args) -> int:
    ds = read_csv(args.data)
    cfg = DiscoveryConfig(alpha=args.alpha, max_scan_lag=args.max_lag, tau_max=args.tau)
    graph = discover_graph(ds, cfg)
    _emit(to_json(graph), args.out)
    if args.out:
        print(f"wrote graph with {len(graph.links)} links to {args.out}")
    return 0


def cmd_edit(args) -> int:
    graph = from_json(_read(args.graph))
    edits = editspec_from_json(_read(args.edits))
    edited = apply_edits(graph, edits)
    _emit(to_json(edited), args.out)
    if args.out:
        print(f"wrote edited graph ({len(edited.links)} links) to {args.out}")
    return 0


def cmd_features(args) -> int:
    graph = from_json(_read(args.graph))
    if args.method == "causal-lags":
        fs = causal_lags(graph, args.target)
    elif args.method == "causal-all":
        fs = causal_all(graph, args.target)
    elif args.method == "all":
        fs = all_features(graph.variables, graph.tau_max, args.target)
    elif args.data is None:
        raise ValueError(f"method {args.method!r} fits on data; pass --data")
    else:
        ds = read_csv(args.data)
        train, _ = temporal_split(ds, args.split)
        design = build_lagged_design(train, args.target, graph.tau_max, role="train")
        fs = select_features(args.method, graph, design, seed=args.seed)
    _emit(featureset_to_json(fs), args.out)
    return 0


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    result = run_experiment(cfg, out_dir=args.out, n_jobs=args.jobs)
    print(
        f"bundle written to {result.out_dir}: {len(result.cells)} cells, "
        f"{len(result.failures)} failed"
    )
    return 0


def cmd_report(args) -> int:
    bundle = Path(args.bundle)
    results = json.loads(_read(str(bundle / "results.json")))
    aggregate = json.loads(_read(str(bundle / "aggregate.json")))
    print(render_report(results["meta"], aggregate, results["failures"]), end="")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from causalift.service import create_app

    app = create_app(
        graph_path=args.graph,
        data_path=args.data,
        split_fraction=args.split,
        horizon=args.horizon,
        static_dir=args.static,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "simulate": cmd_simulate,
    "discover": cmd_discover,
    "edit": cmd_edit,
    "features": cmd_features,
    "run": cmd_run,
    "report": cmd_report,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
