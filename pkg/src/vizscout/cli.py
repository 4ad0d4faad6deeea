"""Command-line interface: recommend, hints, rules, serve, replay."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import VizScoutError
from .graph import QueryGraph
from .hints import generate_candidate_hints, select_top_k
from .ingest import IngestOptions, load_table
from .query import to_canonical_text, to_chart_spec, to_vega_lite
from .rules import DEFAULT_RULES
from .search import SearchConfig, run_search
from .server import EngineState, make_server
from .session import load_events, replay_session


def _search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--top-k", type=int, default=5, help="recommendations to return")
    p.add_argument("--seed", type=int, default=0, help="search RNG seed")
    p.add_argument("--iterations", type=int, default=100, help="search iterations")
    p.add_argument("--c", type=float, default=1.5, help="UCB balance constant")
    p.add_argument("--p0", type=float, default=0.9, help="initial random-branch probability")
    p.add_argument("--alpha", type=float, default=0.5, help="random-branch decay rate")
    p.add_argument("--beta", type=float, default=0.6, help="data-vs-preference weight")
    p.add_argument("--tab", action="store_true", help="input is tab-delimited")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file with search settings (flags win)")


def _config_from_args(args) -> SearchConfig:
    settings = {
        "iterations": args.iterations, "ucb_c": args.c,
        "explore_p0": args.p0, "explore_alpha": args.alpha,
        "top_k": args.top_k, "seed": args.seed, "beta": args.beta,
    }
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            loaded = json.load(fh)
        for key in settings:
            if key in loaded:
                settings[key] = loaded[key]
    return SearchConfig(**settings)


def _load(args):
    options = IngestOptions(delimiter="\t" if args.tab else ",")
    return load_table(args.path, options)


def _cmd_recommend(args) -> int:
    table = _load(args)
    graph = QueryGraph(table)
    config = _config_from_args(args)
    result = run_search(table, graph, DEFAULT_RULES, None, config)
    print(f"{'rank':<5} {'crf':<8} {'s_d':<8} {'s_u':<8} query")
    for rank, rec in enumerate(result.ranked, start=1):
        b = rec.breakdown
        print(f"{rank:<5} {b.crf:<8.4f} {b.s_d:<8.4f} {b.s_u:<8.4f} "
              f"{to_canonical_text(rec.query)}")
    if args.emit_specs:
        out = Path(args.emit_specs)
        out.mkdir(parents=True, exist_ok=True)
        for rank, rec in enumerate(result.ranked, start=1):
            spec = to_chart_spec(rec.data)
            if args.vega:
                spec = to_vega_lite(spec)
            (out / f"chart_{rank:02d}.json").write_text(
                json.dumps(spec, indent=2), encoding="utf-8")
    if args.stats:
        print(json.dumps(result.stats.to_dict()))
    return 0


def _cmd_hints(args) -> int:
    table = _load(args)
    graph = QueryGraph(table)
    config = _config_from_args(args)
    result = run_search(table, graph, DEFAULT_RULES, None, config)
    candidates = generate_candidate_hints(graph, result, table, args.per_hint_cap)
    selection = select_top_k(candidates, args.hint_k, args.budget)
    print(json.dumps([h.to_payload() for h in selection.chosen], indent=2))
    if args.stats:
        print(json.dumps(result.stats.to_dict()))
    return 0


def _cmd_rules(args) -> int:
    if args.action != "list":
        print(f"unknown rules action {args.action!r}", file=sys.stderr)
        return 1
    for entry in DEFAULT_RULES.describe():
        print(f"{entry['id']:<40} {entry['stage']:<14} {entry['description']}")
    return 0


def _cmd_serve(args) -> int:
    ui_dir = args.ui_dir
    if args.with_ui and not ui_dir:
        ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    state = EngineState(data_dir=args.data_dir, ui_dir=ui_dir)
    httpd = make_server(args.host, args.port, state)
    port = httpd.server_address[1]
    print(f"listening on http://{args.host}:{port}/api/v1", flush=True)
    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        httpd.shutdown()
        httpd.server_close()
    return 0


def _cmd_replay(args) -> int:
    events = load_events(args.log)
    options = IngestOptions(delimiter="\t" if args.tab else ",")
    table = load_table(args.path, options)
    session, mismatches = replay_session(events, table)
    for record in session.history:
        logged = "ok"
        for m in mismatches:
            if m["round"] == record.number:
                logged = f"MISMATCH ({m['reason']})"
        print(f"round {record.number}: {len(record.recommendations.ranked)} "
              f"recommendations, {len(record.hints_offered)} hints ... {logged}")
    if mismatches:
        print(f"{len(mismatches)} round(s) differ from the log", file=sys.stderr)
        return 1
    print("replay reproduced the logged session exactly")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vizscout",
        description="Ranked chart recommendations with hint-driven refinement")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("recommend", help="rank charts for a delimited file")
    p.add_argument("path", type=Path)
    _search_flags(p)
    p.add_argument("--emit-specs", type=Path, default=None,
                   help="directory for one chart-spec JSON per recommendation")
    p.add_argument("--vega", action="store_true", help="emit Vega-Lite documents")
    p.add_argument("--stats", action="store_true", help="print search stats JSON")
    p.set_defaults(func=_cmd_recommend)

    p = sub.add_parser("hints", help="print the selected hints for a file")
    p.add_argument("path", type=Path)
    _search_flags(p)
    p.add_argument("--hint-k", type=int, default=9, help="hints to select")
    p.add_argument("--budget", type=int, default=40, help="total chart budget")
    p.add_argument("--per-hint-cap", type=int, default=8, help="charts per hint")
    p.add_argument("--stats", action="store_true")
    p.set_defaults(func=_cmd_hints)

    p = sub.add_parser("rules", help="inspect the rule set")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=_cmd_rules)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=int(os.environ.get("PORT", 8080)))
    p.add_argument("--data-dir", type=Path,
                   default=os.environ.get("DATA_DIR") or None,
                   help="persist uploads and session logs here")
    p.add_argument("--ui-dir", type=Path, default=None, help="static UI bundle")
    p.add_argument("--with-ui", action="store_true",
                   help="serve the built-in frontend bundle")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("replay", help="re-run a session event log against its table")
    p.add_argument("log", type=Path)
    p.add_argument("path", type=Path, help="the table the session ran on")
    p.add_argument("--tab", action="store_true")
    p.set_defaults(func=_cmd_replay)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return 1
    except VizScoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
