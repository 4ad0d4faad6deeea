"""Multi-round recommendation sessions with an append-only event log.

Round 1 searches the fresh graph; selecting a hint freezes every graph node
outside the hint's constraint and re-runs the search warm (edge statistics and
the execution cache carry over), so later rounds honor all constraints
accumulated so far. Every operation appends one JSON event, and replaying a
log against the same table bytes reproduces each round exactly.
"""

from __future__ import annotations

import json
import time
import uuid
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional

from .errors import EmptyKeepSetError, SessionError, UnknownHintError, UnknownQueryError
from .graph import GraphConfig, QueryGraph
from .hints import Hint, HintConfig, generate_candidate_hints, select_top_k
from .ingest import Table
from .query import to_chart_spec
from .reward import RewardModels
from .rules import DEFAULT_RULES, RuleSet
from .search import SearchConfig, SearchResult, _Evaluator, run_search


@dataclass
class RoundRecord:
    number: int
    recommendations: SearchResult
    hints_offered: list
    hint_selected: Optional[str] = None
    user_kept: list = field(default_factory=list)
    timestamp: float = 0.0

    def recommendation_texts(self) -> list:
        return self.recommendations.texts()

    def to_payload(self, include_specs: bool = True) -> dict:
        recs = []
        for rank, rec in enumerate(self.recommendations.ranked, start=1):
            entry = {
                "rank": rank,
                "query": _text_of(rec),
                "score": rec.breakdown.to_dict(),
            }
            if include_specs:
                entry["spec"] = to_chart_spec(rec.data)
            recs.append(entry)
        return {
            "round": self.number,
            "recommendations": recs,
            "hints": [h.to_payload() for h in self.hints_offered],
            "hint_selected": self.hint_selected,
            "user_kept": list(self.user_kept),
        }


def _text_of(rec) -> str:
    from .query import to_canonical_text
    return to_canonical_text(rec.query)


class Session:
    """One user's multi-round exploration of one table.

    All mutation goes through this object; callers that share a session across
    threads must serialize access (the HTTP service keeps one lock per id).
    """

    def __init__(self, table: Table, config: SearchConfig = SearchConfig(),
                 hint_config: HintConfig = HintConfig(),
                 rule_set: RuleSet = DEFAULT_RULES,
                 models: Optional[RewardModels] = None,
                 graph_config: GraphConfig = GraphConfig(),
                 session_id: Optional[str] = None,
                 clock: Callable[[], float] = time.time,
                 log_path=None):
        self.id = session_id or uuid.uuid4().hex
        self.table = table
        self.config = config
        self.hint_config = hint_config
        self.rule_set = rule_set
        self.models = models or RewardModels.default()
        self.clock = clock
        self.log_path = log_path
        self.graph = QueryGraph(table, graph_config)
        self.history: list[RoundRecord] = []
        self.active_constraints: dict = {}  # layer -> set of kept operations
        self.events: list[dict] = []
        self._evaluator = _Evaluator(table, rule_set, self.models, config.beta)

    # --- internals ----------------------------------------------------------

    @property
    def round(self) -> int:
        return len(self.history) + 1

    def _emit(self, event: str, payload: dict) -> None:
        record = {"event": event, "payload": payload, "ts": self.clock()}
        self.events.append(record)
        if self.log_path is not None:
            with open(self.log_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(record, sort_keys=True) + "\n")

    def _round_config(self, number: int) -> SearchConfig:
        # each round draws from its own stream so re-searches are deterministic
        return replace(self.config, seed=self.config.seed + number - 1)

    def _run_round(self) -> RoundRecord:
        number = self.round
        result = run_search(self.table, self.graph, self.rule_set, self.models,
                            self._round_config(number), evaluator=self._evaluator)
        candidates = generate_candidate_hints(self.graph, result, self.table,
                                              self.hint_config.per_hint_cap)
        offered = select_top_k(candidates, self.hint_config.k,
                               self.hint_config.budget).chosen
        record = RoundRecord(number, result, offered, timestamp=self.clock())
        self.history.append(record)
        self._emit("round", record.to_payload(include_specs=False))
        return record

    # --- operations -----------------------------------------------------------

    def apply_hint(self, hint_id: str) -> RoundRecord:
        """Constrain the graph per the selected hint and search the next round."""
        latest = self.history[-1]
        hint = next((h for h in latest.hints_offered if h.id == hint_id), None)
        if hint is None:
            raise UnknownHintError(f"hint {hint_id!r} was not offered in round {latest.number}")
        # validate the whole constraint set before mutating anything
        for layer, keep in hint.constraints:
            live = set(self.graph.live_operations(layer))
            if not live & set(keep):
                raise EmptyKeepSetError(
                    f"hint would freeze every live node of layer {layer!r}")
        for layer, keep in hint.constraints:
            self.graph.freeze_except(layer, set(keep))
            merged = self.active_constraints.get(layer)
            self.active_constraints[layer] = (
                set(keep) if merged is None else merged & set(keep))
        latest.hint_selected = hint.id
        self._emit("hint", {"round": latest.number, "hint_id": hint.id})
        return self._run_round()

    def reset_constraints(self) -> RoundRecord:
        """Escape hatch: lift all hint constraints and search an open round.

        Edge statistics survive, so the engine keeps what it learned while
        the user regains the full space.
        """
        self.graph.unfreeze_all()
        self.active_constraints = {}
        self._emit("reset", {"round": self.history[-1].number})
        return self._run_round()

    def record_kept(self, round_number: int, kept: list) -> None:
        record = next((r for r in self.history if r.number == round_number), None)
        if record is None:
            raise SessionError(f"no round {round_number}")
        offered = set(record.recommendation_texts())
        unknown = [t for t in kept if t not in offered]
        if unknown:
            raise UnknownQueryError(f"not recommended in round {round_number}: {unknown}")
        for t in kept:
            if t not in record.user_kept:
                record.user_kept.append(t)
        self._emit("kept", {"round": round_number, "queries": list(kept)})

    def kept_union(self) -> list:
        out: list = []
        for record in self.history:
            for t in record.user_kept:
                if t not in out:
                    out.append(t)
        return out

    def constraints_payload(self) -> list:
        return [[layer, sorted(keep)] for layer, keep in
                sorted(self.active_constraints.items())]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def start_session(table: Table, config: SearchConfig = SearchConfig(),
                  hint_config: HintConfig = HintConfig(),
                  rule_set: RuleSet = DEFAULT_RULES,
                  models: Optional[RewardModels] = None,
                  graph_config: GraphConfig = GraphConfig(),
                  session_id: Optional[str] = None,
                  clock: Callable[[], float] = time.time,
                  log_path=None) -> Session:
    """Build the graph, run round 1, and log the start + round events."""
    session = Session(table, config, hint_config, rule_set, models, graph_config,
                      session_id=session_id, clock=clock, log_path=log_path)
    session._emit("start", {
        "table": {
            "name": table.name,
            "row_count": table.row_count,
            "columns": [[c.name, c.semantic_type] for c in table.columns],
        },
        "config": asdict(config),
        "hint_config": asdict(hint_config),
    })
    session._run_round()
    return session


def replay_session(events: list, table: Table,
                   rule_set: RuleSet = DEFAULT_RULES,
                   models: Optional[RewardModels] = None,
                   clock: Callable[[], float] = time.time) -> tuple:
    """Re-execute a logged session against the same table.

    Returns (session, mismatches): each mismatch describes a logged round
    whose reproduced recommendations differ.
    """
    if not events or events[0].get("event") != "start":
        raise SessionError("log does not begin with a start event")
    start = events[0]["payload"]
    logged_cols = start.get("table", {}).get("columns", [])
    actual_cols = [[c.name, c.semantic_type] for c in table.columns]
    if logged_cols != actual_cols:
        raise SessionError("table schema does not match the logged session")
    config = SearchConfig(**start["config"])
    hint_config = HintConfig(**start["hint_config"])
    session = start_session(table, config, hint_config, rule_set, models, clock=clock)
    mismatches: list = []

    def check_round(logged_payload: dict) -> None:
        number = logged_payload["round"]
        record = next((r for r in session.history if r.number == number), None)
        if record is None:
            mismatches.append({"round": number, "reason": "round not reproduced"})
            return
        got = [e["query"] for e in record.to_payload(include_specs=False)["recommendations"]]
        want = [e["query"] for e in logged_payload["recommendations"]]
        if got != want:
            mismatches.append({"round": number, "reason": "recommendations differ",
                               "logged": want, "replayed": got})

    for event in events[1:]:
        kind = event.get("event")
        payload = event.get("payload", {})
        if kind == "round":
            check_round(payload)
        elif kind == "hint":
            session.apply_hint(payload["hint_id"])
        elif kind == "reset":
            session.reset_constraints()
        elif kind == "kept":
            session.record_kept(payload["round"], payload["queries"])
    return session, mismatches


def load_events(path) -> list:
    with open(path, "r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
