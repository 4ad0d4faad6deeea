import json

import pytest

from vizscout.errors import (
    EmptyKeepSetError,
    NoValidQueryError,
    UnknownHintError,
    UnknownQueryError,
)
from vizscout.hints import HintConfig
from vizscout.search import SearchConfig
from vizscout.session import load_events, replay_session, start_session

from conftest import make_table

CFG = SearchConfig(iterations=100, seed=42, top_k=5)


def fixed_clock():
    return 1700000000.0


def test_round_one_contract(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    assert s.round == 2  # round 1 recorded, next round would be 2
    r1 = s.history[0]
    assert r1.number == 1
    assert 0 < len(r1.recommendations.ranked) <= CFG.top_k
    assert len(r1.hints_offered) <= HintConfig().k
    assert sum(h.cost for h in r1.hints_offered) <= HintConfig().budget
    assert [e["event"] for e in s.events] == ["start", "round"]


def test_sessions_deterministic_modulo_identity(flights):
    a = start_session(flights, CFG, clock=fixed_clock)
    b = start_session(flights, CFG, clock=fixed_clock)
    assert a.id != b.id
    pa = a.history[0].to_payload(include_specs=False)
    pb = b.history[0].to_payload(include_specs=False)
    assert pa == pb


def test_failing_table_propagates():
    t = make_table({"a": ["x", "y", "x"]})
    with pytest.raises(NoValidQueryError):
        start_session(t, SearchConfig(iterations=30, seed=1))


def test_apply_y_hint_constrains_next_round(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    hint = next(h for h in s.history[0].hints_offered
                if h.template_kind == "explore_field_y" and h.target == "Delay")
    r2 = s.apply_hint(hint.id)
    assert r2.number == 2
    assert r2.recommendations.ranked
    for rec in r2.recommendations.ranked:
        assert rec.query.encoding.y_field == "Delay"
    assert s.history[0].hint_selected == hint.id
    assert s.active_constraints == {"y_field": {"Delay"}}


def test_apply_same_hint_twice_is_idempotent(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    hint = next(h for h in s.history[0].hints_offered
                if h.template_kind == "explore_field_y")
    s.apply_hint(hint.id)
    again = next((h for h in s.history[1].hints_offered if h.id == hint.id), None)
    assert again is not None  # still applicable under the constraint
    r3 = s.apply_hint(again.id)
    assert r3.number == 3
    assert s.active_constraints == {"y_field": {hint.target}}


def test_unknown_hint_rejected(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    with pytest.raises(UnknownHintError):
        s.apply_hint("nonsense:id")
    # hints from an EARLIER round are not applicable once a new round exists
    first_hint = s.history[0].hints_offered[0]
    s.apply_hint(first_hint.id)
    stale = [h for h in s.history[0].hints_offered
             if all(h.id != h2.id for h2 in s.history[1].hints_offered)]
    if stale:
        with pytest.raises(UnknownHintError):
            s.apply_hint(stale[0].id)


def test_conflicting_constraint_raises(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    # freeze the x layer down to City behind the session's back, then pick the
    # trend hint, which pins x to the temporal columns: empty intersection
    trend = next(h for h in s.history[0].hints_offered
                 if h.template_kind == "trend_over_time")
    s.graph.freeze_except("x_field", {"City"})
    rounds_before = len(s.history)
    with pytest.raises(EmptyKeepSetError):
        s.apply_hint(trend.id)
    assert len(s.history) == rounds_before  # nothing recorded
    assert s.history[-1].hint_selected is None


def test_record_kept(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    texts = s.history[0].recommendation_texts()
    s.record_kept(1, texts[:2])
    assert s.history[0].user_kept == texts[:2]
    s.record_kept(1, [])  # empty is fine
    assert s.history[0].user_kept == texts[:2]
    with pytest.raises(UnknownQueryError):
        s.record_kept(1, ["mark bar encoding x Nope y Delay transform"])
    s.record_kept(1, texts[1:3])
    assert s.history[0].user_kept == texts[:3]  # dedup, order preserved


def test_kept_union(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    texts1 = s.history[0].recommendation_texts()
    s.record_kept(1, texts1[:2])
    hint = s.history[0].hints_offered[0]
    s.apply_hint(hint.id)
    texts2 = s.history[1].recommendation_texts()
    s.record_kept(2, texts2[:1])
    union = s.kept_union()
    assert union == list(dict.fromkeys(texts1[:2] + texts2[:1]))


def test_later_rounds_respect_all_constraints(flights):
    s = start_session(flights, SearchConfig(iterations=120, seed=9, top_k=8),
                      clock=fixed_clock)
    for _ in range(3):
        latest = s.history[-1]
        hint = next((h for h in latest.hints_offered
                     if h.template_kind in ("explore_field_y", "breakdown_by_chart")),
                    None)
        if hint is None:
            break
        s.apply_hint(hint.id)
        for record in s.history[len(s.history) - 1:]:
            for rec in record.recommendations.ranked:
                from vizscout.hints import matches_constraints
                constraints = [(layer, frozenset(keep))
                               for layer, keep in s.active_constraints.items()]
                assert matches_constraints(rec.query, constraints)


def test_event_log_bytes_deterministic(flights, tmp_path):
    logs = []
    for trial in range(3):
        path = tmp_path / f"run{trial}.jsonl"
        s = start_session(flights, CFG, clock=fixed_clock, log_path=path)
        hint = next(h for h in s.history[0].hints_offered
                    if h.template_kind == "explore_field_y")
        s.apply_hint(hint.id)
        s.record_kept(2, s.history[1].recommendation_texts()[:1])
        logs.append(path.read_bytes())
        assert s.to_jsonl().encode() == logs[-1]
    assert logs[0] == logs[1] == logs[2]


def test_replay_reproduces_rounds(flights, tmp_path):
    path = tmp_path / "session.jsonl"
    s = start_session(flights, CFG, clock=fixed_clock, log_path=path)
    hint = next(h for h in s.history[0].hints_offered
                if h.template_kind == "explore_field_y")
    s.apply_hint(hint.id)
    s.record_kept(1, s.history[0].recommendation_texts()[:1])
    events = load_events(path)
    replayed, mismatches = replay_session(events, flights, clock=fixed_clock)
    assert mismatches == []
    assert replayed.history[1].recommendation_texts() == \
        s.history[1].recommendation_texts()
    assert replayed.history[0].user_kept == s.history[0].user_kept


def test_reset_constraints_escape_hatch(flights, tmp_path):
    path = tmp_path / "session.jsonl"
    s = start_session(flights, CFG, clock=fixed_clock, log_path=path)
    hint = next(h for h in s.history[0].hints_offered
                if h.template_kind == "explore_field_y")
    s.apply_hint(hint.id)
    assert s.active_constraints
    r3 = s.reset_constraints()
    assert r3.number == 3
    assert s.active_constraints == {}
    assert s.graph.frozen == set()
    y_fields = {rec.query.encoding.y_field for rec in r3.recommendations.ranked}
    assert len(y_fields) >= 1
    # the reset round replays exactly like any other
    replayed, mismatches = replay_session(load_events(path), flights,
                                          clock=fixed_clock)
    assert mismatches == []
    assert [r.number for r in replayed.history] == [1, 2, 3]


def test_replay_rejects_wrong_table(flights, tmp_path, city_delay):
    path = tmp_path / "session.jsonl"
    start_session(flights, CFG, clock=fixed_clock, log_path=path)
    from vizscout.errors import SessionError
    with pytest.raises(SessionError):
        replay_session(load_events(path), city_delay)


def test_round_payload_shape(flights):
    s = start_session(flights, CFG, clock=fixed_clock)
    doc = s.history[0].to_payload()
    json.dumps(doc)
    rec = doc["recommendations"][0]
    assert rec["rank"] == 1
    assert rec["query"].startswith("mark ")
    assert {"s_k", "s_d", "s_u", "beta", "crf", "violated_rules"} == set(rec["score"])
    assert rec["spec"]["spec_version"] == 1
