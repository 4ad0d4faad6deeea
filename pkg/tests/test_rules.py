import random

import pytest

from vizscout.errors import ExecError, VizScoutError
from vizscout.query import (
    Aggregate,
    Encoding,
    Mark,
    PartialQuery,
    Transform,
    VisQuery,
    execute,
)
from vizscout.rules import DEFAULT_RULES, RULES, RuleSet, check_validity, legal_actions

from conftest import make_table, random_fuzz_query

AGG_OPS = [a.value for a in Aggregate]
MARK_OPS = [m.value for m in Mark]


def state(*clauses):
    p = PartialQuery()
    for layer, op in clauses:
        p = p.extended(layer, op)
    return p


def test_default_rule_set_has_fifteen_rules():
    assert len(RULES) == 15
    assert len(DEFAULT_RULES.rules) == 15
    assert len({r.id for r in RULES}) == 15
    assert all(r.stage in ("selection", "transform", "visualization") for r in RULES)


def test_pie_aggregate_pruning(flights):
    s = state(("mark", "pie"), ("x_field", "City"), ("y_field", "Delay"))
    assert legal_actions(s, AGG_OPS, flights) == ["COUNT", "SUM"]


def test_bar_x_pruning_on_all_numeric_table():
    t = make_table({"a": ["1", "2", "3"], "b": ["4", "5", "6"]})
    s = state(("mark", "bar"))
    assert legal_actions(s, ["a", "b"], t) == []


def test_categorical_y_admits_count_only(flights):
    s = state(("mark", "bar"), ("x_field", "Date"), ("y_field", "City"))
    assert legal_actions(s, AGG_OPS, flights) == ["COUNT"]


def test_scatter_aggregates(flights):
    s = state(("mark", "scatter"), ("x_field", "Delay"), ("y_field", "Delay"))
    # self-plot: only the raw form stays legal
    assert legal_actions(s, AGG_OPS, flights) == ["NONE"]


def test_group_restricted_to_x_for_bars(flights):
    s = state(("mark", "bar"), ("x_field", "City"), ("y_field", "Delay"),
              ("aggregate", "AVG"))
    assert legal_actions(s, ["City", "Delay", "Date"], flights) == ["City"]


def test_y_excludes_x_except_scatter(flights):
    s = state(("mark", "bar"), ("x_field", "City"))
    assert "City" not in legal_actions(s, ["City", "Delay", "Date"], flights)
    s2 = state(("mark", "scatter"), ("x_field", "Delay"))
    assert legal_actions(s2, ["City", "Delay", "Date"], flights) == ["Delay"]


def test_mark_layer_feasibility(flights):
    t = make_table({"a": ["x", "y", "x"]})  # single categorical column
    assert legal_actions(state(), MARK_OPS, t) == ["bar", "pie"]
    assert legal_actions(state(), MARK_OPS, flights) == MARK_OPS


def test_raw_bars_need_unique_x(flights):
    # City repeats, so NONE is pruned; Date is unique, so raw bars survive
    s = state(("mark", "bar"), ("x_field", "City"), ("y_field", "Delay"))
    assert "NONE" not in legal_actions(s, AGG_OPS, flights)
    s2 = state(("mark", "bar"), ("x_field", "Date"), ("y_field", "Delay"))
    assert "NONE" in legal_actions(s2, AGG_OPS, flights)


def test_check_validity_negative_pie(flights):
    t = make_table({"City": ["a", "b", "c"], "Delay": ["5", "-3", "2"]})
    q = VisQuery(Mark.PIE, Encoding("City", "Delay", Aggregate.SUM),
                 Transform(group_field="City"))
    s_k, violated = check_validity(q, t, execute(q, t))
    assert s_k == 0
    assert violated == ["pie.nonnegative_y"]


def test_check_validity_single_slice_pie():
    t = make_table({"City": ["a", "a", "a"], "Delay": ["5", "3", "2"]})
    q = VisQuery(Mark.PIE, Encoding("City", "Delay", Aggregate.SUM),
                 Transform(group_field="City"))
    s_k, violated = check_validity(q, t, execute(q, t))
    assert s_k == 0
    assert "pie.min_two_slices" in violated


def test_check_validity_reference_query(flights):
    q = VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.AVG),
                 Transform(group_field="City"))
    s_k, violated = check_validity(q, flights, execute(q, flights))
    assert (s_k, violated) == (1, [])


def test_check_validity_is_pure(flights):
    q = VisQuery(Mark.LINE, Encoding("Date", "Delay", Aggregate.AVG),
                 Transform(group_field="Date"))
    data = execute(q, flights)
    assert check_validity(q, flights, data) == check_validity(q, flights, data)


def test_violations_sorted_by_rule_id():
    t = make_table({"City": ["a", "a", "a"], "Delay": ["-5", "-3", "2"]})
    q = VisQuery(Mark.PIE, Encoding("City", "Delay", Aggregate.SUM),
                 Transform(group_field="City"))
    _, violated = check_validity(q, t, execute(q, t))
    assert violated == sorted(violated)
    assert set(violated) == {"pie.min_two_slices", "pie.nonnegative_y"}


def test_max_categories_rule():
    n = 25
    t = make_table({"k": [f"c{i}" for i in range(n)], "v": [str(i) for i in range(n)]})
    q = VisQuery(Mark.BAR, Encoding("k", "v", Aggregate.SUM), Transform(group_field="k"))
    s_k, violated = check_validity(q, t, execute(q, t))
    assert s_k == 0 and "bar.max_categories" in violated
    # and the pruner already refuses such an x
    assert legal_actions(state(("mark", "bar")), ["k", "v"], t) == []


def test_line_min_points():
    t = make_table({"d": ["2024-01-01", "2024-01-02"], "v": ["1", "2"]})
    q = VisQuery(Mark.LINE, Encoding("d", "v", Aggregate.NONE))
    s_k, violated = check_validity(q, t, execute(q, t))
    assert s_k == 0 and violated == ["line.min_points"]


def test_agg_requires_group_rule(flights):
    grouped_none = VisQuery(Mark.BAR, Encoding("Date", "Delay", Aggregate.NONE),
                            Transform(group_field="Date"))
    s_k, violated = check_validity(grouped_none, flights, execute(grouped_none, flights))
    assert s_k == 0 and "agg.requires_group" in violated


def test_assembled_queries_violate_no_selection_or_transform_rules(flights, city_delay):
    rng = random.Random(11)
    data_stage = {r.id for r in RULES if r.stage == "visualization"}
    for table in (flights, city_delay):
        for _ in range(200):
            s = PartialQuery()
            ok = True
            while not s.complete:
                layer = s.next_layer()
                if layer == "mark":
                    cands = MARK_OPS
                elif layer == "aggregate":
                    cands = AGG_OPS
                else:
                    cands = table.column_names()
                legal = legal_actions(s, cands, table)
                if not legal:
                    ok = False
                    break
                s = s.extended(layer, rng.choice(legal))
            if not ok:
                continue
            q = s.to_query()
            try:
                chart = execute(q, table)
            except ExecError:
                continue  # data-dependent failure is the reward's concern
            _, violated = check_validity(q, table, chart)
            assert set(violated) <= data_stage, (q, violated)


def test_fuzz_never_crashes_smoke(flights):
    rng = random.Random(5)
    for _ in range(500):
        q = random_fuzz_query(rng, flights)
        try:
            data = execute(q, flights)
        except VizScoutError:
            continue
        s_k, violated = check_validity(q, flights, data)
        assert s_k in (0, 1)
        assert (s_k == 1) == (not violated)


def test_rule_set_config_removable(flights):
    no_pie_avg = RuleSet({r.id for r in RULES} - {"pie.no_avg"})
    s = state(("mark", "pie"), ("x_field", "City"), ("y_field", "Delay"))
    assert "AVG" in no_pie_avg.legal_actions(s, AGG_OPS, flights)
    with pytest.raises(ValueError):
        RuleSet({"nonsense.rule"})


def test_describe_and_mark_requirements():
    desc = DEFAULT_RULES.describe()
    assert len(desc) == 15
    req = DEFAULT_RULES.mark_requirements()
    assert req["pie"]["y_nonnegative"] and req["bar"]["max_points"] == 20
