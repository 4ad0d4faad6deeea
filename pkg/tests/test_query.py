import json
import random

import pytest

from vizscout.errors import (
    EmptyResultError,
    ParseError,
    TypeMismatchError,
    UnknownFieldError,
)
from vizscout.query import (
    Aggregate,
    BinSpec,
    Encoding,
    FilterPredicate,
    Mark,
    PartialQuery,
    SortSpec,
    Transform,
    VisQuery,
    execute,
    parse_canonical_text,
    to_canonical_text,
    to_chart_spec,
    to_vega_lite,
)

from conftest import make_table, oracle_execute, random_valid_query, random_fuzz_query


def q_bar_avg_city():
    return VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.AVG),
                    Transform(group_field="City"))


def test_execute_bar_avg_matches_hand_oracle(flights):
    data = execute(q_bar_avg_city(), flights)
    got = dict(data.points)
    want = dict(oracle_execute(q_bar_avg_city(), flights))
    assert got == want
    assert want == {"LA": 7.0, "MSP": 40.0, "SEA": 22.5}
    assert data.y_label == "AVG(Delay)"
    assert data.x_label == "City"


def test_execute_empty_result(flights):
    q = VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.COUNT),
                 Transform(group_field="City",
                           filter=FilterPredicate("Delay", ">", 1000.0)))
    with pytest.raises(EmptyResultError):
        execute(q, flights)


def test_execute_scatter_identity(flights):
    q = VisQuery(Mark.SCATTER, Encoding("Delay", "Delay", Aggregate.NONE))
    data = execute(q, flights)
    assert len(data) == flights.row_count
    assert all(x == y for x, y in data.points)


def test_execute_unknown_field(flights):
    q = VisQuery(Mark.BAR, Encoding("Nope", "Delay", Aggregate.COUNT),
                 Transform(group_field="Nope"))
    with pytest.raises(UnknownFieldError):
        execute(q, flights)


def test_execute_type_mismatch(flights):
    q = VisQuery(Mark.BAR, Encoding("City", "City", Aggregate.SUM),
                 Transform(group_field="City"))
    with pytest.raises(TypeMismatchError):
        execute(q, flights)
    raw_cat_y = VisQuery(Mark.BAR, Encoding("Delay", "City", Aggregate.NONE))
    with pytest.raises(TypeMismatchError):
        execute(raw_cat_y, flights)


def test_count_counts_rows_and_labels(flights):
    q = VisQuery(Mark.BAR, Encoding("City", "Date", Aggregate.COUNT),
                 Transform(group_field="City"))
    data = execute(q, flights)
    assert dict(data.points) == {"LA": 3.0, "MSP": 3.0, "SEA": 2.0}
    assert data.y_label == "COUNT(Date)"


def test_null_handling():
    t = make_table({"g": ["a", "a", "b", "b", "c", ""],
                    "v": ["1", "", "3", "5", "", "7"]})
    q = VisQuery(Mark.BAR, Encoding("g", "v", Aggregate.AVG), Transform(group_field="g"))
    data = execute(q, t)
    # null group keys drop; group c is all-null in v and yields no point
    assert dict(data.points) == {"a": 1.0, "b": 4.0}
    count = VisQuery(Mark.BAR, Encoding("g", "v", Aggregate.COUNT),
                     Transform(group_field="g"))
    assert dict(execute(count, t).points) == {"a": 2.0, "b": 2.0, "c": 1.0}


def test_pipeline_filter_then_group(flights):
    q = VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.AVG),
                 Transform(group_field="City",
                           filter=FilterPredicate("Delay", ">=", 10.0)))
    data = execute(q, flights)
    assert dict(data.points) == dict(oracle_execute(q, flights))
    assert dict(data.points) == {"MSP": 40.0, "SEA": 22.5, "LA": 10.0}


def test_sort_and_topk(flights):
    q = VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.AVG),
                 Transform(group_field="City", sort=SortSpec("y", "desc"), topk=2))
    data = execute(q, flights)
    assert data.points == [("MSP", 40.0), ("SEA", 22.5)]
    asc = VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.AVG),
                   Transform(group_field="City", sort=SortSpec("x", "asc")))
    assert [x for x, _ in execute(asc, flights).points] == ["LA", "MSP", "SEA"]


def test_topk_exact_count(flights):
    for k in (1, 2, 3):
        q = VisQuery(Mark.BAR, Encoding("City", "Delay", Aggregate.COUNT),
                     Transform(group_field="City", sort=SortSpec("y", "desc"), topk=k))
        assert len(execute(q, flights)) == k


def test_sort_stability():
    t = make_table({"k": ["b", "a", "c", "d"], "v": ["1", "1", "1", "0"]})
    q = VisQuery(Mark.BAR, Encoding("k", "v", Aggregate.SUM),
                 Transform(group_field="k", sort=SortSpec("y", "desc")))
    # equal y keys keep first-occurrence order (b, a, c before d)
    assert [x for x, _ in execute(q, t).points] == ["b", "a", "c", "d"]


def test_bin_year_grouping():
    t = make_table({"d": ["2011-01-01", "2011-06-01", "2012-03-01", "2012-04-01"],
                    "v": ["1", "2", "4", "8"]})
    q = VisQuery(Mark.BAR, Encoding("d", "v", Aggregate.SUM),
                 Transform(group_field="d", bin=BinSpec("d", "year")))
    assert dict(execute(q, t).points) == {2011: 3.0, 2012: 12.0}


def test_bin_weekday_and_month():
    t = make_table({"d": ["2024-01-01", "2024-01-02", "2024-01-08", "2024-02-05"],
                    "v": ["1", "2", "4", "8"]})
    q = VisQuery(Mark.BAR, Encoding("d", "v", Aggregate.SUM),
                 Transform(bin=BinSpec("d", "weekday")))
    assert dict(execute(q, t).points) == {"Mon": 13.0, "Tue": 2.0}
    q2 = VisQuery(Mark.BAR, Encoding("d", "v", Aggregate.COUNT),
                  Transform(bin=BinSpec("d", "month")))
    assert dict(execute(q2, t).points) == {"2024-01": 3.0, "2024-02": 1.0}


def test_bucket_bin():
    t = make_table({"v": ["1", "4", "7", "12"], "w": ["1", "1", "1", "1"]})
    q = VisQuery(Mark.BAR, Encoding("v", "w", Aggregate.COUNT),
                 Transform(bin=BinSpec("v", "bucket", 5.0)))
    assert dict(execute(q, t).points) == {0.0: 2.0, 5.0: 1.0, 10.0: 1.0}


def test_scatter_grouped_means(flights):
    q = VisQuery(Mark.SCATTER, Encoding("Delay", "Delay", Aggregate.AVG),
                 Transform(group_field="City"))
    data = execute(q, flights)
    want = dict(oracle_execute(q, flights))
    assert dict(data.points) == pytest.approx(want)


def test_color_series(flights):
    q = VisQuery(Mark.BAR, Encoding("Date", "Delay", Aggregate.SUM,
                                    color_field="City"),
                 Transform(group_field="Date"))
    data = execute(q, flights)
    assert set(data.color_series) == {"LA", "MSP", "SEA"}
    total = sum(y for pts in data.color_series.values() for _, y in pts)
    assert total == pytest.approx(float(sum(r[1] for r in flights.rows())))


def test_execution_determinism(flights):
    q = q_bar_avg_city()
    a, b = execute(q, flights), execute(q, flights)
    assert a.points == b.points
    assert a.y_label == b.y_label


def test_grouped_matches_oracle_on_random_queries(flights, city_delay):
    rng = random.Random(7)
    gen = random.Random(41)
    cats = ["a", "b", "c", "d", ""]
    dates = [f"2020-0{m}-1{d}" for m in range(1, 9) for d in range(0, 5)] + [""]
    messy = make_table({
        "cat": [gen.choice(cats) for _ in range(60)],
        "num": [("" if gen.random() < 0.15 else f"{gen.uniform(-20, 50):.2f}")
                for _ in range(60)],
        "num2": [("" if gen.random() < 0.1 else str(gen.randint(0, 9)))
                 for _ in range(60)],
        "when": [gen.choice(dates) for _ in range(60)],
    }, name="messy")
    tables = [flights, city_delay, messy]
    checked = 0
    for _ in range(300):
        t = rng.choice(tables)
        q = random_fuzz_query(rng, t)
        if q.transform.sort or q.transform.topk:
            continue  # oracle compares unordered group results
        try:
            data = execute(q, t)
        except Exception:
            continue
        want = oracle_execute(q, t)
        if q.encoding.aggregate is Aggregate.NONE:
            # oracle returns {x: [ys]}; compare multisets per x
            regrouped: dict = {}
            for x, y in data.points:
                regrouped.setdefault(x, []).append(y)
            assert {k: sorted(v) for k, v in regrouped.items()} == \
                {k: sorted(v) for k, v in want.items()}
        else:
            # x values may repeat when the group key is not the x axis, so
            # compare point multisets
            assert _norm_points(data.points) == _norm_points(want)
        checked += 1
    assert checked > 80


def _norm_points(pairs):
    def norm_cell(v):
        return round(v, 9) if isinstance(v, float) else v
    return sorted(((norm_cell(x), round(y, 9)) for x, y in pairs),
                  key=lambda p: (repr(p[0]), p[1]))


# --- canonical text ----------------------------------------------------------


def test_canonical_text_of_reference_query():
    text = to_canonical_text(q_bar_avg_city())
    assert text == "mark bar encoding x City y AVG(Delay) transform group City"


def test_canonical_none_aggregate_bare_field():
    q = VisQuery(Mark.SCATTER, Encoding("Delay", "Delay", Aggregate.NONE))
    assert to_canonical_text(q) == "mark scatter encoding x Delay y Delay transform"


def test_parse_pie_sum():
    q = parse_canonical_text("mark pie encoding x City y SUM(Delay) transform group City")
    assert q.mark is Mark.PIE
    assert q.encoding.aggregate is Aggregate.SUM
    assert q.transform.group_field == "City"


def test_parse_unknown_mark_offset():
    with pytest.raises(ParseError) as err:
        parse_canonical_text("mark donut encoding x City y Delay transform")
    assert err.value.offset == 5  # points at the second token
    assert "bar|line|pie|scatter" in err.value.expected


def test_parse_empty_string():
    with pytest.raises(ParseError) as err:
        parse_canonical_text("")
    assert err.value.offset == 0


def test_parse_errors_carry_expectation():
    with pytest.raises(ParseError) as err:
        parse_canonical_text("mark bar encoding x City y Delay transform sort x sideways")
    assert err.value.expected == "asc or desc"
    with pytest.raises(ParseError):
        parse_canonical_text("mark bar encoding x City y Delay transform topk 0")
    with pytest.raises(ParseError):
        parse_canonical_text('mark bar encoding x City y Delay transform "quoted"')


def test_round_trip_property():
    rng = random.Random(2024)
    for _ in range(1000):
        q = random_valid_query(rng)
        text = to_canonical_text(q)
        assert parse_canonical_text(text) == q, text


def test_round_trip_quoted_fields():
    q = VisQuery(Mark.BAR, Encoding("Flight Delay", 'we"ird', Aggregate.COUNT),
                 Transform(group_field="Flight Delay"))
    assert parse_canonical_text(to_canonical_text(q)) == q


def test_partial_query_layers():
    p = PartialQuery()
    assert p.next_layer() == "mark"
    p = p.extended("mark", "bar").extended("x_field", "City") \
         .extended("y_field", "Delay").extended("aggregate", "AVG")
    assert p.next_layer() == "group_field"
    assert not p.complete
    p = p.extended("group_field", "City")
    assert p.complete
    assert p.to_query() == q_bar_avg_city()
    # NONE skips the group layer
    p2 = PartialQuery().extended("mark", "scatter").extended("x_field", "Delay") \
                       .extended("y_field", "Delay").extended("aggregate", "NONE")
    assert p2.complete


def test_transform_invariants():
    with pytest.raises(ValueError):
        Transform(topk=3)  # topk requires sort
    with pytest.raises(ValueError):
        Transform(sort=SortSpec("x", "asc"), topk=0)
    with pytest.raises(ValueError):
        BinSpec("d", "bucket")  # bucket needs a width


# --- chart-spec documents -------------------------------------------------------


def test_chart_spec_bar(flights):
    spec = to_chart_spec(execute(q_bar_avg_city(), flights))
    assert spec["mark"] == "bar"
    assert spec["spec_version"] == 1
    assert len(spec["data"]) == 3
    assert spec["encoding"]["y"] == {"field": "Delay", "type": "numeric",
                                     "aggregate": "AVG"}
    json.dumps(spec)  # JSON-serializable


def test_chart_spec_pie_shares(flights):
    q = VisQuery(Mark.PIE, Encoding("City", "Delay", Aggregate.SUM),
                 Transform(group_field="City"))
    spec = to_chart_spec(execute(q, flights))
    ys = [row["y"] for row in spec["data"]]
    total = sum(ys)
    for row in spec["data"]:
        assert row["share"] == pytest.approx(row["y"] / total)
    assert sum(row["share"] for row in spec["data"]) == pytest.approx(1.0)


def test_chart_spec_color_series(flights):
    q = VisQuery(Mark.BAR, Encoding("Date", "Delay", Aggregate.SUM, color_field="City"),
                 Transform(group_field="Date"))
    spec = to_chart_spec(execute(q, flights))
    assert "color" in spec["encoding"]
    assert {row["c"] for row in spec["data"]} == {"LA", "MSP", "SEA"}


def test_chart_spec_temporal_cells(flights):
    q = VisQuery(Mark.LINE, Encoding("Date", "Delay", Aggregate.NONE))
    spec = to_chart_spec(execute(q, flights))
    assert spec["data"][0]["x"] == "2012-01-01T00:00:00"
    ordered = [row["x"] for row in spec["data"]]
    assert ordered == sorted(ordered)  # line charts default to ascending x


def test_vega_lite_export(flights):
    spec = to_chart_spec(execute(q_bar_avg_city(), flights))
    vl = to_vega_lite(spec)
    assert vl["mark"] == "bar"
    assert vl["encoding"]["x"]["type"] == "nominal"
    assert vl["encoding"]["y"]["title"] == "AVG(Delay)"
    pie = VisQuery(Mark.PIE, Encoding("City", "Delay", Aggregate.SUM),
                   Transform(group_field="City"))
    vp = to_vega_lite(to_chart_spec(execute(pie, flights)))
    assert vp["mark"] == "arc" and "theta" in vp["encoding"]
