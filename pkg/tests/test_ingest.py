import pytest

from vizscout.errors import (
    DuplicateColumnError,
    EmptyFileError,
    NoRowsError,
    TooManyRowsError,
)
from vizscout.ingest import (
    CATEGORICAL,
    NUMERIC,
    TEMPORAL,
    IngestOptions,
    infer_semantic_type,
    load_table,
    load_table_text,
)

from conftest import make_table


def test_flights_types(flights):
    assert [c.semantic_type for c in flights.columns] == [CATEGORICAL, NUMERIC, TEMPORAL]
    assert flights.row_count == 8
    assert flights.column_names() == ["City", "Delay", "Date"]


def test_flights_stats(flights):
    city = flights.column("City")
    assert city.stats.distinct_count == 3
    assert city.stats.unique_ratio == pytest.approx(3 / 8)
    assert city.stats.null_count == 0
    assert city.stats.sample_values == ("LA", "MSP", "SEA")
    assert city.stats.min is None and city.stats.max is None
    delay = flights.column("Delay")
    assert delay.stats.min == 5.0 and delay.stats.max == 45.0
    assert delay.stats.unique_ratio == 1.0
    date = flights.column("Date")
    assert date.stats.min.year == 2012 and date.stats.max.day == 8


def test_header_only_raises():
    with pytest.raises(NoRowsError):
        load_table_text("a,b,c\n")


def test_empty_file_raises(tmp_path):
    p = tmp_path / "empty.csv"
    p.write_text("")
    with pytest.raises(EmptyFileError):
        load_table(p)


def test_duplicate_headers_raise():
    with pytest.raises(DuplicateColumnError):
        load_table_text("a,b,a\n1,2,3\n")


def test_missing_file_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_table(tmp_path / "nope.csv")


def test_ninety_percent_rule_keeps_numeric_with_null():
    cells = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "oops"]
    t = make_table({"v": cells})
    col = t.column("v")
    assert col.semantic_type == NUMERIC
    assert col.stats.null_count == 1  # the token that failed the winning type
    assert col.stats.distinct_count == 9
    # 2 bad tokens out of 10 drops below the threshold
    t2 = make_table({"v": cells[:-1] + ["oops", "worse"]})
    assert t2.column("v").semantic_type == CATEGORICAL


def test_infer_semantic_type_examples():
    assert infer_semantic_type(["2012-01-01", "2012-02-01"]) == TEMPORAL
    assert infer_semantic_type(["3", "4.5", "-1"]) == NUMERIC
    assert infer_semantic_type(["LA", "MSP", "LA"]) == CATEGORICAL
    assert infer_semantic_type(["", ""]) == CATEGORICAL  # all-null column
    assert infer_semantic_type(["2012/01/03", "2013/05/09"]) == TEMPORAL
    assert infer_semantic_type(["2012-01-01T10:30:00", "2012-01-02 11:00"]) == TEMPORAL
    # bare years and compact digit runs are numbers, not dates
    assert infer_semantic_type(["2012", "2013", "2014"]) == NUMERIC
    assert infer_semantic_type(["20120101", "20130101", "20140101"]) == NUMERIC
    with pytest.raises(ValueError):
        infer_semantic_type([])


def test_ingestion_deterministic(flights_path):
    a = load_table(flights_path)
    b = load_table(flights_path)
    assert a.to_description() == b.to_description()
    assert a.rows() == b.rows()


def test_distinct_le_nonnull_le_rowcount(flights):
    for col in flights.columns:
        non_null = flights.row_count - col.stats.null_count
        assert col.stats.distinct_count <= non_null <= flights.row_count


def test_reingest_fixed_point(flights):
    again = load_table_text(flights.to_csv_text(), name=flights.name)
    assert [c.semantic_type for c in again.columns] == \
        [c.semantic_type for c in flights.columns]
    third = load_table_text(again.to_csv_text(), name=again.name)
    assert third.to_description() == again.to_description()


def test_max_rows_enforced():
    text = "v\n" + "\n".join(str(i) for i in range(20))
    with pytest.raises(TooManyRowsError):
        load_table_text(text, options=IngestOptions(max_rows=10))


def test_tab_delimiter():
    t = load_table_text("a\tb\n1\tx\n2\ty\n", options=IngestOptions(delimiter="\t"))
    assert t.column_names() == ["a", "b"]
    assert t.column("a").semantic_type == NUMERIC


def test_unparseable_cells_become_null():
    t = make_table({"d": ["2012-01-01", "2012-01-02", "2012-01-03",
                          "2012-01-04", "2012-01-05", "2012-01-06",
                          "2012-01-07", "2012-01-08", "2012-01-09", "not a date"]})
    col = t.column("d")
    assert col.semantic_type == TEMPORAL
    assert col.stats.null_count == 1
    assert t.row(9)[0] is None


def test_row_view_shape(flights):
    rows = flights.rows()
    assert len(rows) == flights.row_count
    assert all(len(r) == len(flights.columns) for r in rows)
    assert rows[0] == ("LA", 5.0, rows[0][2])
    assert rows[0][2].isoformat().startswith("2012-01-01")


def test_description_is_json_ready(flights):
    import json
    doc = flights.to_description()
    parsed = json.loads(json.dumps(doc))
    assert parsed["row_count"] == 8
    assert parsed["columns"][2]["stats"]["min"] == "2012-01-01T00:00:00"


def test_quoted_fields_and_commas():
    t = load_table_text('name,"value, usd"\n"a, b",3\nc,4\n')
    assert t.column_names() == ["name", "value, usd"]
    assert t.row(0)[0] == "a, b"


def test_ninety_percent_boundary_exact():
    # 9 of 10 parse => exactly at the threshold, column stays numeric
    cells = ["1"] * 9 + ["x"]
    assert infer_semantic_type(cells) == NUMERIC
    # 8 of 10 misses it
    assert infer_semantic_type(["1"] * 8 + ["x", "y"]) == CATEGORICAL
    # nulls are excluded from the denominator
    assert infer_semantic_type(["1", "2", ""]) == NUMERIC
