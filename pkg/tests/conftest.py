import random
from pathlib import Path

import pytest

from vizscout.ingest import load_table, load_table_text
from vizscout.query import (
    Aggregate,
    BinSpec,
    Encoding,
    FilterPredicate,
    Mark,
    SortSpec,
    Transform,
    VisQuery,
)

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def flights_path():
    return FIXTURES / "flights.csv"


@pytest.fixture()
def flights(flights_path):
    return load_table(flights_path)


@pytest.fixture()
def city_delay():
    """m=2 slice of the flights data: one categorical, one numeric column."""
    text = "City,Delay\n" + "\n".join(
        f"{c},{d}" for c, d in [("LA", 5), ("MSP", 40), ("SEA", 20), ("LA", 10),
                                ("MSP", 35), ("SEA", 25), ("LA", 6), ("MSP", 45)])
    return load_table_text(text, name="city_delay")


def make_table(columns: dict, name="t"):
    """Build a table from {column: [cell texts]} (empty string = null)."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    lines = [",".join(names)]
    for i in range(n):
        lines.append(",".join(str(columns[c][i]) for c in names))
    return load_table_text("\n".join(lines), name=name)


# --- random query generators ---------------------------------------------------

FIELD_POOL = ("City", "Delay", "Date", "Flight Delay", "sort", 'we"ird', "n(est)ed")


def random_valid_query(rng: random.Random) -> VisQuery:
    """Grammar-valid (not necessarily rule-valid) query for round-trip tests."""
    mark = rng.choice(list(Mark))
    agg = rng.choice(list(Aggregate))
    x = rng.choice(FIELD_POOL)
    y = rng.choice(FIELD_POOL)
    color = rng.choice(FIELD_POOL) if rng.random() < 0.3 else None
    group = rng.choice(FIELD_POOL) if agg is not Aggregate.NONE else None
    bin_spec = None
    if rng.random() < 0.3:
        gran = rng.choice(["year", "month", "weekday", "bucket"])
        width = round(rng.uniform(0.5, 100.0), 3) if gran == "bucket" else None
        bin_spec = BinSpec(rng.choice(FIELD_POOL), gran, width)
    sort = None
    topk = None
    if rng.random() < 0.4:
        sort = SortSpec(rng.choice(["x", "y"]), rng.choice(["asc", "desc"]))
        if rng.random() < 0.5:
            topk = rng.randint(1, 50)
    filt = None
    if rng.random() < 0.3:
        op = rng.choice(["=", "!=", "<", "<=", ">", ">="])
        value = (round(rng.uniform(-100, 100), 4) if rng.random() < 0.5
                 else rng.choice(["LA", "a b", 'qu"ote']))
        filt = FilterPredicate(rng.choice(FIELD_POOL), op, value)
    return VisQuery(mark, Encoding(x, y, agg, color),
                    Transform(group_field=group, bin=bin_spec, sort=sort,
                              topk=topk, filter=filt))


def random_fuzz_query(rng: random.Random, table) -> VisQuery:
    """Complete query over the table's fields (often rule-invalid)."""
    fields = table.column_names() + (["Nope"] if rng.random() < 0.1 else [])
    mark = rng.choice(list(Mark))
    agg = rng.choice(list(Aggregate))
    x = rng.choice(fields)
    y = rng.choice(fields)
    group = rng.choice(fields) if agg is not Aggregate.NONE and rng.random() < 0.9 else None
    sort = SortSpec(rng.choice(["x", "y"]), rng.choice(["asc", "desc"])) \
        if rng.random() < 0.2 else None
    topk = rng.randint(1, 6) if sort and rng.random() < 0.5 else None
    filt = None
    if rng.random() < 0.2:
        col = table.columns[rng.randrange(len(table.columns))]
        if col.semantic_type == "numeric":
            filt = FilterPredicate(col.name, rng.choice(["<", ">=", "="]),
                                   rng.uniform(-10, 50))
        elif col.semantic_type == "categorical" and col.categories:
            filt = FilterPredicate(col.name, "=", rng.choice(col.categories))
    return VisQuery(mark, Encoding(x, y, agg),
                    Transform(group_field=group, sort=sort, topk=topk, filter=filt))


# --- independent execution oracle ------------------------------------------------

def oracle_execute(query: VisQuery, table):
    """Brute-force row-at-a-time group/aggregate.

    Independent of the vectorized executor: plain python dicts over
    table.rows(). Covers the shapes the search emits (no bin/sort/topk).
    Returns {x: [ys]} for raw queries and a list of (x, y) pairs for
    aggregated ones (x values can repeat when the group key is not the x
    axis, so a mapping would lose points).
    """
    idx = {c.name: i for i, c in enumerate(table.columns)}
    rows = table.rows()
    if query.transform.filter is not None:
        f = query.transform.filter
        fi = idx[f.field]
        ops = {"=": lambda a, b: a == b, "!=": lambda a, b: a != b,
               "<": lambda a, b: a < b, "<=": lambda a, b: a <= b,
               ">": lambda a, b: a > b, ">=": lambda a, b: a >= b}
        value = f.value
        rows = [r for r in rows if r[fi] is not None and ops[f.op](r[fi], value)]
    xi, yi = idx[query.encoding.x_field], idx[query.encoding.y_field]
    agg = query.encoding.aggregate
    if agg is Aggregate.NONE:
        out: dict = {}
        for r in rows:
            if r[xi] is not None and r[yi] is not None:
                out.setdefault(r[xi], []).append(r[yi])
        return {x: vals for x, vals in out.items()}
    gi = idx[query.transform.group_field]
    groups: dict = {}
    for r in rows:
        if r[gi] is None:
            continue
        groups.setdefault(r[gi], []).append(r)
    result: list = []
    for key, members in groups.items():
        if agg is Aggregate.COUNT:
            y = float(len(members))
        else:
            ys = [m[yi] for m in members if m[yi] is not None]
            if not ys:
                continue
            y = float(sum(ys)) if agg is Aggregate.SUM else float(sum(ys)) / len(ys)
        if query.transform.group_field != query.encoding.x_field:
            # x values come from the x field: averaged per group when it is
            # not the grouping key
            xs = [m[xi] for m in members if m[xi] is not None]
            if not xs:
                continue
            x = sum(xs) / len(xs)
        else:
            x = key
        result.append((x, y))
    return result
