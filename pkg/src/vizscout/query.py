"""The visualization-query grammar: marks, encodings, transforms.

A query is a value object; `execute` maps (query, table) to chart data with a
fixed transform pipeline: filter -> bin -> group/aggregate -> sort -> topk.
Queries serialize to a canonical text form (see docs/grammar.md) that
round-trips through `parse_canonical_text`, and executed results serialize to
the versioned chart-spec JSON documented in docs/formats.md.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Optional, Union

import numpy as np
import pandas as pd

from .errors import (
    EmptyResultError,
    ParseError,
    TypeMismatchError,
    UnknownFieldError,
)
from .ingest import CATEGORICAL, NUMERIC, TEMPORAL, Column, Table


class Mark(Enum):
    BAR = "bar"
    LINE = "line"
    PIE = "pie"
    SCATTER = "scatter"


class Aggregate(Enum):
    NONE = "NONE"
    COUNT = "COUNT"
    SUM = "SUM"
    AVG = "AVG"


MARKS = tuple(Mark)
AGGREGATES = tuple(Aggregate)

# Canonical layer names, in path order.
LAYER_MARK = "mark"
LAYER_X = "x_field"
LAYER_Y = "y_field"
LAYER_AGG = "aggregate"
LAYER_GROUP = "group_field"
BASE_LAYERS = (LAYER_MARK, LAYER_X, LAYER_Y, LAYER_AGG, LAYER_GROUP)
EXTENSION_LAYERS = ("bin", "sort", "topk", "filter")
SKIP = "skip"


@dataclass(frozen=True)
class FilterPredicate:
    field: str
    op: str           # one of = != < <= > >=
    value: Union[float, str]

    def __post_init__(self):
        if self.op not in ("=", "!=", "<", "<=", ">", ">="):
            raise ValueError(f"bad filter op {self.op!r}")


@dataclass(frozen=True)
class BinSpec:
    field: str
    granularity: str  # year | month | weekday | bucket
    width: Optional[float] = None

    def __post_init__(self):
        if self.granularity not in ("year", "month", "weekday", "bucket"):
            raise ValueError(f"bad bin granularity {self.granularity!r}")
        if self.granularity == "bucket" and not (self.width and self.width > 0):
            raise ValueError("bucket bin requires a positive width")


@dataclass(frozen=True)
class SortSpec:
    by: str           # x | y
    order: str        # asc | desc

    def __post_init__(self):
        if self.by not in ("x", "y") or self.order not in ("asc", "desc"):
            raise ValueError(f"bad sort spec {self.by!r} {self.order!r}")


@dataclass(frozen=True)
class Transform:
    group_field: Optional[str] = None
    bin: Optional[BinSpec] = None
    sort: Optional[SortSpec] = None
    topk: Optional[int] = None
    filter: Optional[FilterPredicate] = None

    def __post_init__(self):
        if self.topk is not None:
            if self.topk < 1:
                raise ValueError("topk must be positive")
            if self.sort is None:
                raise ValueError("topk requires a sort")


@dataclass(frozen=True)
class Encoding:
    x_field: str
    y_field: str
    aggregate: Aggregate = Aggregate.NONE
    color_field: Optional[str] = None


@dataclass(frozen=True)
class VisQuery:
    mark: Mark
    encoding: Encoding
    transform: Transform = Transform()


class PartialQuery:
    """An in-progress query: ordered (layer, operation) clauses.

    Operations are the string tokens used by graph nodes; `to_query` assembles
    the typed VisQuery once the mandatory layers are filled.
    """

    def __init__(self, clauses: tuple = (), layers: tuple = BASE_LAYERS):
        self.clauses = tuple(clauses)
        self.layers = layers

    def value(self, layer: str) -> Optional[str]:
        for lay, op in self.clauses:
            if lay == layer:
                return op
        return None

    def next_layer(self) -> Optional[str]:
        """The layer the next clause must fill, or None when complete."""
        chosen = {lay for lay, _ in self.clauses}
        for lay in self.layers:
            if lay in chosen:
                continue
            if lay == LAYER_GROUP and self.value(LAYER_AGG) == Aggregate.NONE.value:
                continue  # ungrouped queries skip the group layer
            return lay
        return None

    @property
    def complete(self) -> bool:
        return self.next_layer() is None and len(self.clauses) > 0

    @property
    def depth(self) -> int:
        return len(self.clauses)

    def extended(self, layer: str, operation: str) -> "PartialQuery":
        if layer != self.next_layer():
            raise ValueError(f"layer {layer} out of order (expected {self.next_layer()})")
        return PartialQuery(self.clauses + ((layer, operation),), self.layers)

    def to_query(self) -> VisQuery:
        if not self.complete:
            raise ValueError("partial query is incomplete")
        mark = Mark(self.value(LAYER_MARK))
        agg = Aggregate(self.value(LAYER_AGG))
        enc = Encoding(self.value(LAYER_X), self.value(LAYER_Y), agg)
        group = self.value(LAYER_GROUP)
        tr = {"group_field": group}
        bin_op = self.value("bin")
        if bin_op and bin_op != SKIP:
            tr["bin"] = bin_from_token(bin_op)
        sort_op = self.value("sort")
        if sort_op and sort_op != SKIP:
            by, order = sort_op.split(":")
            tr["sort"] = SortSpec(by, order)
        topk_op = self.value("topk")
        if topk_op and topk_op != SKIP:
            tr["topk"] = int(topk_op)
        filt_op = self.value("filter")
        if filt_op and filt_op != SKIP:
            field, value = filt_op.split("=", 1)
            tr["filter"] = FilterPredicate(field, "=", value)
        return VisQuery(mark, enc, Transform(**tr))


def bin_from_token(token: str) -> BinSpec:
    gran, field = token.split("(", 1)
    field = field[:-1]
    if gran == "bucket":
        width, field = field.split(";", 1)
        return BinSpec(field, "bucket", float(width))
    return BinSpec(field, gran)


def bin_token(spec: BinSpec) -> str:
    if spec.granularity == "bucket":
        return f"bucket({spec.width!r};{spec.field})"
    return f"{spec.granularity}({spec.field})"


# --- chart data ---------------------------------------------------------------

class ChartData:
    """Executed chart: axis labels plus (x, y) points, optionally per color.

    `xs` is either a numpy array (raw numeric/temporal axes) or a list of the
    group keys; `points` materializes python pairs on demand. Rule validity of
    the points (e.g. pie slices nonnegative) is the rules module's concern, so
    invalid charts can still be represented and scored zero.
    """

    def __init__(self, mark: Mark, x_field: str, y_field: str, aggregate: Aggregate,
                 x_type: str, y_type: str, xs, ys: np.ndarray,
                 color_field: Optional[str] = None,
                 color_series: Optional[dict] = None):
        self.mark = mark
        self.x_field = x_field
        self.y_field = y_field
        self.aggregate = aggregate
        self.x_type = x_type
        self.y_type = y_type
        self.xs = xs
        self.ys = np.asarray(ys, dtype=np.float64)
        self.color_field = color_field
        self.color_series = color_series
        self._distinct_x: Optional[int] = None

    @property
    def x_label(self) -> str:
        return self.x_field

    @property
    def y_label(self) -> str:
        if self.aggregate is Aggregate.NONE:
            return self.y_field
        return f"{self.aggregate.value}({self.y_field})"

    def x_list(self) -> list:
        """Python cell per point (datetimes for temporal axes)."""
        return _python_x(self.xs)

    @property
    def points(self) -> list:
        return list(zip(self.x_list(), self.ys.tolist()))

    def distinct_x_count(self) -> int:
        if self._distinct_x is None:
            if isinstance(self.xs, np.ndarray):
                self._distinct_x = int(np.unique(self.xs[~_null_like(self.xs)]).size)
            else:
                self._distinct_x = len(set(self.xs))
        return self._distinct_x

    def __len__(self) -> int:
        return len(self.ys)


def _null_like(arr: np.ndarray) -> np.ndarray:
    if np.issubdtype(arr.dtype, np.datetime64):
        return np.isnat(arr)
    if np.issubdtype(arr.dtype, np.floating):
        return np.isnan(arr)
    return np.zeros(len(arr), dtype=bool)


def _python_x(xs) -> list:
    if isinstance(xs, np.ndarray):
        if np.issubdtype(xs.dtype, np.datetime64):
            return [pd.Timestamp(v).to_pydatetime() for v in xs]
        return [float(v) for v in xs]
    return list(xs)


# --- execution ----------------------------------------------------------------

def _require_column(table: Table, name: str) -> Column:
    col = table.column(name)
    if col is None:
        raise UnknownFieldError(f"unknown field {name!r}")
    return col


def _filter_mask(table: Table, pred: FilterPredicate) -> np.ndarray:
    col = _require_column(table, pred.field)
    if col.semantic_type == CATEGORICAL:
        if pred.op not in ("=", "!="):
            raise TypeMismatchError(f"op {pred.op} not supported for categorical field")
        try:
            code = col.categories.index(str(pred.value))
        except ValueError:
            code = -2  # value absent: '=' matches nothing, '!=' matches all non-null
        if pred.op == "=":
            return col.codes == code
        return (col.codes != code) & (col.codes >= 0)
    if col.semantic_type == NUMERIC:
        try:
            rhs = float(pred.value)
        except (TypeError, ValueError) as exc:
            raise TypeMismatchError(f"filter literal {pred.value!r} is not numeric") from exc
        lhs = col.numbers
    else:
        ts = pd.to_datetime(str(pred.value), errors="coerce")
        if ts is pd.NaT:
            raise TypeMismatchError(f"filter literal {pred.value!r} is not a timestamp")
        rhs = np.datetime64(ts)
        lhs = col.instants
    valid = ~col.null_mask()
    with np.errstate(invalid="ignore"):
        if pred.op == "=":
            m = lhs == rhs
        elif pred.op == "!=":
            m = lhs != rhs
        elif pred.op == "<":
            m = lhs < rhs
        elif pred.op == "<=":
            m = lhs <= rhs
        elif pred.op == ">":
            m = lhs > rhs
        else:
            m = lhs >= rhs
    return m & valid


def _binned_codes(col: Column, spec: BinSpec, row_mask: np.ndarray) -> tuple[np.ndarray, list]:
    """Group codes + keys for the binned view of a column (rows outside mask get -1)."""
    n = len(col)
    codes = np.full(n, -1, dtype=np.int64)
    if spec.granularity == "bucket":
        if col.semantic_type != NUMERIC:
            raise TypeMismatchError("bucket bin requires a numeric field")
        vals = col.numbers
        ok = row_mask & ~np.isnan(vals)
        if not ok.any():
            return codes, []
        buckets = np.floor(vals[ok] / spec.width) * spec.width
        uniq, inv = np.unique(buckets, return_inverse=True)
        codes[ok] = inv
        return codes, [float(v) for v in uniq]
    if col.semantic_type != TEMPORAL:
        raise TypeMismatchError(f"{spec.granularity} bin requires a temporal field")
    ok = row_mask & ~np.isnat(col.instants)
    if not ok.any():
        return codes, []
    idx = pd.DatetimeIndex(col.instants[ok])
    if spec.granularity == "year":
        labels = idx.year.to_numpy()
        uniq, inv = np.unique(labels, return_inverse=True)
        keys = [int(v) for v in uniq]
    elif spec.granularity == "month":
        labels = idx.strftime("%Y-%m").to_numpy()
        uniq, inv = np.unique(labels, return_inverse=True)
        keys = [str(v) for v in uniq]
    else:  # weekday, ordered Mon..Sun
        day_idx = idx.weekday.to_numpy()
        uniq, inv = np.unique(day_idx, return_inverse=True)
        names = ["Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"]
        keys = [names[int(v)] for v in uniq]
    codes[ok] = inv
    return codes, keys


def _masked_group_codes(col: Column, row_mask: np.ndarray) -> tuple[np.ndarray, list]:
    """Group codes restricted to surviving rows, keys renumbered densely.

    Key order: first-occurrence for categorical columns, ascending otherwise.
    """
    codes, keys = col.group_codes()
    if row_mask.all():
        return codes, keys  # unfiltered: ingestion order is already canonical
    codes = np.where(row_mask, codes, -1)
    live = codes >= 0
    if not live.any():
        return np.full(len(codes), -1, dtype=np.int64), []
    compact = codes[live]
    used, first_pos = np.unique(compact, return_index=True)
    if col.semantic_type == CATEGORICAL:
        ordered = used[np.argsort(first_pos, kind="stable")]
    else:
        ordered = used  # np.unique is ascending
    lookup = np.full(len(keys), -1, dtype=np.int64)
    lookup[ordered] = np.arange(len(ordered))
    out = np.where(live, lookup[np.where(live, codes, 0)], -1)
    return out, [keys[int(old)] for old in ordered]


def _aggregate_groups(codes: np.ndarray, keys: list, y_col: Column,
                      agg: Aggregate, x_source: Optional[Column]) -> tuple[list, np.ndarray]:
    """Per-group (x, y): x = group key, or mean of x_source when keys are not the x axis."""
    n_groups = len(keys)
    live = codes >= 0
    if n_groups == 0 or not live.any():
        return [], np.empty(0)
    if agg is Aggregate.COUNT:
        ys = np.bincount(codes[live], minlength=n_groups).astype(np.float64)
        point_ok = ys > 0
    else:
        if y_col.semantic_type != NUMERIC:
            raise TypeMismatchError(f"{agg.value} requires a numeric y field")
        yv = y_col.numbers
        ok = live & ~np.isnan(yv)
        sums = np.bincount(codes[ok], weights=yv[ok], minlength=n_groups)
        counts = np.bincount(codes[ok], minlength=n_groups).astype(np.float64)
        point_ok = counts > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            ys = sums if agg is Aggregate.SUM else sums / counts
    if x_source is not None:
        if x_source.semantic_type != NUMERIC:
            raise TypeMismatchError("grouped x must be numeric when it is not the group key")
        xv = x_source.numbers
        okx = live & ~np.isnan(xv)
        xs_sum = np.bincount(codes[okx], weights=xv[okx], minlength=n_groups)
        xs_cnt = np.bincount(codes[okx], minlength=n_groups).astype(np.float64)
        point_ok &= xs_cnt > 0
        with np.errstate(invalid="ignore", divide="ignore"):
            xs_all = xs_sum / xs_cnt
        xs = [float(v) for v, keep in zip(xs_all, point_ok) if keep]
    else:
        xs = [k for k, keep in zip(keys, point_ok) if keep]
    ys = ys[point_ok]
    finite = np.isfinite(ys)
    if not finite.all():
        xs = [x for x, f in zip(xs, finite) if f]
        ys = ys[finite]
    return xs, ys


def _order_by_x(xs, ascending: bool) -> np.ndarray:
    if isinstance(xs, np.ndarray):
        keys = xs.astype("int64") if np.issubdtype(xs.dtype, np.datetime64) else xs
        return (np.argsort(keys, kind="stable") if ascending
                else np.argsort(-keys, kind="stable"))
    order = sorted(range(len(xs)), key=lambda i: _cmp_key(xs[i]), reverse=not ascending)
    return np.asarray(order, dtype=np.int64)


def _cmp_key(x):
    return np.datetime64(x).astype("int64") if isinstance(x, datetime) else x


def _take(xs, order: np.ndarray):
    if isinstance(xs, np.ndarray):
        return xs[order]
    return [xs[int(i)] for i in order]


def _sort_points(xs, ys: np.ndarray, spec: Optional[SortSpec],
                 default_ascending_x: bool):
    """Stable sort (equal keys keep first-occurrence order)."""
    if spec is None:
        if not default_ascending_x or len(ys) == 0:
            return xs, ys
        order = _order_by_x(xs, ascending=True)
    elif spec.by == "y":
        order = (np.argsort(ys, kind="stable") if spec.order == "asc"
                 else np.argsort(-ys, kind="stable"))
    else:
        order = _order_by_x(xs, ascending=spec.order == "asc")
    return _take(xs, order), ys[order]


def execute(query: VisQuery, table: Table) -> ChartData:
    """Execute a complete query; deterministic for a fixed (query, table)."""
    enc, tr = query.encoding, query.transform
    x_col = _require_column(table, enc.x_field)
    y_col = _require_column(table, enc.y_field)
    color_col = _require_column(table, enc.color_field) if enc.color_field else None
    if color_col is not None and color_col.semantic_type != CATEGORICAL:
        raise TypeMismatchError("color field must be categorical")

    row_mask = np.ones(table.row_count, dtype=bool)
    if tr.filter is not None:
        row_mask = _filter_mask(table, tr.filter)

    if enc.aggregate is Aggregate.NONE:
        xs, ys, series = _execute_raw(x_col, y_col, color_col, row_mask)
        default_sort = query.mark is Mark.LINE and tr.sort is None
    else:
        xs, ys, series = _execute_grouped(table, query, x_col, y_col, color_col, row_mask)
        default_sort = False  # grouped keys already come out in canonical order
    xs, ys = _sort_points(xs, ys, tr.sort, default_ascending_x=default_sort)
    if tr.topk is not None:
        xs, ys = xs[: tr.topk], ys[: tr.topk]
    if len(ys) == 0:
        raise EmptyResultError("no rows survive the transform pipeline")
    return ChartData(query.mark, enc.x_field, enc.y_field, enc.aggregate,
                     x_col.semantic_type, y_col.semantic_type, xs, ys,
                     color_field=enc.color_field, color_series=series)


def _execute_raw(x_col: Column, y_col: Column, color_col: Optional[Column],
                 row_mask: np.ndarray):
    if y_col.semantic_type != NUMERIC:
        raise TypeMismatchError("unaggregated y must be numeric")
    ok = row_mask & ~x_col.null_mask() & np.isfinite(y_col.numbers)
    idx = np.flatnonzero(ok)
    ys = y_col.numbers[idx]
    if x_col.semantic_type == NUMERIC:
        xs = x_col.numbers[idx]
    elif x_col.semantic_type == TEMPORAL:
        xs = x_col.instants[idx]
    else:
        cats = x_col.categories
        xs = [cats[c] for c in x_col.codes[idx]]
    series = None
    if color_col is not None:
        series = {}
        x_py = _python_x(xs)
        for j, i in enumerate(idx):
            c = color_col.python_value(int(i))
            if c is None:
                continue
            series.setdefault(c, []).append((x_py[j], float(ys[j])))
    return xs, ys, series


def _execute_grouped(table: Table, query: VisQuery, x_col: Column, y_col: Column,
                     color_col: Optional[Column], row_mask: np.ndarray):
    tr = query.transform
    agg = query.encoding.aggregate
    bin_field = tr.bin.field if tr.bin else None
    key_field = tr.group_field or bin_field
    if key_field is None:
        raise TypeMismatchError(f"{agg.value} requires a group or bin")
    if tr.bin is not None and bin_field == key_field:
        codes, keys = _binned_codes(_require_column(table, bin_field), tr.bin, row_mask)
    else:
        codes, keys = _masked_group_codes(_require_column(table, key_field), row_mask)

    keys_are_x = key_field == query.encoding.x_field or (
        tr.bin is not None and tr.bin.field == query.encoding.x_field)
    x_source = None if keys_are_x else x_col

    xs, ys = _aggregate_groups(codes, keys, y_col, agg, x_source)
    if color_col is None:
        return xs, ys, None
    n_colors = max(len(color_col.categories), 1)
    live = (codes >= 0) & (color_col.codes >= 0)
    combined = np.where(live, codes * n_colors + color_col.codes, -1)
    pair_keys = [(k, c) for k in keys for c in color_col.categories]
    pair_xs, pair_ys = _aggregate_groups(combined, pair_keys, y_col, agg, None)
    series: dict = {}
    for (k, c), y in zip(pair_xs, pair_ys.tolist()):
        series.setdefault(c, []).append((k, y))
    return xs, ys, series


# --- canonical text -----------------------------------------------------------

_BARE_TOKEN = re.compile(r"^[^\s\"()]+$")
_KEYWORDS = {"mark", "encoding", "transform", "x", "y", "color",
             "filter", "bin", "group", "sort", "topk", "by"}


def _field_text(name: str) -> str:
    if _BARE_TOKEN.match(name) and name not in _KEYWORDS:
        return name
    return '"' + name.replace('"', '\\"') + '"'


def to_canonical_text(query: VisQuery) -> str:
    """Canonical text form; round-trips through `parse_canonical_text`."""
    enc, tr = query.encoding, query.transform
    if enc.aggregate is Aggregate.NONE:
        y_term = _field_text(enc.y_field)
    else:
        y_term = f"{enc.aggregate.value}({_field_text(enc.y_field)})"
    parts = ["mark", query.mark.value, "encoding",
             "x", _field_text(enc.x_field), "y", y_term]
    if enc.color_field:
        parts += ["color", _field_text(enc.color_field)]
    parts.append("transform")
    if tr.filter is not None:
        lit = (repr(float(tr.filter.value)) if isinstance(tr.filter.value, (int, float))
               else '"' + str(tr.filter.value).replace('"', '\\"') + '"')
        parts += ["filter", _field_text(tr.filter.field), tr.filter.op, lit]
    if tr.bin is not None:
        gran = (f"bucket({tr.bin.width!r})" if tr.bin.granularity == "bucket"
                else tr.bin.granularity)
        parts += ["bin", _field_text(tr.bin.field), "by", gran]
    if tr.group_field:
        parts += ["group", _field_text(tr.group_field)]
    if tr.sort is not None:
        parts += ["sort", tr.sort.by, tr.sort.order]
    if tr.topk is not None:
        parts += ["topk", str(tr.topk)]
    return " ".join(parts)


def _unquote_field(raw: str) -> str:
    """Inner field of an aggregate term: either bare or a quoted string."""
    if not (raw.startswith('"') and raw.endswith('"') and len(raw) >= 2):
        return raw
    buf = []
    i = 1
    while i < len(raw) - 1:
        if raw[i] == "\\" and i + 1 < len(raw) - 1 and raw[i + 1] == '"':
            buf.append('"')
            i += 2
        else:
            buf.append(raw[i])
            i += 1
    return "".join(buf)


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.items: list[tuple[str, int, bool]] = []  # (token, offset, was_quoted)
        i, n = 0, len(text)
        while i < n:
            if text[i].isspace():
                i += 1
                continue
            start = i
            if text[i] == '"':
                i += 1
                buf = []
                while i < n and text[i] != '"':
                    if text[i] == "\\" and i + 1 < n and text[i + 1] == '"':
                        buf.append('"')
                        i += 2
                    else:
                        buf.append(text[i])
                        i += 1
                if i >= n:
                    raise ParseError(start, "closing quote")
                i += 1
                self.items.append(("".join(buf), start, True))
            else:
                # bare token; a quoted segment inside (as in AVG("a b")) is
                # consumed verbatim, whitespace included
                while i < n and not text[i].isspace():
                    if text[i] == '"':
                        i += 1
                        while i < n and text[i] != '"':
                            i += 2 if text[i] == "\\" and i + 1 < n else 1
                        if i >= n:
                            raise ParseError(start, "closing quote")
                    i += 1
                self.items.append((text[start:i], start, False))
        self.pos = 0

    def peek(self) -> Optional[tuple[str, int, bool]]:
        return self.items[self.pos] if self.pos < len(self.items) else None

    def next(self, expected: str) -> tuple[str, int, bool]:
        item = self.peek()
        if item is None:
            raise ParseError(len(self.text), expected)
        self.pos += 1
        return item

    def expect(self, literal: str):
        tok, off, quoted = self.next(repr(literal))
        if quoted or tok != literal:
            raise ParseError(off, repr(literal))


def parse_canonical_text(text: str) -> VisQuery:
    """Parse the canonical grammar; raises ParseError with offset + expectation."""
    toks = _Tokens(text)
    toks.expect("mark")
    kind, off, _ = toks.next("mark kind")
    try:
        mark = Mark(kind)
    except ValueError:
        raise ParseError(off, "one of bar|line|pie|scatter") from None
    toks.expect("encoding")
    toks.expect("x")
    x_field, _, _ = toks.next("x field")
    toks.expect("y")
    y_tok, y_off, y_quoted = toks.next("y term")
    agg = Aggregate.NONE
    y_field = y_tok
    if not y_quoted:
        m = re.match(r"^(NONE|COUNT|SUM|AVG)\((.*)\)$", y_tok, re.DOTALL)
        if m:
            agg = Aggregate(m.group(1))
            y_field = _unquote_field(m.group(2))
            if agg is Aggregate.NONE:
                raise ParseError(y_off, "bare field for NONE aggregate")
    color = None
    item = toks.peek()
    if item and item[0] == "color" and not item[2]:
        toks.next("color")
        color, _, _ = toks.next("color field")
    toks.expect("transform")
    group = None
    bin_spec = None
    sort_spec = None
    topk = None
    filt = None
    while True:
        item = toks.peek()
        if item is None:
            break
        word, off, quoted = item
        if quoted:
            raise ParseError(off, "transform clause keyword")
        if word == "filter":
            toks.next("filter")
            f_field, _, _ = toks.next("filter field")
            op, op_off, _ = toks.next("filter op")
            if op not in ("=", "!=", "<", "<=", ">", ">="):
                raise ParseError(op_off, "one of = != < <= > >=")
            lit, lit_off, lit_quoted = toks.next("filter literal")
            if lit_quoted:
                value: Union[float, str] = lit
            else:
                try:
                    value = float(lit)
                except ValueError:
                    raise ParseError(lit_off, "number or quoted string") from None
            filt = FilterPredicate(f_field, op, value)
        elif word == "bin":
            toks.next("bin")
            b_field, _, _ = toks.next("bin field")
            toks.expect("by")
            gran, g_off, _ = toks.next("bin granularity")
            m = re.match(r"^bucket\((.+)\)$", gran)
            if m:
                try:
                    bin_spec = BinSpec(b_field, "bucket", float(m.group(1)))
                except ValueError:
                    raise ParseError(g_off, "bucket(width)") from None
            elif gran in ("year", "month", "weekday"):
                bin_spec = BinSpec(b_field, gran)
            else:
                raise ParseError(g_off, "year|month|weekday|bucket(width)")
        elif word == "group":
            toks.next("group")
            group, _, _ = toks.next("group field")
        elif word == "sort":
            toks.next("sort")
            by, by_off, _ = toks.next("sort axis")
            if by not in ("x", "y"):
                raise ParseError(by_off, "x or y")
            order, ord_off, _ = toks.next("sort order")
            if order not in ("asc", "desc"):
                raise ParseError(ord_off, "asc or desc")
            sort_spec = SortSpec(by, order)
        elif word == "topk":
            toks.next("topk")
            n_tok, n_off, _ = toks.next("topk count")
            if not n_tok.isdigit() or int(n_tok) < 1:
                raise ParseError(n_off, "positive integer")
            topk = int(n_tok)
        else:
            raise ParseError(off, "one of filter|bin|group|sort|topk")
    try:
        transform = Transform(group_field=group, bin=bin_spec, sort=sort_spec,
                              topk=topk, filter=filt)
    except ValueError as exc:
        raise ParseError(len(text), str(exc)) from None
    return VisQuery(mark, Encoding(x_field, y_field, agg, color), transform)


# --- chart-spec documents -------------------------------------------------------

SPEC_VERSION = 1


def _spec_cell(v):
    if isinstance(v, datetime):
        return v.isoformat(sep="T")
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def to_chart_spec(data: ChartData) -> dict:
    """The repo's declarative chart-spec JSON (schema in docs/formats.md)."""
    encoding = {
        "x": {"field": data.x_field, "type": data.x_type},
        "y": {"field": data.y_field, "type": data.y_type,
              "aggregate": data.aggregate.value},
    }
    if data.color_field:
        encoding["color"] = {"field": data.color_field, "type": CATEGORICAL}
    rows = []
    total = float(data.ys.sum()) if data.mark is Mark.PIE else 0.0
    if data.color_series:
        for c, pts in data.color_series.items():
            for x, y in pts:
                rows.append({"x": _spec_cell(x), "y": y, "c": c})
    else:
        for x, y in zip(data.x_list(), data.ys.tolist()):
            row = {"x": _spec_cell(x), "y": y}
            if data.mark is Mark.PIE and total != 0.0:
                row["share"] = y / total
            rows.append(row)
    return {
        "spec_version": SPEC_VERSION,
        "mark": data.mark.value,
        "encoding": encoding,
        "data": rows,
    }


_VEGA_TYPES = {CATEGORICAL: "nominal", NUMERIC: "quantitative", TEMPORAL: "temporal"}


def to_vega_lite(spec: dict) -> dict:
    """Best-effort mapping of a chart-spec document to a Vega-Lite document."""
    mark = spec["mark"]
    enc = spec["encoding"]
    values = [dict(row) for row in spec["data"]]
    x_type = _VEGA_TYPES[enc["x"]["type"]]
    y_agg = enc["y"].get("aggregate", "NONE")
    y_title = enc["y"]["field"] if y_agg == "NONE" else f"{y_agg}({enc['y']['field']})"
    if mark == "pie":
        return {
            "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
            "mark": "arc",
            "data": {"values": values},
            "encoding": {
                "theta": {"field": "y", "type": "quantitative", "title": y_title},
                "color": {"field": "x", "type": "nominal", "title": enc["x"]["field"]},
            },
        }
    vl_mark = {"bar": "bar", "line": "line", "scatter": "point"}[mark]
    out = {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "mark": vl_mark,
        "data": {"values": values},
        "encoding": {
            "x": {"field": "x", "type": x_type, "title": enc["x"]["field"]},
            "y": {"field": "y", "type": "quantitative", "title": y_title},
        },
    }
    if "color" in enc:
        out["encoding"]["color"] = {"field": "c", "type": "nominal",
                                    "title": enc["color"]["field"]}
    return out
