"""Delimited-file ingestion: semantic type inference and per-column statistics.

A loaded :class:`Table` is immutable and column-oriented. Numeric columns are
float64 arrays (NaN = null), temporal columns are datetime64[ns] (NaT = null),
and categorical columns are dictionary-encoded (int32 codes, -1 = null) so the
query executor can group and aggregate with vectorized numpy operations.

Type inference is majority-vote per column: a column is temporal if >= 90% of
its non-null cells parse under the accepted date formats, else numeric if
>= 90% parse as numbers, else categorical. Cells that fail the column's
winning type are stored as null rather than aborting the load.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator, Optional, Union

import numpy as np
import pandas as pd

from .errors import (
    DuplicateColumnError,
    EmptyFileError,
    NoRowsError,
    TooManyRowsError,
)

CATEGORICAL = "categorical"
NUMERIC = "numeric"
TEMPORAL = "temporal"

TYPE_THRESHOLD = 0.9
DEFAULT_MAX_ROWS = 1_000_000

# Accepted temporal shapes: ISO-8601 date / datetime, and YYYY/MM/DD.
# Bare years ("2012") or compact digit runs deliberately do not match.
_DATE_RE = re.compile(
    r"^\d{4}(-\d{2}-\d{2}([T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?)?|/\d{2}/\d{2})$")

Cell = Union[None, float, str, datetime]


@dataclass(frozen=True)
class IngestOptions:
    delimiter: str = ","
    max_rows: int = DEFAULT_MAX_ROWS
    name: Optional[str] = None


@dataclass(frozen=True)
class ColumnStats:
    distinct_count: int
    unique_ratio: float
    min: Cell
    max: Cell
    null_count: int
    sample_values: tuple


class Column:
    """One ingested column: a fixed semantic type plus typed storage."""

    def __init__(self, name: str, semantic_type: str, stats: ColumnStats,
                 numbers: Optional[np.ndarray] = None,
                 instants: Optional[np.ndarray] = None,
                 codes: Optional[np.ndarray] = None,
                 categories: Optional[list] = None):
        self.name = name
        self.semantic_type = semantic_type
        self.stats = stats
        self.numbers = numbers          # float64, NaN = null
        self.instants = instants        # datetime64[ns], NaT = null
        self.codes = codes              # int64, -1 = null
        self.categories = categories or []
        self._group_cache = None

    def __len__(self) -> int:
        if self.numbers is not None:
            return len(self.numbers)
        if self.instants is not None:
            return len(self.instants)
        return len(self.codes)

    def null_mask(self) -> np.ndarray:
        if self.semantic_type == NUMERIC:
            return np.isnan(self.numbers)
        if self.semantic_type == TEMPORAL:
            return np.isnat(self.instants)
        return self.codes < 0

    def float_values(self) -> np.ndarray:
        """Numeric view (NaN = null); only meaningful for numeric columns."""
        return self.numbers

    def group_codes(self) -> tuple[np.ndarray, list]:
        """(codes, keys): integer group ids per row (-1 = null) and the key per id.

        Computed once and cached; columns are immutable after ingestion.
        """
        if self._group_cache is not None:
            return self._group_cache
        if self.semantic_type == CATEGORICAL:
            self._group_cache = (self.codes, list(self.categories))
        elif self.semantic_type == NUMERIC:
            mask = ~np.isnan(self.numbers)
            codes = np.full(len(self.numbers), -1, dtype=np.int64)
            keys: list = []
            if mask.any():
                uniq, inv = np.unique(self.numbers[mask], return_inverse=True)
                codes[mask] = inv
                keys = [float(v) for v in uniq]
            self._group_cache = (codes, keys)
        else:
            mask = ~np.isnat(self.instants)
            codes = np.full(len(self.instants), -1, dtype=np.int64)
            keys = []
            if mask.any():
                uniq, inv = np.unique(self.instants[mask].astype("int64"),
                                      return_inverse=True)
                codes[mask] = inv
                keys = [pd.Timestamp(v).to_pydatetime()
                        for v in uniq.astype("datetime64[ns]")]
            self._group_cache = (codes, keys)
        return self._group_cache

    def python_value(self, i: int) -> Cell:
        if self.semantic_type == NUMERIC:
            v = self.numbers[i]
            return None if math.isnan(v) else float(v)
        if self.semantic_type == TEMPORAL:
            v = self.instants[i]
            return None if np.isnat(v) else pd.Timestamp(v).to_pydatetime()
        c = self.codes[i]
        return None if c < 0 else self.categories[c]


class Table:
    """Immutable ingested table; safe to share across concurrent readers."""

    def __init__(self, name: str, columns: list[Column], row_count: int):
        names = [c.name for c in columns]
        if len(set(names)) != len(names):
            raise DuplicateColumnError(f"duplicate column names in {names}")
        self.name = name
        self.columns = columns
        self.row_count = row_count
        self._by_name = {c.name: c for c in columns}

    def column(self, name: str) -> Optional[Column]:
        return self._by_name.get(name)

    def column_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def row(self, i: int) -> tuple:
        return tuple(c.python_value(i) for c in self.columns)

    def iter_rows(self) -> Iterator[tuple]:
        for i in range(self.row_count):
            yield self.row(i)

    def rows(self) -> list[tuple]:
        """Row-major view; materializes python cells, O(rows x columns)."""
        return list(self.iter_rows())

    def to_description(self) -> dict:
        """Canonical JSON-ready table description (schema in docs/formats.md)."""
        return {
            "name": self.name,
            "row_count": self.row_count,
            "columns": [
                {
                    "name": c.name,
                    "semantic_type": c.semantic_type,
                    "stats": {
                        "distinct_count": c.stats.distinct_count,
                        "unique_ratio": c.stats.unique_ratio,
                        "min": _json_cell(c.stats.min),
                        "max": _json_cell(c.stats.max),
                        "null_count": c.stats.null_count,
                        "sample_values": [_json_cell(v) for v in c.stats.sample_values],
                    },
                }
                for c in self.columns
            ],
        }

    def to_csv_text(self, delimiter: str = ",") -> str:
        """Serialize back to delimited text (nulls as empty cells, temporals as ISO)."""
        out = [delimiter.join(_csv_escape(c.name, delimiter) for c in self.columns)]
        for row in self.iter_rows():
            out.append(delimiter.join(_csv_escape(_cell_text(v), delimiter) for v in row))
        return "\n".join(out) + "\n"


def _cell_text(v: Cell) -> str:
    if v is None:
        return ""
    if isinstance(v, datetime):
        return v.isoformat(sep="T")
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_escape(s: str, delimiter: str) -> str:
    if delimiter in s or '"' in s or "\n" in s:
        return '"' + s.replace('"', '""') + '"'
    return s


def _json_cell(v: Cell):
    if isinstance(v, datetime):
        return v.isoformat(sep="T")
    return v


def infer_semantic_type(cells: list) -> str:
    """Majority-vote semantic type of raw text cells.

    Empty / None cells are null. Temporal wins if >= 90% of non-null cells
    match an accepted date shape and parse; numeric likewise; the fallback
    is categorical (an all-null column is categorical).
    """
    if not cells:
        raise ValueError("cells must be non-empty")
    s = pd.Series(cells, dtype="object").astype(str).str.strip()
    nulls = (s == "") | pd.Series(cells, dtype="object").isna()
    non_null = int((~nulls).sum())
    if non_null == 0:
        return CATEGORICAL
    if _temporal_parse(s, nulls).notna().sum() >= TYPE_THRESHOLD * non_null:
        return TEMPORAL
    if pd.to_numeric(s.where(~nulls), errors="coerce").notna().sum() >= TYPE_THRESHOLD * non_null:
        return NUMERIC
    return CATEGORICAL


def _temporal_parse(s: pd.Series, nulls: pd.Series) -> pd.Series:
    """Parse cells matching an accepted date shape; everything else is NaT."""
    shaped = s.str.match(_DATE_RE) & ~nulls
    out = pd.Series(pd.NaT, index=s.index, dtype="datetime64[ns]")
    if shaped.any():
        normalized = s[shaped].str.replace("/", "-", regex=False)
        out[shaped] = pd.to_datetime(normalized, format="ISO8601", errors="coerce")
    return out


def _numeric_column(name: str, numbers: np.ndarray) -> Column:
    valid = ~np.isnan(numbers)
    vals = numbers[valid]
    distinct = int(np.unique(vals).size) if vals.size else 0
    stats = ColumnStats(
        distinct_count=distinct,
        unique_ratio=distinct / max(1, int(valid.sum())),
        min=float(vals.min()) if vals.size else None,
        max=float(vals.max()) if vals.size else None,
        null_count=int((~valid).sum()),
        sample_values=_first_distinct([float(v) for v in vals[:64]]),
    )
    return Column(name, NUMERIC, stats, numbers=numbers)


def _build_column(name: str, raw: pd.Series) -> Column:
    """Classify and encode one column.

    Non-numeric columns are dictionary-encoded first so type voting, parsing
    and stats run over the distinct values (weighted by their counts), which
    is equivalent to per-cell voting but touches each distinct string once.
    """
    if raw.dtype == bool:
        raw = raw.astype(str)
    if pd.api.types.is_numeric_dtype(raw):
        # the CSV parser already proved every cell numeric (or missing)
        return _numeric_column(name, raw.to_numpy(dtype="float64", na_value=np.nan))

    n = len(raw)
    raw_codes, uniques = pd.factorize(raw.to_numpy(dtype=object), use_na_sentinel=True)
    remap = np.empty(max(len(uniques), 1), dtype=np.int64)
    merged: dict = {}
    for i, u in enumerate(uniques):
        v = str(u).strip()
        remap[i] = -1 if v == "" else merged.setdefault(v, len(merged))
    values = list(merged)  # distinct non-null cells, first-occurrence order
    live = raw_codes >= 0
    codes = np.full(n, -1, dtype=np.int64)
    codes[live] = remap[raw_codes[live]]

    if not values:
        stats = ColumnStats(0, 0.0, None, None, n, ())
        return Column(name, CATEGORICAL, stats, codes=codes, categories=[])

    counts = np.bincount(codes[codes >= 0], minlength=len(values))
    non_null = int(counts.sum())
    uvals = pd.Series(values, dtype=object)
    no_nulls = pd.Series(False, index=uvals.index)

    parsed_t = _temporal_parse(uvals, no_nulls).to_numpy(dtype="datetime64[ns]")
    t_ok = ~np.isnat(parsed_t)
    if int(counts[t_ok].sum()) >= TYPE_THRESHOLD * non_null:
        instants = np.full(n, np.datetime64("NaT"), dtype="datetime64[ns]")
        ok_rows = (codes >= 0) & t_ok[np.where(codes >= 0, codes, 0)]
        instants[ok_rows] = parsed_t[codes[ok_rows]]
        vals = parsed_t[t_ok].astype("int64")
        distinct = int(np.unique(vals).size)
        valid_rows = int(counts[t_ok].sum())
        samples = _first_distinct([pd.Timestamp(v).to_pydatetime()
                                   for v in parsed_t[t_ok][:64]])
        stats = ColumnStats(
            distinct_count=distinct,
            unique_ratio=distinct / max(1, valid_rows),
            min=pd.Timestamp(vals.min(), unit="ns").to_pydatetime(),
            max=pd.Timestamp(vals.max(), unit="ns").to_pydatetime(),
            null_count=n - valid_rows,
            sample_values=samples,
        )
        return Column(name, TEMPORAL, stats, instants=instants)

    parsed_n = pd.to_numeric(uvals, errors="coerce").to_numpy(dtype="float64")
    n_ok = ~np.isnan(parsed_n)
    if int(counts[n_ok].sum()) >= TYPE_THRESHOLD * non_null:
        numbers = np.full(n, np.nan)
        ok_rows = (codes >= 0) & n_ok[np.where(codes >= 0, codes, 0)]
        numbers[ok_rows] = parsed_n[codes[ok_rows]]
        vals = parsed_n[n_ok]
        distinct = int(np.unique(vals).size)
        valid_rows = int(counts[n_ok].sum())
        stats = ColumnStats(
            distinct_count=distinct,
            unique_ratio=distinct / max(1, valid_rows),
            min=float(vals.min()), max=float(vals.max()),
            null_count=n - valid_rows,
            sample_values=_first_distinct([float(v) for v in vals[:64]]),
        )
        return Column(name, NUMERIC, stats, numbers=numbers)

    stats = ColumnStats(
        distinct_count=len(values),
        unique_ratio=len(values) / max(1, non_null),
        min=None, max=None,
        null_count=n - non_null,
        sample_values=tuple(values[:5]),
    )
    return Column(name, CATEGORICAL, stats, codes=codes, categories=values)


def _first_distinct(values: list, to_py=lambda v: v, limit: int = 5) -> tuple:
    seen: list = []
    for v in values:
        p = to_py(v)
        if p not in seen:
            seen.append(p)
            if len(seen) >= limit:
                break
    return tuple(seen)


def load_table_text(text: str, name: str = "table",
                    options: IngestOptions = IngestOptions()) -> Table:
    """Ingest delimited text (header row required)."""
    if not text.strip():
        raise EmptyFileError("input is empty")
    header_line = text.lstrip("﻿").splitlines()[0]
    import csv as _csv
    import io as _io
    header = next(_csv.reader(_io.StringIO(header_line), delimiter=options.delimiter))
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DuplicateColumnError(f"duplicate header names: {dupes}")
    try:
        # let the C parser type fully-numeric columns; anything mixed or
        # empty-bearing falls back to object and the 90% vote below
        df = pd.read_csv(
            _io.StringIO(text), sep=options.delimiter,
            keep_default_na=False, skip_blank_lines=True, encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise EmptyFileError("input has no parseable content") from exc
    if df.shape[0] == 0:
        raise NoRowsError("file contains a header but no data rows")
    if df.shape[0] > options.max_rows:
        raise TooManyRowsError(f"{df.shape[0]} rows exceeds limit {options.max_rows}")
    columns = [_build_column(str(col).strip(), df[col]) for col in df.columns]
    return Table(options.name or name, columns, int(df.shape[0]))


def load_table(path, options: IngestOptions = IngestOptions()) -> Table:
    """Ingest a delimited file from disk."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(str(p))
    text = p.read_text(encoding="utf-8-sig")
    return load_table_text(text, name=p.stem, options=options)
