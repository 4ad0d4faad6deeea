"""Chart-construction domain knowledge, applied twice.

`legal_actions` projects the rules onto a partial query to prune next-layer
operations during search: it is sound (never removes an operation that still
admits a valid completion) but intentionally incomplete, deferring checks that
need executed data. `check_validity` evaluates the full rule set against an
executed chart and yields the binary validity bit consumed by the reward.

Each rule is config-removable; thresholds (20 bars, 10 slices, 3 line points)
are RuleSet attributes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ingest import CATEGORICAL, NUMERIC, TEMPORAL, Table
from .query import (
    Aggregate,
    ChartData,
    LAYER_AGG,
    LAYER_GROUP,
    LAYER_MARK,
    LAYER_X,
    LAYER_Y,
    Mark,
    PartialQuery,
    SKIP,
    VisQuery,
    bin_from_token,
)


@dataclass(frozen=True)
class Rule:
    id: str
    stage: str  # selection | transform | visualization
    description: str


RULES = (
    Rule("bar.x_discrete", "selection",
         "bar x axis must be categorical or temporal, one bar per distinct value"),
    Rule("bar.y_numeric_or_count", "selection",
         "bar y axis must be numeric or a COUNT"),
    Rule("bar.max_categories", "visualization",
         "bar charts render at most 20 bars"),
    Rule("pie.x_categorical", "selection",
         "pie slices come from a categorical x axis, one slice per distinct value"),
    Rule("pie.y_numeric_or_count", "selection",
         "pie y axis must be numeric or a COUNT"),
    Rule("pie.no_avg", "transform",
         "pie charts show proportions, which AVG does not produce"),
    Rule("pie.nonnegative_y", "visualization",
         "pie slice values must not be negative"),
    Rule("pie.min_two_slices", "visualization",
         "pie charts need at least two distinct slices"),
    Rule("pie.max_slices", "visualization",
         "pie charts render at most 10 slices"),
    Rule("line.x_ordered", "selection",
         "line x axis must be orderable (temporal or numeric)"),
    Rule("line.min_points", "visualization",
         "line charts need at least 3 points"),
    Rule("scatter.both_numeric", "selection",
         "scatter needs numeric x and y, raw or as grouped means"),
    Rule("agg.requires_group", "transform",
         "aggregation requires a grouping key (group or bin) rendered on the x "
         "axis for bar/pie/line; raw queries take neither"),
    Rule("agg.categorical_y_count_only", "transform",
         "non-numeric y fields admit only COUNT"),
    Rule("general.x_not_equal_y_unless_scatter", "selection",
         "x and y must differ except for raw scatter self-plots"),
)

_AGG_OPS = tuple(a.value for a in Aggregate)


class RuleSet:
    """An ordered, immutable set of active rules with shared thresholds."""

    def __init__(self, rule_ids: Optional[set] = None,
                 max_bar_categories: int = 20, max_pie_slices: int = 10,
                 min_line_points: int = 3):
        known = {r.id for r in RULES}
        if rule_ids is None:
            rule_ids = known
        unknown = rule_ids - known
        if unknown:
            raise ValueError(f"unknown rule ids: {sorted(unknown)}")
        self.rules = tuple(r for r in RULES if r.id in rule_ids)
        self.active = frozenset(rule_ids)
        self.max_bar_categories = max_bar_categories
        self.max_pie_slices = max_pie_slices
        self.min_line_points = min_line_points

    # --- pruning during search -------------------------------------------

    def legal_actions(self, state: PartialQuery, candidates: list, table: Table) -> list:
        """Subset of next-layer candidates that can still reach a valid query."""
        layer = state.next_layer()
        if layer is None:
            return []
        if layer == LAYER_MARK:
            return [m for m in candidates if self._mark_feasible(m, state, table)]
        mark = state.value(LAYER_MARK)
        if layer == LAYER_X:
            allowed = self._legal_x_fields(mark, state, table)
            return [f for f in candidates if f in allowed]
        if layer == LAYER_Y:
            return [f for f in candidates if self._y_legal(mark, state, f, table)]
        if layer == LAYER_AGG:
            return [a for a in candidates if self._agg_legal(mark, state, a, table)]
        if layer == LAYER_GROUP:
            return [g for g in candidates if self._group_legal(mark, state, g, table)]
        return [op for op in candidates if self._extension_legal(layer, state, op, table)]

    def _count_prunable(self, state: PartialQuery) -> bool:
        # filter/topk can change how many points survive; when they are in the
        # searched grammar, count-based pruning would be unsound
        return "filter" not in state.layers and "topk" not in state.layers

    def _legal_x_fields(self, mark: str, state: PartialQuery, table: Table) -> set:
        prunable = self._count_prunable(state)
        out = set()
        for col in table.columns:
            t = col.semantic_type
            d = col.stats.distinct_count
            if mark == Mark.BAR.value:
                if "bar.x_discrete" in self.active and t not in (CATEGORICAL, TEMPORAL):
                    continue
                if "bar.max_categories" in self.active and prunable and d > self.max_bar_categories:
                    continue
            elif mark == Mark.PIE.value:
                if "pie.x_categorical" in self.active and t != CATEGORICAL:
                    continue
                if "pie.min_two_slices" in self.active and d < 2:
                    continue
                if "pie.max_slices" in self.active and prunable and d > self.max_pie_slices:
                    continue
            elif mark == Mark.LINE.value:
                if "line.x_ordered" in self.active and t not in (TEMPORAL, NUMERIC):
                    continue
            elif mark == Mark.SCATTER.value:
                if "scatter.both_numeric" in self.active and t != NUMERIC:
                    continue
            out.add(col.name)
        return out

    def _mark_feasible(self, mark: str, state: PartialQuery, table: Table) -> bool:
        return bool(self._legal_x_fields(mark, state, table))

    def _y_legal(self, mark: str, state: PartialQuery, field: str, table: Table) -> bool:
        col = table.column(field)
        if col is None:
            return False
        x = state.value(LAYER_X)
        if "general.x_not_equal_y_unless_scatter" in self.active:
            if field == x and mark != Mark.SCATTER.value:
                return False
        if mark == Mark.SCATTER.value and "scatter.both_numeric" in self.active:
            return col.semantic_type == NUMERIC
        return True

    def _agg_legal(self, mark: str, state: PartialQuery, agg: str, table: Table) -> bool:
        x_col = table.column(state.value(LAYER_X))
        y_col = table.column(state.value(LAYER_Y))
        if x_col is None or y_col is None:
            return False
        y_numeric = y_col.semantic_type == NUMERIC
        scatter = mark == Mark.SCATTER.value
        self_plot = state.value(LAYER_X) == state.value(LAYER_Y)
        if "agg.categorical_y_count_only" in self.active and not y_numeric:
            return agg == Aggregate.COUNT.value
        if scatter and "scatter.both_numeric" in self.active:
            if agg not in (Aggregate.NONE.value, Aggregate.AVG.value):
                return False
            if (self_plot and agg != Aggregate.NONE.value
                    and "general.x_not_equal_y_unless_scatter" in self.active):
                return False
            return True
        if agg == Aggregate.AVG.value and mark == Mark.PIE.value and "pie.no_avg" in self.active:
            return False
        if agg in (Aggregate.SUM.value, Aggregate.AVG.value) and not y_numeric:
            return False  # execution would be a type error
        if agg == Aggregate.NONE.value:
            if not y_numeric:
                return False  # raw charts plot y values directly
            if mark == Mark.BAR.value and "bar.x_discrete" in self.active:
                if x_col.stats.unique_ratio < 1.0 or x_col.stats.null_count > 0:
                    return False  # duplicate x values would stack bars per value
            if mark == Mark.PIE.value and "pie.x_categorical" in self.active:
                if x_col.stats.unique_ratio < 1.0 or x_col.stats.null_count > 0:
                    return False
            if mark == Mark.BAR.value and "bar.max_categories" in self.active \
                    and self._count_prunable(state) \
                    and x_col.stats.distinct_count > self.max_bar_categories:
                return False
            if mark == Mark.PIE.value and "pie.max_slices" in self.active \
                    and self._count_prunable(state) \
                    and x_col.stats.distinct_count > self.max_pie_slices:
                return False
        return True

    def _group_legal(self, mark: str, state: PartialQuery, group: str, table: Table) -> bool:
        if table.column(group) is None:
            return False
        if mark == Mark.SCATTER.value:
            return True  # grouped means admit any key; x and y are averaged per group
        return group == state.value(LAYER_X)  # the group key renders on the x axis

    def _extension_legal(self, layer: str, state: PartialQuery, op: str, table: Table) -> bool:
        if op == SKIP:
            return True
        agg = state.value(LAYER_AGG)
        if layer == "bin":
            if agg == Aggregate.NONE.value:
                return False  # rule 'agg.requires_group': raw queries take no bin
            spec = bin_from_token(op)
            x = state.value(LAYER_X)
            x_col = table.column(x)
            return (spec.field == x and x_col is not None
                    and x_col.semantic_type == TEMPORAL
                    and spec.granularity in ("year", "month", "weekday"))
        if layer == "sort":
            return True
        if layer == "topk":
            sort_op = state.value("sort")
            return sort_op is not None and sort_op != SKIP
        if layer == "filter":
            field = op.split("=", 1)[0]
            col = table.column(field)
            return (col is not None and col.semantic_type == CATEGORICAL
                    and col.stats.distinct_count <= 20)
        return False

    # --- validity of executed charts ---------------------------------------

    def check_validity(self, query: VisQuery, table: Table,
                       data: ChartData) -> tuple[int, list]:
        """(s_k, violated rule ids): s_k = 1 iff no active rule is violated."""
        violated = [r.id for r in self.rules if not self._holds(r.id, query, table, data)]
        violated.sort()
        return (1 if not violated else 0), violated

    def _holds(self, rule_id: str, query: VisQuery, table: Table, data: ChartData) -> bool:
        mark = query.mark
        enc = query.encoding
        tr = query.transform
        n = len(data)
        if rule_id == "bar.x_discrete":
            return mark is not Mark.BAR or (
                data.x_type in (CATEGORICAL, TEMPORAL) and data.distinct_x_count() == n)
        if rule_id == "bar.y_numeric_or_count":
            return mark is not Mark.BAR or (
                data.y_type == NUMERIC or enc.aggregate is Aggregate.COUNT)
        if rule_id == "bar.max_categories":
            return mark is not Mark.BAR or n <= self.max_bar_categories
        if rule_id == "pie.x_categorical":
            return mark is not Mark.PIE or (
                data.x_type == CATEGORICAL and data.distinct_x_count() == n)
        if rule_id == "pie.y_numeric_or_count":
            return mark is not Mark.PIE or (
                data.y_type == NUMERIC or enc.aggregate is Aggregate.COUNT)
        if rule_id == "pie.no_avg":
            return mark is not Mark.PIE or enc.aggregate is not Aggregate.AVG
        if rule_id == "pie.nonnegative_y":
            return mark is not Mark.PIE or bool((data.ys >= 0).all())
        if rule_id == "pie.min_two_slices":
            return mark is not Mark.PIE or data.distinct_x_count() >= 2
        if rule_id == "pie.max_slices":
            return mark is not Mark.PIE or n <= self.max_pie_slices
        if rule_id == "line.x_ordered":
            return mark is not Mark.LINE or data.x_type in (TEMPORAL, NUMERIC) \
                or (tr.bin is not None and tr.bin.field == enc.x_field)
        if rule_id == "line.min_points":
            return mark is not Mark.LINE or n >= self.min_line_points
        if rule_id == "scatter.both_numeric":
            return mark is not Mark.SCATTER or (
                data.x_type == NUMERIC and data.y_type == NUMERIC
                and enc.aggregate in (Aggregate.NONE, Aggregate.AVG))
        if rule_id == "agg.requires_group":
            grouped = tr.group_field is not None or tr.bin is not None
            if enc.aggregate is Aggregate.NONE:
                return not grouped
            if not grouped:
                return False
            if mark is Mark.SCATTER:
                return True  # grouped means admit any key
            key_on_x = (tr.group_field == enc.x_field
                        or (tr.bin is not None and tr.bin.field == enc.x_field))
            return key_on_x
        if rule_id == "agg.categorical_y_count_only":
            return data.y_type == NUMERIC or enc.aggregate is Aggregate.COUNT
        if rule_id == "general.x_not_equal_y_unless_scatter":
            if enc.x_field != enc.y_field:
                return True
            return mark is Mark.SCATTER and enc.aggregate is Aggregate.NONE
        raise ValueError(f"unknown rule {rule_id}")

    def describe(self) -> list:
        return [{"id": r.id, "stage": r.stage, "description": r.description}
                for r in self.rules]

    def mark_requirements(self) -> dict:
        """Machine-checkable per-mark constraints for client-side mark switching."""
        return {
            "bar": {"x_types": [CATEGORICAL, TEMPORAL], "max_points": self.max_bar_categories,
                    "distinct_x": True},
            "pie": {"x_types": [CATEGORICAL], "min_points": 2,
                    "max_points": self.max_pie_slices, "y_nonnegative": True,
                    "no_avg": True, "distinct_x": True},
            "line": {"x_types": [TEMPORAL, NUMERIC], "min_points": self.min_line_points},
            "scatter": {"x_types": [NUMERIC], "y_types": [NUMERIC],
                        "aggregates": ["NONE", "AVG"]},
        }


DEFAULT_RULES = RuleSet()


def legal_actions(state: PartialQuery, candidates: list, table: Table,
                  rule_set: RuleSet = DEFAULT_RULES) -> list:
    return rule_set.legal_actions(state, candidates, table)


def check_validity(query: VisQuery, table: Table, data: ChartData,
                   rule_set: RuleSet = DEFAULT_RULES) -> tuple[int, list]:
    return rule_set.check_validity(query, table, data)
