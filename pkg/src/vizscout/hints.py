"""Natural-language exploration hints over search results.

A hint is a templated sentence bound to a partial-query constraint (e.g.
"Explore Delay over categories or time" pins the y axis to Delay) plus the
top search-result charts consistent with that constraint. Chart rewards are
decayed by log(N_total / N_viz), normalized into [0, crf], so charts shared by
many hints contribute less; selection then greedily packs the k best hints by
average decayed score under a total chart-count budget, with an exhaustive
oracle for small instances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import (
    InapplicableTemplateError,
    RangeError,
    TooLargeError,
)
from .graph import QueryGraph
from .ingest import CATEGORICAL, NUMERIC, TEMPORAL, Table
from .query import (
    LAYER_AGG,
    LAYER_MARK,
    LAYER_X,
    LAYER_Y,
    Aggregate,
    Mark,
    VisQuery,
    to_canonical_text,
)

TEMPLATE_KINDS = (
    "explore_field_y",
    "compare_field_categories",
    "trend_over_time",
    "breakdown_by_chart",
    "focus_aggregate",
)

_TEMPLATES = {
    "explore_field_y": "Explore {field} over categories or time",
    "compare_field_categories": "Compare {field} to different categories",
    "trend_over_time": "Show how {field} changes over time",
    "breakdown_by_chart": "See this data as a {mark} chart",
    "focus_aggregate": "Summarize {field} using {aggregate}",
}


def render_hint_text(template_kind: str, target, table: Optional[Table] = None) -> str:
    """Render a template for its target; rejects inapplicable combinations."""
    if template_kind not in _TEMPLATES:
        raise InapplicableTemplateError(f"unknown template {template_kind!r}")
    if template_kind == "breakdown_by_chart":
        if target not in [m.value for m in Mark]:
            raise InapplicableTemplateError(f"{target!r} is not a chart mark")
        return _TEMPLATES[template_kind].format(mark=target)
    if template_kind == "focus_aggregate":
        if not (isinstance(target, (tuple, list)) and len(target) == 2):
            raise InapplicableTemplateError("focus_aggregate target is (field, aggregate)")
        fieldname, agg = target
        if agg not in (Aggregate.COUNT.value, Aggregate.SUM.value, Aggregate.AVG.value):
            raise InapplicableTemplateError(f"{agg!r} is not a summarizing aggregate")
        if table is not None:
            col = table.column(fieldname)
            if col is None:
                raise InapplicableTemplateError(f"unknown field {fieldname!r}")
            if agg != Aggregate.COUNT.value and col.semantic_type != NUMERIC:
                raise InapplicableTemplateError(f"{agg} needs a numeric field")
        return _TEMPLATES[template_kind].format(field=fieldname, aggregate=agg)
    if not isinstance(target, str):
        raise InapplicableTemplateError("field templates take a field name")
    if table is not None:
        col = table.column(target)
        if col is None:
            raise InapplicableTemplateError(f"unknown field {target!r}")
        if template_kind in ("compare_field_categories", "trend_over_time"):
            if col.semantic_type != NUMERIC:
                raise InapplicableTemplateError(f"{template_kind} needs a numeric field")
        if template_kind == "trend_over_time":
            if not any(c.semantic_type == TEMPORAL for c in table.columns):
                raise InapplicableTemplateError("table has no temporal column")
        if template_kind == "compare_field_categories":
            if not any(c.semantic_type == CATEGORICAL and c.name != target
                       for c in table.columns):
                raise InapplicableTemplateError("table has no categorical column")
    return _TEMPLATES[template_kind].format(field=target)


@dataclass
class Hint:
    id: str
    template_kind: str
    target: object          # field name, mark, or (field, aggregate)
    text: str
    constraints: tuple      # ((layer, frozenset of operations), ...)
    visualizations: list    # [(VisQuery, decayed reward)], sorted by reward desc

    @property
    def cost(self) -> int:
        return len(self.visualizations)

    @property
    def total_reward(self) -> float:
        return sum(r for _, r in self.visualizations)

    @property
    def avg_score(self) -> float:
        return self.total_reward / self.cost if self.cost else 0.0

    def query_texts(self) -> list:
        return [to_canonical_text(q) for q, _ in self.visualizations]

    def to_payload(self) -> dict:
        target = self.target if isinstance(self.target, str) else "|".join(self.target)
        return {
            "id": self.id,
            "text": self.text,
            "kind": self.template_kind,
            "target": target,
            "cost": self.cost,
            "avg_score": self.avg_score,
            "visualizations": self.query_texts(),
            "constraints": [[layer, sorted(keep)] for layer, keep in self.constraints],
        }


@dataclass
class HintSelection:
    chosen: list
    total_reward: float
    total_cost: int
    k: int
    budget: int


@dataclass(frozen=True)
class HintConfig:
    k: int = 9
    budget: int = 40
    per_hint_cap: int = 8


def decay_coefficient(n_total: int, n_viz: int) -> float:
    """log(N_total / N_viz): zero when a chart appears in every hint."""
    if not (1 <= n_viz <= n_total):
        raise RangeError(f"need 1 <= n_viz <= n_total, got {n_viz}/{n_total}")
    return math.log(n_total / n_viz)


def _query_layer_value(query: VisQuery, layer: str) -> Optional[str]:
    if layer == LAYER_MARK:
        return query.mark.value
    if layer == LAYER_X:
        return query.encoding.x_field
    if layer == LAYER_Y:
        return query.encoding.y_field
    if layer == LAYER_AGG:
        return query.encoding.aggregate.value
    return query.transform.group_field


def matches_constraints(query: VisQuery, constraints: Sequence) -> bool:
    for layer, keep in constraints:
        if _query_layer_value(query, layer) not in keep:
            return False
    return True


def _candidate_targets(graph: QueryGraph, table: Table) -> list:
    """(template_kind, target, constraints) triples in deterministic order."""
    def node_mean(layer: str, op: str) -> float:
        node = graph.node_for(layer, op)
        return node.mean_reward if node else 0.0

    numeric = [c.name for c in table.columns if c.semantic_type == NUMERIC]
    categorical = [c.name for c in table.columns if c.semantic_type == CATEGORICAL]
    temporal = [c.name for c in table.columns if c.semantic_type == TEMPORAL]
    out = []
    for col in table.columns:
        if node_mean(LAYER_Y, col.name) > 0:
            out.append(("explore_field_y", col.name,
                        ((LAYER_Y, frozenset({col.name})),)))
    for name in numeric:
        if node_mean(LAYER_Y, name) > 0 and any(c != name for c in categorical):
            out.append(("compare_field_categories", name,
                        ((LAYER_Y, frozenset({name})),
                         (LAYER_X, frozenset(c for c in categorical if c != name)))))
    for name in numeric:
        if node_mean(LAYER_Y, name) > 0 and temporal:
            out.append(("trend_over_time", name,
                        ((LAYER_Y, frozenset({name})),
                         (LAYER_X, frozenset(temporal)))))
    for mark in Mark:
        if node_mean(LAYER_MARK, mark.value) > 0:
            out.append(("breakdown_by_chart", mark.value,
                        ((LAYER_MARK, frozenset({mark.value})),)))
    for agg in (Aggregate.COUNT, Aggregate.SUM, Aggregate.AVG):
        if node_mean(LAYER_AGG, agg.value) <= 0:
            continue
        fields = table.column_names() if agg is Aggregate.COUNT else numeric
        for name in fields:
            if node_mean(LAYER_Y, name) > 0:
                out.append(("focus_aggregate", (name, agg.value),
                            ((LAYER_Y, frozenset({name})),
                             (LAYER_AGG, frozenset({agg.value})))))
    return out


def generate_candidate_hints(graph: QueryGraph, search_result, table: Table,
                             per_hint_cap: int = 8) -> list:
    """One hint per applicable (template, high-value target) with its top charts.

    Raw chart scores are the composite rewards from the search; after the hint
    sets are fixed, each chart's reward decays by log(N_total/N_viz) divided
    by log(N_total) so values stay within [0, crf] (a chart in every hint,
    or with only one hint total, contributes 0).
    """
    ranked = list(search_result.ranked)
    if not ranked:
        return []
    raw_hints = []
    for kind, target, constraints in _candidate_targets(graph, table):
        vis = [(rec.query, rec.breakdown.crf) for rec in ranked
               if matches_constraints(rec.query, constraints)][:per_hint_cap]
        if not vis:
            continue
        try:
            text = render_hint_text(kind, target, table)
        except InapplicableTemplateError:
            continue
        target_key = target if isinstance(target, str) else "|".join(target)
        raw_hints.append(Hint(
            id=f"{kind}:{target_key}", template_kind=kind, target=target,
            text=text, constraints=constraints, visualizations=vis))

    n_total = len(raw_hints)
    if n_total == 0:
        return []
    appearances: dict = {}
    for h in raw_hints:
        for q, _ in h.visualizations:
            t = to_canonical_text(q)
            appearances[t] = appearances.get(t, 0) + 1
    norm = math.log(n_total) if n_total > 1 else 0.0
    for h in raw_hints:
        decayed = []
        for q, crf in h.visualizations:
            n_viz = appearances[to_canonical_text(q)]
            if n_viz == n_total or norm == 0.0:
                weight = 0.0
            else:
                weight = decay_coefficient(n_total, n_viz) / norm
            decayed.append((q, crf * weight))
        decayed.sort(key=lambda p: (-p[1], to_canonical_text(p[0])))
        h.visualizations = decayed
    return raw_hints


def select_top_k(hints: Sequence[Hint], k: int, budget: int) -> HintSelection:
    """Greedy budgeted selection: filter, sort by average score, pack.

    Oversized hints are dropped up front; the rest are taken in score order
    while fewer than k are chosen and the chart budget still fits (hints that
    do not fit are skipped, later cheaper ones may still be taken).
    """
    if k < 1 or budget < 1:
        raise ValueError("k and budget must be >= 1")
    valid = [h for h in hints if h.cost <= budget]
    valid.sort(key=lambda h: (-h.avg_score, -h.total_reward, h.id))
    chosen: list = []
    total_cost = 0
    for h in valid:
        if len(chosen) < k and total_cost + h.cost <= budget:
            chosen.append(h)
            total_cost += h.cost
        if len(chosen) == k:
            break
    total = sum(h.total_reward for h in chosen)
    return HintSelection(chosen, total, total_cost, k, budget)


def select_top_k_exact(hints: Sequence[Hint], k: int, budget: int) -> HintSelection:
    """Exhaustive oracle over all subsets with |subset| <= k and cost <= budget."""
    if len(hints) > 20:
        raise TooLargeError(f"{len(hints)} hints exceeds the enumeration cap of 20")
    if k < 1 or budget < 1:
        raise ValueError("k and budget must be >= 1")
    best = None  # (F, sorted id tuple, combo)
    for size in range(0, min(k, len(hints)) + 1):
        for combo in itertools.combinations(hints, size):
            cost = sum(h.cost for h in combo)
            if cost > budget:
                continue
            f = sum(h.total_reward for h in combo)
            ids = tuple(sorted(h.id for h in combo))
            if best is None or f > best[0] + 1e-12 or (
                    abs(f - best[0]) <= 1e-12 and ids < best[1]):
                best = (f, ids, combo)
    chosen = sorted(best[2], key=lambda h: (-h.avg_score, h.id))
    return HintSelection(list(chosen), best[0],
                         sum(h.cost for h in chosen), k, budget)
