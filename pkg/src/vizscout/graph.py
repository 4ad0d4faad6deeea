"""Layered shared-node DAG over visualization operations.

One node exists per (layer, operation) pair, so every query path through a
layer reuses the same node objects; this is what keeps the structure at
3m + 8 nodes for an m-column table instead of the 16m^3 a tree needs.
Visit counts and reward sums live on edges (selection reads edge statistics,
since a shared node's value is context-dependent) with node-level aggregates
maintained alongside for diagnostics and hint generation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import (
    BrokenPathError,
    EmptyKeepSetError,
    GraphError,
    NoColumnsError,
    RangeError,
)
from .ingest import CATEGORICAL, TEMPORAL, Table
from .query import (
    AGGREGATES,
    BASE_LAYERS,
    EXTENSION_LAYERS,
    MARKS,
    PartialQuery,
    SKIP,
)

ROOT_LAYER = "root"


def layer_operations(layer: str, table: Table, config: "GraphConfig") -> list:
    """All grammar operations a layer offers for this table, in canonical order."""
    fields = table.column_names()
    if layer == "mark":
        return [m.value for m in MARKS]
    if layer in ("x_field", "y_field", "group_field"):
        return list(fields)
    if layer == "aggregate":
        return [a.value for a in AGGREGATES]
    if layer == "bin":
        ops = [SKIP]
        for col in table.columns:
            if col.semantic_type == TEMPORAL:
                ops += [f"{g}({col.name})" for g in ("year", "month", "weekday")]
        return ops
    if layer == "sort":
        return [SKIP, "x:asc", "x:desc", "y:asc", "y:desc"]
    if layer == "topk":
        return [SKIP] + [str(k) for k in config.topk_choices]
    if layer == "filter":
        ops = [SKIP]
        for col in table.columns:
            if (col.semantic_type == CATEGORICAL
                    and col.stats.distinct_count <= config.filter_max_distinct):
                ops += [f"{col.name}={v}" for v in col.categories]
        return ops
    raise GraphError(f"unknown layer {layer}")


@dataclass
class GraphNode:
    id: int
    layer: str
    operation: str
    visit_count: int = 0
    reward_sum: float = 0.0

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / max(1, self.visit_count)


@dataclass
class GraphEdge:
    from_id: int
    to_id: int
    visit_count: int = 0
    reward_sum: float = 0.0

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / max(1, self.visit_count)


@dataclass(frozen=True)
class GraphConfig:
    extension_layers: tuple = ()          # ordered subset of EXTENSION_LAYERS
    topk_choices: tuple = (5, 10)
    filter_max_distinct: int = 20

    def __post_init__(self):
        bad = [l for l in self.extension_layers if l not in EXTENSION_LAYERS]
        if bad:
            raise ValueError(f"unknown extension layers {bad}")


class QueryGraph:
    """Mutable search graph owned by exactly one search session."""

    def __init__(self, table: Table, config: GraphConfig = GraphConfig()):
        if not table.columns:
            raise NoColumnsError("table has no columns")
        self.table = table
        self.config = config
        ordered_ext = tuple(l for l in EXTENSION_LAYERS if l in config.extension_layers)
        self.layers = BASE_LAYERS + ordered_ext
        self.root = GraphNode(0, ROOT_LAYER, "")
        self.nodes: dict[int, GraphNode] = {0: self.root}
        self.by_layer: dict[str, list[GraphNode]] = {}
        self._ids: dict[tuple, int] = {}
        self.edges: dict[tuple, GraphEdge] = {}
        self.frozen: set[int] = set()
        for layer in self.layers:
            for op in layer_operations(layer, table, config):
                self._add_node(layer, op)

    def _add_node(self, layer: str, operation: str) -> GraphNode:
        node = GraphNode(len(self.nodes), layer, operation)
        self.nodes[node.id] = node
        self.by_layer.setdefault(layer, []).append(node)
        self._ids[(layer, operation)] = node.id
        return node

    @property
    def node_count(self) -> int:
        """Operation nodes only; the virtual root is not counted."""
        return len(self.nodes) - 1

    def node_for(self, layer: str, operation: str) -> Optional[GraphNode]:
        nid = self._ids.get((layer, operation))
        return self.nodes[nid] if nid is not None else None

    def state_node(self, partial: PartialQuery) -> GraphNode:
        if not partial.clauses:
            return self.root
        layer, op = partial.clauses[-1]
        node = self.node_for(layer, op)
        if node is None:
            raise GraphError(f"state references unknown node ({layer}, {op})")
        return node

    def edge(self, from_id: int, to_id: int) -> GraphEdge:
        key = (from_id, to_id)
        e = self.edges.get(key)
        if e is None:
            e = GraphEdge(from_id, to_id)
            self.edges[key] = e
        return e

    def successors(self, node: GraphNode, partial: PartialQuery) -> list:
        """(edge, node) pairs for the next layer, frozen nodes excluded.

        Legality pruning is the rules module's concern, not the graph's.
        """
        if node.id not in self.nodes or self.nodes[node.id] is not node:
            raise GraphError(f"node {node.id} does not belong to this graph")
        next_layer = partial.next_layer()
        if next_layer is None:
            return []
        out = []
        for child in self.by_layer.get(next_layer, []):
            if child.id in self.frozen:
                continue
            out.append((self.edge(node.id, child.id), child))
        return out

    def backpropagate(self, path: list, reward: float) -> None:
        """Add one visit carrying `reward` to every node and edge on `path`.

        `path` must be an edge chain starting at the root; a completed
        simulation passes a root-to-terminal chain, a dead-ended one passes
        the traversed prefix.
        """
        if not (0.0 <= reward <= 1.0):
            raise RangeError(f"reward {reward} outside [0, 1]")
        if not path:
            raise BrokenPathError("empty path")
        if path[0].from_id != self.root.id:
            raise BrokenPathError("path does not start at the root")
        for a, b in zip(path, path[1:]):
            if a.to_id != b.from_id:
                raise BrokenPathError(f"edges {a.to_id}->{b.from_id} are not adjacent")
        for e in path:
            if self.edges.get((e.from_id, e.to_id)) is not e:
                raise BrokenPathError("path contains an edge foreign to this graph")
        self.root.visit_count += 1
        self.root.reward_sum += reward
        for e in path:
            e.visit_count += 1
            e.reward_sum += reward
            node = self.nodes[e.to_id]
            node.visit_count += 1
            node.reward_sum += reward

    def freeze_except(self, layer: str, keep: set) -> None:
        """Freeze every node in `layer` whose operation is outside `keep`.

        Freezing is monotone (never unfreezes), so repeated applications
        intersect; refuses to leave the layer with no live node.
        """
        if layer not in self.by_layer:
            raise GraphError(f"unknown layer {layer}")
        nodes = self.by_layer[layer]
        survivors = [n for n in nodes if n.operation in keep and n.id not in self.frozen]
        if not survivors:
            raise EmptyKeepSetError(
                f"freezing layer {layer!r} to {sorted(keep)} would leave no live node")
        self.frozen.update(n.id for n in nodes if n.operation not in keep)

    def unfreeze_all(self) -> None:
        """Lift every freeze; accumulated edge statistics stay."""
        self.frozen.clear()

    def live_operations(self, layer: str) -> list:
        return [n.operation for n in self.by_layer.get(layer, [])
                if n.id not in self.frozen]

    def dump(self) -> dict:
        """Debug/inspection document: node and edge statistics."""
        return {
            "layers": list(self.layers),
            "nodes": [
                {"id": n.id, "layer": n.layer, "operation": n.operation,
                 "visits": n.visit_count, "mean_reward": n.mean_reward,
                 "frozen": n.id in self.frozen}
                for n in self.nodes.values() if n.id != 0
            ],
            "edges": [
                {"from": e.from_id, "to": e.to_id,
                 "visits": e.visit_count, "mean_reward": e.mean_reward}
                for e in self.edges.values()
            ],
        }


def build_graph(table: Table, config: GraphConfig = GraphConfig()) -> QueryGraph:
    return QueryGraph(table, config)


def count_tree_equivalent(m: int) -> tuple[int, int, float]:
    """(graph_nodes, tree_nodes, reduction) for an m-column table.

    Graph sharing yields 4 marks + m x + m y + 4 aggregates + m groups
    = 3m + 8 nodes; an unshared tree spells out 4 * m^3 * 4 = 16m^3 paths.
    """
    if m < 1:
        raise RangeError("column count must be >= 1")
    graph_nodes = 3 * m + 8
    tree_nodes = 16 * m ** 3
    return graph_nodes, tree_nodes, tree_nodes / graph_nodes
