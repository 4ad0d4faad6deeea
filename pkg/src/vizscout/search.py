"""Monte Carlo graph search over the query graph.

Each iteration descends from the root: while every legal child edge has been
tried, the next operation comes from the banded policy (uniformly random over
legal actions with probability p0 * alpha^depth, otherwise the UCB argmax);
at the first untried edge the path expands by one random untried action and
simulates uniformly over legal actions to a complete query. The completed
query executes, earns its composite reward, and the reward backpropagates
along the traversed edges (invalid or failing completions backpropagate 0 so
visit counts stay consistent and the policy learns to avoid dead regions).

`run_tree_baseline` is the same algorithm over an unshared tree (fresh child
objects per path prefix, materialized in the classic expand-all style); it
reports how many nodes it created, the diagnostic behind the graph-vs-tree
node accounting.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import NamedTuple, Optional

from .errors import DeadEndError, ExecError, NoValidQueryError
from .graph import GraphConfig, QueryGraph, layer_operations
from .ingest import Table
from .query import (
    BASE_LAYERS,
    EXTENSION_LAYERS,
    ChartData,
    PartialQuery,
    VisQuery,
    execute,
    to_canonical_text,
)
from .reward import (
    DEFAULT_BETA,
    RewardBreakdown,
    RewardModels,
    score_query,
)
from .rules import DEFAULT_RULES, RuleSet


@dataclass(frozen=True)
class SearchConfig:
    iterations: int = 100
    ucb_c: float = 1.5
    explore_p0: float = 0.9
    explore_alpha: float = 0.5
    top_k: int = 10
    seed: int = 0
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.ucb_c < 0:
            raise ValueError("ucb_c must be >= 0")
        if not (0.0 <= self.explore_p0 <= 1.0):
            raise ValueError("explore_p0 must be in [0, 1]")
        if not (0.0 < self.explore_alpha < 1.0):
            raise ValueError("explore_alpha must be strictly inside (0, 1)")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must be in [0, 1]")


@dataclass
class SearchStats:
    iterations_run: int = 0
    simulations: int = 0
    dead_ends: int = 0
    distinct_queries_seen: int = 0
    wall_time: float = 0.0

    def to_dict(self) -> dict:
        return {"iterations_run": self.iterations_run,
                "simulations": self.simulations,
                "dead_ends": self.dead_ends,
                "distinct_queries_seen": self.distinct_queries_seen,
                "wall_time": self.wall_time}


class Recommendation(NamedTuple):
    query: VisQuery
    breakdown: RewardBreakdown
    data: ChartData


@dataclass
class SearchResult:
    ranked: list
    stats: SearchStats

    def texts(self) -> list:
        return [to_canonical_text(r.query) for r in self.ranked]


def ucb_value(mean: float, child_visits: int, parent_visits: int, c: float) -> float:
    """Upper confidence bound `mean + c * sqrt(2 ln n / n_i)`; unvisited is +inf."""
    if child_visits == 0:
        return math.inf
    return mean + c * math.sqrt(2.0 * math.log(parent_visits) / child_visits)


def exploration_probability(clauses_chosen: int, p0: float, alpha: float) -> float:
    """Depth-decaying random-branch probability `p0 * alpha^n`, clamped to [0, 1]."""
    if clauses_chosen < 0:
        raise ValueError("clause count must be >= 0")
    return min(1.0, max(0.0, p0 * alpha ** clauses_chosen))


def _policy_choice(pairs: list, legal: list, parent_visits: int,
                   state_depth: int, rng: random.Random,
                   config: SearchConfig) -> tuple[str, bool]:
    """The banded action policy over (stats, id, operation) triples.

    `pairs` carries (visit_count, mean_reward, node_id, operation) for every
    legal candidate, in layer order. Returns (operation, used_random_branch).
    """
    p = exploration_probability(state_depth, config.explore_p0, config.explore_alpha)
    if rng.random() < p:
        return legal[rng.randrange(len(legal))], True
    n = max(1, parent_visits)
    best_op = None
    best_val = -math.inf
    for visits, mean, node_id, op in pairs:
        val = ucb_value(mean, visits, n, config.ucb_c)
        if val > best_val:  # ties keep the earlier (lowest-id) candidate
            best_val = val
            best_op = op
    return best_op, False


def select_action_detail(graph: QueryGraph, state: PartialQuery, table: Table,
                         rng: random.Random, config: SearchConfig,
                         rule_set: RuleSet = DEFAULT_RULES) -> tuple[str, bool]:
    """(chosen operation, whether the random branch fired)."""
    node = graph.state_node(state)
    succ = graph.successors(node, state)
    legal = rule_set.legal_actions(state, [n.operation for _, n in succ], table)
    if not legal:
        raise DeadEndError(f"no legal action from {state.clauses}")
    legal_set = set(legal)
    pairs = [(e.visit_count, e.mean_reward, n.id, n.operation)
             for e, n in succ if n.operation in legal_set]
    return _policy_choice(pairs, legal, node.visit_count, state.depth, rng, config)


def select_action(graph: QueryGraph, state: PartialQuery, table: Table,
                  rng: random.Random, config: SearchConfig,
                  rule_set: RuleSet = DEFAULT_RULES) -> str:
    return select_action_detail(graph, state, table, rng, config, rule_set)[0]


class _Evaluator:
    """Executes and scores completed queries, memoized by canonical text."""

    def __init__(self, table: Table, rule_set: RuleSet, models: RewardModels,
                 beta: float):
        self.table = table
        self.rule_set = rule_set
        self.models = models
        self.beta = beta
        self.cache: dict = {}

    def evaluate(self, query: VisQuery) -> tuple:
        text = to_canonical_text(query)
        hit = self.cache.get(text)
        if hit is None:
            try:
                data = execute(query, self.table)
                breakdown = score_query(query, self.table, data, self.rule_set,
                                        self.models, self.beta)
            except ExecError:
                data, breakdown = None, None
            hit = (data, breakdown)
            self.cache[text] = hit
        return (text,) + hit


def run_search(table: Table, graph: QueryGraph,
               rule_set: RuleSet = DEFAULT_RULES,
               reward_models: Optional[RewardModels] = None,
               config: SearchConfig = SearchConfig(),
               evaluator: Optional[_Evaluator] = None) -> SearchResult:
    """Run the full iteration budget and return deduplicated top-k queries."""
    models = reward_models or RewardModels.default()
    ev = evaluator or _Evaluator(table, rule_set, models, config.beta)
    rng = random.Random(config.seed)
    stats = SearchStats()
    results: dict = {}
    started = time.perf_counter()

    for _ in range(config.iterations):
        stats.iterations_run += 1
        state = PartialQuery(layers=graph.layers)
        node = graph.root
        path: list = []
        dead = False

        while not state.complete:
            succ = graph.successors(node, state)
            legal = rule_set.legal_actions(state, [n.operation for _, n in succ], table)
            if not legal:
                dead = True
                break
            legal_set = set(legal)
            live = [(e, n) for e, n in succ if n.operation in legal_set]
            untried = [(e, n) for e, n in live if e.visit_count == 0]
            if untried:
                e, n = untried[rng.randrange(len(untried))]
                path.append(e)
                state = state.extended(state.next_layer(), n.operation)
                node = n
                ok, state = _simulate(graph, table, rule_set, state, node, path, rng)
                if ok:
                    stats.simulations += 1
                else:
                    dead = True
                break
            pairs = [(e.visit_count, e.mean_reward, n.id, n.operation) for e, n in live]
            op, _ = _policy_choice(pairs, [n.operation for _, n in live],
                                   node.visit_count, state.depth, rng, config)
            e, n = next((e, n) for e, n in live if n.operation == op)
            path.append(e)
            state = state.extended(state.next_layer(), op)
            node = n

        if dead:
            stats.dead_ends += 1
            if path:
                graph.backpropagate(path, 0.0)
            continue

        query = state.to_query()
        text, data, breakdown = ev.evaluate(query)
        reward = breakdown.crf if breakdown is not None else 0.0
        graph.backpropagate(path, reward)
        if breakdown is not None and breakdown.s_k == 1 and text not in results:
            results[text] = Recommendation(query, breakdown, data)

    stats.distinct_queries_seen = len(ev.cache)
    stats.wall_time = time.perf_counter() - started
    if (stats.iterations_run > 0 and not results
            and stats.dead_ends == stats.iterations_run):
        raise NoValidQueryError("every search path dead-ended")
    ranked = sorted(results.items(), key=lambda kv: (-kv[1].breakdown.crf, kv[0]))
    return SearchResult([rec for _, rec in ranked[: config.top_k]], stats)


def _simulate(graph: QueryGraph, table: Table, rule_set: RuleSet,
              state: PartialQuery, node, path: list,
              rng: random.Random) -> tuple[bool, PartialQuery]:
    """Uniform random legal descent to completion; (False, prefix) on a dead end."""
    while not state.complete:
        succ = graph.successors(node, state)
        legal = rule_set.legal_actions(state, [n.operation for _, n in succ], table)
        if not legal:
            return False, state
        op = legal[rng.randrange(len(legal))]
        e, n = next((e, n) for e, n in succ if n.operation == op)
        path.append(e)
        state = state.extended(state.next_layer(), op)
        node = n
    return True, state


# --- unshared-tree baseline ---------------------------------------------------

class _TreeNode:
    __slots__ = ("operation", "visit_count", "reward_sum", "children")

    def __init__(self, operation: str):
        self.operation = operation
        self.visit_count = 0
        self.reward_sum = 0.0
        self.children = None  # dict op -> _TreeNode once materialized

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / max(1, self.visit_count)


def run_tree_baseline(table: Table, rule_set: RuleSet = DEFAULT_RULES,
                      reward_models: Optional[RewardModels] = None,
                      config: SearchConfig = SearchConfig(),
                      graph_config: GraphConfig = GraphConfig()) -> tuple:
    """Identical search over an unshared tree; returns (result, created node count).

    Every visited prefix gets its own child objects (one per grammar
    candidate of the next layer, the classic expand-all idiom), so node count
    grows with the number of distinct prefixes instead of staying at 3m + 8.
    """
    models = reward_models or RewardModels.default()
    ev = _Evaluator(table, rule_set, models, config.beta)
    rng = random.Random(config.seed)
    stats = SearchStats()
    results: dict = {}
    root = _TreeNode("")
    created = 0
    ordered_ext = tuple(l for l in EXTENSION_LAYERS if l in graph_config.extension_layers)
    layers = BASE_LAYERS + ordered_ext
    started = time.perf_counter()

    for _ in range(config.iterations):
        stats.iterations_run += 1
        state = PartialQuery(layers=layers)
        node = root
        path = [root]
        dead = False

        while not state.complete:
            if node.children is None:
                ops = layer_operations(state.next_layer(), table, graph_config)
                node.children = {op: _TreeNode(op) for op in ops}
                created += len(node.children)
            legal = rule_set.legal_actions(state, list(node.children), table)
            if not legal:
                dead = True
                break
            untried = [op for op in legal if node.children[op].visit_count == 0]
            if untried:
                op = untried[rng.randrange(len(untried))]
                child = node.children[op]
                path.append(child)
                state = state.extended(state.next_layer(), op)
                node = child
                ok, state, node, more = _tree_simulate(table, rule_set, graph_config,
                                                       state, node, path, rng)
                created += more
                if ok:
                    stats.simulations += 1
                else:
                    dead = True
                break
            pairs = [(node.children[op].visit_count, node.children[op].mean_reward,
                      i, op) for i, op in enumerate(legal)]
            op, _ = _policy_choice(pairs, legal, node.visit_count, state.depth,
                                   rng, config)
            child = node.children[op]
            path.append(child)
            state = state.extended(state.next_layer(), op)
            node = child

        if dead:
            stats.dead_ends += 1
            for t in path:
                t.visit_count += 1
            continue

        query = state.to_query()
        text, data, breakdown = ev.evaluate(query)
        reward = breakdown.crf if breakdown is not None else 0.0
        for t in path:
            t.visit_count += 1
            t.reward_sum += reward
        if breakdown is not None and breakdown.s_k == 1 and text not in results:
            results[text] = Recommendation(query, breakdown, data)

    stats.distinct_queries_seen = len(ev.cache)
    stats.wall_time = time.perf_counter() - started
    if (stats.iterations_run > 0 and not results
            and stats.dead_ends == stats.iterations_run):
        raise NoValidQueryError("every search path dead-ended")
    ranked = sorted(results.items(), key=lambda kv: (-kv[1].breakdown.crf, kv[0]))
    return SearchResult([rec for _, rec in ranked[: config.top_k]], stats), created


def _tree_simulate(table: Table, rule_set: RuleSet, graph_config: GraphConfig,
                   state: PartialQuery, node: _TreeNode, path: list,
                   rng: random.Random) -> tuple:
    created = 0
    while not state.complete:
        if node.children is None:
            ops = layer_operations(state.next_layer(), table, graph_config)
            node.children = {op: _TreeNode(op) for op in ops}
            created += len(node.children)
        legal = rule_set.legal_actions(state, list(node.children), table)
        if not legal:
            return False, state, node, created
        op = legal[rng.randrange(len(legal))]
        child = node.children[op]
        path.append(child)
        state = state.extended(state.next_layer(), op)
        node = child
    return True, state, node, created
