"""vizscout: ranked chart recommendations with a human-in-the-loop refinement loop.

The pipeline: ingest a delimited table, build the shared-node query graph,
run Monte Carlo graph search scored by the composite reward, offer
natural-language hints whose selection freezes the graph for the next round.
"""

from .ingest import Table, Column, ColumnStats, IngestOptions, load_table, load_table_text, infer_semantic_type
from .query import (
    Aggregate,
    ChartData,
    Encoding,
    Mark,
    PartialQuery,
    Transform,
    VisQuery,
    execute,
    parse_canonical_text,
    to_canonical_text,
    to_chart_spec,
    to_vega_lite,
)
from .graph import GraphConfig, QueryGraph, build_graph, count_tree_equivalent
from .rules import RuleSet, DEFAULT_RULES, check_validity, legal_actions
from .reward import (
    FeatureVector,
    RewardBreakdown,
    RewardModels,
    composite_reward,
    extract_features,
    score_data_features,
    score_preference,
    train_feature_scorer,
)
from .search import (
    SearchConfig,
    SearchResult,
    SearchStats,
    exploration_probability,
    run_search,
    run_tree_baseline,
    select_action,
    ucb_value,
)
from .hints import (
    Hint,
    HintConfig,
    HintSelection,
    decay_coefficient,
    generate_candidate_hints,
    render_hint_text,
    select_top_k,
    select_top_k_exact,
)
from .session import Session, RoundRecord, start_session

__version__ = "0.1.0"
