"""Composite reward: rule validity x data-feature score x preference score.

The combined value is `s_k * (beta * s_d + (1 - beta) * s_u)`: a chart that
violates any rule scores exactly zero, otherwise the data-feature score s_d
and the user-preference score s_u blend under `beta`.

s_d comes from a pluggable scorer over a fixed 14-component feature vector.
The default scorer is a deterministic heuristic (documented monotonicities,
no corpus needed); `train_feature_scorer` fits a pairwise-ranking gradient
boosted tree ensemble for callers that have a graded corpus. s_u comes from a
preference model over dataset-independent design choices; the default is an
uninformative 0.5, and `fit_preference_model` learns Laplace-smoothed
config frequencies from an interaction log.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DegenerateCorpusError,
    DimensionMismatchError,
    RangeError,
)
from .ingest import NUMERIC, Table
from .query import Aggregate, ChartData, Mark, VisQuery
from .rules import RuleSet, DEFAULT_RULES

FEATURE_NAMES = (
    "x_type", "y_type", "chart_type", "aggregate_kind",
    "row_count", "x_distinct_count", "y_distinct_count",
    "x_unique_ratio", "y_unique_ratio",
    "x_min", "x_max", "y_min", "y_max",
    "xy_correlation",
)
N_FEATURES = len(FEATURE_NAMES)
_IDX = {name: i for i, name in enumerate(FEATURE_NAMES)}

_TYPE_CODES = {"categorical": 0.0, "numeric": 1.0, "temporal": 2.0}
_MARK_CODES = {m.value: float(i) for i, m in enumerate(Mark)}
_AGG_CODES = {a.value: float(i) for i, a in enumerate(Aggregate)}

ROW_SCALE = math.log(1.0 + 1_000_000.0)  # fixed by the ingest row cap


class FeatureVector:
    """Exactly 14 finite reals, ordered per FEATURE_NAMES."""

    def __init__(self, values: Sequence[float]):
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have {N_FEATURES} components")
        if not np.isfinite(arr).all():
            raise ValueError("feature vector components must be finite")
        self.values = arr

    def __len__(self) -> int:
        return N_FEATURES

    def __getitem__(self, i: int) -> float:
        return float(self.values[i])

    def get(self, name: str) -> float:
        return float(self.values[_IDX[name]])

    def to_list(self) -> list:
        return [float(v) for v in self.values]


def _norm_extent(value: float, col_min, col_max) -> float:
    if col_min is None or col_max is None or not isinstance(col_min, float):
        return 0.0
    span = col_max - col_min
    if span <= 0:
        return 0.0
    return min(1.0, max(0.0, (value - col_min) / span))


def extract_features(query: VisQuery, table: Table, data: ChartData) -> FeatureVector:
    """Deterministic 14-vector for an executed chart.

    Type/mark/aggregate ordinals; row count log-scaled against the ingest cap;
    distinct counts over the chart's own points; unique ratios from column
    stats; numeric extremes as positions within the source column's range
    (0 for non-numeric axes); Pearson correlation over numeric point pairs.
    """
    x_col = table.column(query.encoding.x_field)
    y_col = table.column(query.encoding.y_field)
    ys = data.ys
    y_distinct = int(np.unique(ys).size)
    x_distinct = data.distinct_x_count()

    if data.x_type == NUMERIC and len(data) > 0:
        arr_x = np.asarray(data.xs, dtype=np.float64)
        x_min = _norm_extent(float(arr_x.min()), x_col.stats.min, x_col.stats.max)
        x_max = _norm_extent(float(arr_x.max()), x_col.stats.min, x_col.stats.max)
    else:
        arr_x = None
        x_min = x_max = 0.0
    if data.y_type == NUMERIC and len(ys) > 0:
        y_min = _norm_extent(float(ys.min()), y_col.stats.min, y_col.stats.max)
        y_max = _norm_extent(float(ys.max()), y_col.stats.min, y_col.stats.max)
    else:
        y_min = y_max = 0.0

    corr = 0.0
    if arr_x is not None and len(arr_x) >= 2:
        if float(arr_x.std()) > 0 and float(ys.std()) > 0:
            corr = float(np.corrcoef(arr_x, ys)[0, 1])
            corr = max(-1.0, min(1.0, corr))
        elif np.array_equal(arr_x, ys):
            corr = 1.0

    return FeatureVector([
        _TYPE_CODES[data.x_type],
        _TYPE_CODES[data.y_type],
        _MARK_CODES[query.mark.value],
        _AGG_CODES[query.encoding.aggregate.value],
        math.log(1.0 + table.row_count) / ROW_SCALE,
        float(x_distinct),
        float(y_distinct),
        x_col.stats.unique_ratio,
        y_col.stats.unique_ratio,
        x_min, x_max, y_min, y_max,
        corr,
    ])


# --- data-feature scorers ----------------------------------------------------

class ScorerModel:
    """Pure, total, bounded scorer over feature vectors."""

    kind = "abstract"
    version = 1

    def score(self, values: np.ndarray) -> float:
        raise NotImplementedError

    def descriptor(self) -> dict:
        return {"kind": self.kind, "version": self.version}

    def to_document(self) -> dict:
        return {"kind": self.kind, "version": self.version, "payload": self._payload()}

    def _payload(self) -> dict:
        return {}


def score_data_features(model: ScorerModel, fv) -> float:
    """S_d in [0, 1]; rejects vectors of the wrong dimension."""
    values = fv.values if isinstance(fv, FeatureVector) else np.asarray(fv, dtype=np.float64)
    if values.shape != (N_FEATURES,):
        raise DimensionMismatchError(
            f"expected {N_FEATURES} features, got {values.shape}")
    return min(1.0, max(0.0, float(model.score(values))))


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


class HeuristicScorer(ScorerModel):
    """Deterministic fallback scorer with documented shape preferences.

    Contracts (each a strict two-point comparison): more |correlation| is
    better for scatter; pie is best between 2 and 10 slices and degrades
    beyond; bar degrades past 20 categories; temporal x helps line charts;
    aggregated summaries get a mild bonus; single-valued y is penalized.
    """

    kind = "heuristic"

    def score(self, v: np.ndarray) -> float:
        mark = v[_IDX["chart_type"]]
        agg = v[_IDX["aggregate_kind"]]
        x_distinct = v[_IDX["x_distinct_count"]]
        y_distinct = v[_IDX["y_distinct_count"]]
        corr = abs(v[_IDX["xy_correlation"]])
        x_type = v[_IDX["x_type"]]
        s = 0.35
        if mark == _MARK_CODES["scatter"]:
            s += 0.40 * corr
            s += 0.05 * min(1.0, x_distinct / 30.0)
        elif mark == _MARK_CODES["pie"]:
            if 2 <= x_distinct <= 10:
                s += 0.30 * (1.0 - abs(x_distinct - 6.0) / 8.0)
            elif x_distinct > 10:
                s -= 0.15 * min(1.0, (x_distinct - 10.0) / 15.0)
            else:
                s -= 0.20
        elif mark == _MARK_CODES["bar"]:
            if x_distinct <= 20:
                s += 0.25 * (1.0 - abs(x_distinct - 8.0) / 20.0)
            else:
                s -= 0.15 * min(1.0, (x_distinct - 20.0) / 20.0)
        elif mark == _MARK_CODES["line"]:
            if x_type == _TYPE_CODES["temporal"]:
                s += 0.20
            s += 0.10 * min(1.0, x_distinct / 12.0)
        if agg != _AGG_CODES["NONE"]:
            s += 0.10
        if y_distinct <= 1:
            s -= 0.10
        return min(1.0, max(0.0, s))


class LinearScorer(ScorerModel):
    """Sigmoid of a linear form; all-zero weights score 0.5 everywhere."""

    kind = "linear"

    def __init__(self, weights: Sequence[float], bias: float = 0.0):
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (N_FEATURES,):
            raise DimensionMismatchError(f"expected {N_FEATURES} weights")
        self.weights = w
        self.bias = float(bias)

    def score(self, v: np.ndarray) -> float:
        return _sigmoid(float(self.weights @ v) + self.bias)

    def _payload(self) -> dict:
        return {"weights": [float(w) for w in self.weights], "bias": self.bias}


class GbrtScorer(ScorerModel):
    """Sigmoid of a gradient-boosted regression tree ensemble margin."""

    kind = "gbrt"

    def __init__(self, trees: list, learning_rate: float):
        self.trees = trees
        self.learning_rate = float(learning_rate)

    def margin(self, v: np.ndarray) -> float:
        return self.learning_rate * sum(_eval_tree(t, v) for t in self.trees)

    def score(self, v: np.ndarray) -> float:
        return _sigmoid(self.margin(v))

    def _payload(self) -> dict:
        return {"learning_rate": self.learning_rate, "trees": self.trees}


def _eval_tree(node: dict, v: np.ndarray) -> float:
    while "value" not in node:
        node = node["left"] if v[node["feature"]] <= node["threshold"] else node["right"]
    return node["value"]


def _fit_tree(X: np.ndarray, resid: np.ndarray, depth: int) -> dict:
    n = len(resid)
    if depth == 0 or n < 2 or np.allclose(resid, resid[0]):
        return {"value": float(resid.mean())}
    total = resid.sum()
    best = None  # (gain, feature, threshold)
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        rs = resid[order]
        csum = np.cumsum(rs)
        boundaries = np.flatnonzero(xs[:-1] < xs[1:])
        for b in boundaries:
            nl = b + 1
            nr = n - nl
            left_sum = csum[b]
            gain = left_sum * left_sum / nl + (total - left_sum) ** 2 / nr
            if best is None or gain > best[0] + 1e-12:
                best = (gain, f, float((xs[b] + xs[b + 1]) / 2.0))
    if best is None:
        return {"value": float(resid.mean())}
    _, f, thr = best
    mask = X[:, f] <= thr
    return {
        "feature": int(f),
        "threshold": thr,
        "left": _fit_tree(X[mask], resid[mask], depth - 1),
        "right": _fit_tree(X[~mask], resid[~mask], depth - 1),
    }


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    seed: int = 0  # reserved for subsampling variants; training is exact and deterministic


def train_feature_scorer(corpus: Sequence[tuple],
                         config: TrainConfig = TrainConfig()) -> GbrtScorer:
    """Fit a pairwise-ranking GBRT on (features, grade) examples.

    Boosting target: the logistic pairwise gradient over all pairs whose
    grades differ. Deterministic for a fixed corpus (exact greedy splits,
    stable tie-breaks), so retraining reproduces the model file byte for byte.
    """
    if not corpus:
        raise DegenerateCorpusError("empty corpus")
    X = np.asarray([row[0].to_list() if isinstance(row[0], FeatureVector) else row[0]
                    for row in corpus], dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != N_FEATURES:
        raise DimensionMismatchError(f"expected {N_FEATURES} features per example")
    grades = np.asarray([row[1] for row in corpus], dtype=np.float64)
    if np.unique(grades).size < 2:
        raise DegenerateCorpusError("corpus needs at least two distinct grades")
    gi = grades[:, None]
    higher, lower = np.nonzero(gi > gi.T)
    F = np.zeros(len(grades))
    trees = []
    for _ in range(config.n_trees):
        s = F[higher] - F[lower]
        lam = 1.0 / (1.0 + np.exp(np.clip(s, -60, 60)))
        resid = np.zeros(len(grades))
        np.add.at(resid, higher, lam)
        np.add.at(resid, lower, -lam)
        tree = _fit_tree(X, resid, config.max_depth)
        trees.append(tree)
        F += config.learning_rate * np.array([_eval_tree(tree, x) for x in X])
    return GbrtScorer(trees, config.learning_rate)


def pairwise_accuracy(scores: Sequence[float], grades: Sequence[float]) -> float:
    """Fraction of grade-ordered pairs the scores rank correctly (ties count half)."""
    s = np.asarray(scores, dtype=np.float64)
    g = np.asarray(grades, dtype=np.float64)
    hi, lo = np.nonzero(g[:, None] > g[None, :])
    if len(hi) == 0:
        return 0.0
    correct = (s[hi] > s[lo]).sum() + 0.5 * (s[hi] == s[lo]).sum()
    return float(correct / len(hi))


# --- preference models ---------------------------------------------------------

@dataclass(frozen=True)
class VisualizationConfig:
    """Dataset-independent design choices of a chart."""
    mark: str
    aggregate: str
    has_color: bool
    has_topk: bool
    x_type: str
    y_type: str

    def key(self) -> str:
        return "|".join([self.mark, self.aggregate,
                         f"color:{int(self.has_color)}", f"topk:{int(self.has_topk)}",
                         self.x_type, self.y_type])


def config_from_query(query: VisQuery, table: Table) -> VisualizationConfig:
    x_col = table.column(query.encoding.x_field)
    y_col = table.column(query.encoding.y_field)
    return VisualizationConfig(
        mark=query.mark.value,
        aggregate=query.encoding.aggregate.value,
        has_color=query.encoding.color_field is not None,
        has_topk=query.transform.topk is not None,
        x_type=x_col.semantic_type if x_col else "categorical",
        y_type=y_col.semantic_type if y_col else "categorical",
    )


class PreferenceModel:
    kind = "abstract"
    version = 1

    def score(self, config: VisualizationConfig) -> float:
        raise NotImplementedError

    def to_document(self) -> dict:
        return {"kind": self.kind, "version": self.version}


class UniformPreferenceModel(PreferenceModel):
    """Uninformative prior: every design configuration scores 0.5."""

    kind = "uniform"

    def score(self, config: VisualizationConfig) -> float:
        return 0.5


class FrequencyPreferenceModel(PreferenceModel):
    """Laplace-smoothed config frequencies: (count + 1) / (total + vocabulary)."""

    kind = "freq"

    def __init__(self, counts: dict, total: int):
        self.counts = dict(counts)
        self.total = int(total)

    def score(self, config: VisualizationConfig) -> float:
        if self.total == 0:
            return 0.5
        vocab = max(1, len(self.counts))
        return (self.counts.get(config.key(), 0) + 1) / (self.total + vocab)

    def to_document(self) -> dict:
        return {"kind": self.kind, "version": self.version,
                "counts": self.counts, "total": self.total}


def fit_preference_model(configs: Sequence[VisualizationConfig]) -> PreferenceModel:
    if not configs:
        return UniformPreferenceModel()
    counts: dict = {}
    for c in configs:
        counts[c.key()] = counts.get(c.key(), 0) + 1
    return FrequencyPreferenceModel(counts, len(configs))


def score_preference(model: PreferenceModel, config: VisualizationConfig) -> float:
    return min(1.0, max(0.0, float(model.score(config))))


# --- the composite reward -------------------------------------------------------

@dataclass(frozen=True)
class RewardBreakdown:
    s_k: int
    s_d: float
    s_u: float
    beta: float
    crf: float
    violated_rules: tuple = ()

    def to_dict(self) -> dict:
        return {"s_k": self.s_k, "s_d": self.s_d, "s_u": self.s_u,
                "beta": self.beta, "crf": self.crf,
                "violated_rules": list(self.violated_rules)}


def composite_reward(s_k: int, s_d: float, s_u: float, beta: float,
                     violated_rules: tuple = ()) -> RewardBreakdown:
    """Exact combination `s_k * (beta * s_d + (1 - beta) * s_u)`."""
    if s_k not in (0, 1):
        raise RangeError(f"s_k must be 0 or 1, got {s_k}")
    for name, v in (("s_d", s_d), ("s_u", s_u), ("beta", beta)):
        if not (0.0 <= v <= 1.0):
            raise RangeError(f"{name}={v} outside [0, 1]")
    crf = s_k * (beta * s_d + (1.0 - beta) * s_u)
    return RewardBreakdown(s_k, s_d, s_u, beta, crf, tuple(violated_rules))


@dataclass(frozen=True)
class RewardModels:
    scorer: ScorerModel
    preference: PreferenceModel

    @staticmethod
    def default() -> "RewardModels":
        return RewardModels(HeuristicScorer(), UniformPreferenceModel())


DEFAULT_BETA = 0.6


def score_query(query: VisQuery, table: Table, data: ChartData,
                rule_set: RuleSet = DEFAULT_RULES,
                models: Optional[RewardModels] = None,
                beta: float = DEFAULT_BETA) -> RewardBreakdown:
    """Full evaluation of an executed chart."""
    models = models or RewardModels.default()
    s_k, violated = rule_set.check_validity(query, table, data)
    fv = extract_features(query, table, data)
    s_d = score_data_features(models.scorer, fv)
    s_u = score_preference(models.preference, config_from_query(query, table))
    return composite_reward(s_k, s_d, s_u, beta, tuple(violated))


# --- model file IO ---------------------------------------------------------------

def scorer_from_document(doc: dict) -> ScorerModel:
    kind = doc.get("kind")
    payload = doc.get("payload", {})
    if kind == "heuristic":
        return HeuristicScorer()
    if kind == "linear":
        return LinearScorer(payload["weights"], payload.get("bias", 0.0))
    if kind == "gbrt":
        return GbrtScorer(payload["trees"], payload["learning_rate"])
    raise ValueError(f"unknown scorer kind {kind!r}")


def preference_from_document(doc: dict) -> PreferenceModel:
    kind = doc.get("kind")
    if kind == "uniform":
        return UniformPreferenceModel()
    if kind == "freq":
        return FrequencyPreferenceModel(doc.get("counts", {}), doc.get("total", 0))
    raise ValueError(f"unknown preference model kind {kind!r}")


def save_model(model, path) -> None:
    doc = model.to_document()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=None, separators=(",", ":"))


def load_scorer(path) -> ScorerModel:
    with open(path, "r", encoding="utf-8") as fh:
        return scorer_from_document(json.load(fh))


def save_training_corpus(corpus, path) -> None:
    """JSON lines, one {"features": [14 reals], "grade": int} per example."""
    with open(path, "w", encoding="utf-8") as fh:
        for features, grade in corpus:
            row = features.to_list() if isinstance(features, FeatureVector) else list(features)
            fh.write(json.dumps({"features": row, "grade": int(grade)}) + "\n")


def load_training_corpus(path) -> list:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out.append((FeatureVector(doc["features"]), int(doc["grade"])))
    return out
