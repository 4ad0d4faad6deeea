"""
Swapping in a trained data-feature scorer
=========================================

The default scorer is a deterministic heuristic. Given a graded corpus, a
pairwise-ranking gradient boosted tree ensemble can replace it behind the same
interface; this demo fits one on synthetic grades, saves it, reloads it, and
runs a search with it.
"""

import random
import tempfile
from pathlib import Path

from vizscout import (
    SearchConfig,
    build_graph,
    load_table_text,
    run_search,
    train_feature_scorer,
)
from vizscout.reward import (
    FeatureVector,
    RewardModels,
    UniformPreferenceModel,
    load_scorer,
    load_training_corpus,
    pairwise_accuracy,
    save_model,
    save_training_corpus,
    score_data_features,
)

# A synthetic annotation corpus: charts graded 1 when x and y correlate
# strongly, else 0 (stand-in for human grades).
rng = random.Random(13)
corpus = []
for _ in range(200):
    corr = rng.uniform(-1, 1)
    values = [rng.uniform(0, 3), rng.uniform(0, 3), float(rng.randint(0, 3)),
              float(rng.randint(0, 3)), rng.random(), float(rng.randint(1, 50)),
              float(rng.randint(1, 50)), rng.random(), rng.random(),
              rng.random(), rng.random(), rng.random(), rng.random(), corr]
    corpus.append((FeatureVector(values), 1 if corr > 0.5 else 0))

cut = int(len(corpus) * 0.8)
model = train_feature_scorer(corpus[:cut])
held = corpus[cut:]
acc = pairwise_accuracy([score_data_features(model, fv) for fv, _ in held],
                        [g for _, g in held])
print(f"held-out pairwise accuracy: {acc:.3f}")

# The corpus and the model both have stable file formats.
workdir = Path(tempfile.mkdtemp())
save_training_corpus(corpus, workdir / "corpus.jsonl")
save_model(model, workdir / "scorer.json")
print(f"corpus rows: {len(load_training_corpus(workdir / 'corpus.jsonl'))}")
reloaded = load_scorer(workdir / "scorer.json")

# Any ScorerModel slots into the search unchanged.
CSV = "City,Delay\nLA,5\nMSP,40\nSEA,20\nLA,10\nMSP,35\nSEA,25\nLA,6\nMSP,45\n"
table = load_table_text(CSV, name="flights")
models = RewardModels(reloaded, UniformPreferenceModel())
result = run_search(table, build_graph(table), reward_models=models,
                    config=SearchConfig(iterations=100, seed=1, top_k=3))
print("\ntop charts under the trained scorer:")
for rec in result.ranked:
    from vizscout.query import to_canonical_text
    print(f"  {rec.breakdown.crf:.4f}  {to_canonical_text(rec.query)}")
