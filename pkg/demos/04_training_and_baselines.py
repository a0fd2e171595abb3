"""A miniature end-to-end training run plus the baseline lineup.

Trains the actor-critic on a tiny corpus for a few thousand steps (a couple
of minutes), then compares greedy policy rollouts against adaptive degree,
PageRank, betweenness, and random removal.  For the real desk-scale recipe
(2e5 steps, 500 graphs of 30-60 nodes) see scripts/desk_run.py or the
`mind train` CLI; its artifact lives under runs/desk/.
"""
# %%
import numpy as np

from mind.agent import TrainerConfig, train, validate
from mind.dismantler import (
    baseline_adaptive_degree,
    baseline_betweenness,
    baseline_pagerank,
    baseline_random,
    relative_auc,
    rollout,
    RolloutConfig,
)
from mind.encoder import EncoderConfig
from mind.netgen import generate_corpus, make_validation_graphs

# %%
# Tiny corpus and a deliberately small trainer configuration.
corpus, _ = generate_corpus(30, seed=11, n_range=(14, 22), m_choices=(1, 2))
cfg = TrainerConfig(
    total_steps=4000,
    buffer_capacity=4000,
    batch_size=64,
    start_learning=500,
    target_update_frequency=500,
    validation_interval=2000,
    validation_size=4,
    validation_n_range=(14, 22),
    seed=13,
)
result = train(cfg, corpus)
print("validation AUC over training:", [(s, round(v, 3)) for s, v in result.validation_history])

# %%
# Head-to-head on fresh graphs.
test_graphs = make_validation_graphs(seed=99, count=6, n_range=(14, 22))
aucs = {"policy": 0.0, "ad": 0.0, "pr": 0.0, "bc": 0.0, "random": 0.0}
for g in test_graphs:
    aucs["policy"] += rollout(g, result.params, RolloutConfig(threshold=0.1)).auc
    aucs["ad"] += baseline_adaptive_degree(g, 0.1).auc
    aucs["pr"] += baseline_pagerank(g, 0.1).auc
    aucs["bc"] += baseline_betweenness(g, 0.1).auc
    aucs["random"] += baseline_random(g, 0.1, seed=3).auc
aucs = {k: v / len(test_graphs) for k, v in aucs.items()}
rel = relative_auc(aucs, "policy")
print(f"{'method':>8} {'auc':>8} {'relative':>9}")
for k in aucs:
    print(f"{k:>8} {aucs[k]:8.3f} {rel[k]:8.1f}%")
