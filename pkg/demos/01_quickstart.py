"""
Quickstart: train a softmax head on a feature stream, one sample at a time
==========================================================================

The library keeps a pretrained feature extractor frozen and trains only the
last layer online. This demo skips the extractor entirely (features arrive
precomputed) and walks the smallest useful pipeline: make data, build a
stream, run one strategy, read the report.
"""

import numpy as np

from olbench.datasets import SyntheticSpec, gen_synthetic
from olbench.head import empty_head_seed
from olbench.runner import build_stream, run_experiment
from olbench.strategies import StrategyConfig

# ---------------------------------------------------------------------------
# A toy dataset: three Gaussian clusters in a 16-dimensional feature space.
# Same spec, same bits: everything downstream is reproducible from the seeds.
dataset = gen_synthetic(SyntheticSpec(3, 16, 200, spread=0.4, seed=1))
print(f"dataset: {len(dataset.labels)} samples, classes {dataset.distinct_labels()}")

# ---------------------------------------------------------------------------
# A stream is a shuffled play order plus the index where scoring starts.
# From that index on, each sample is first predicted (and scored), then
# trained on; accuracy therefore measures generalization, not recall.
plan = build_stream(dataset, seed=7, pseudo_test=0.8)
print(f"stream: {len(plan.order)} samples, scoring starts at {plan.pseudo_test_start}")

# ---------------------------------------------------------------------------
# The head starts empty: no classes, just the feature width. Rows appear as
# labels arrive. "tinyol" is plain per-sample gradient descent on the
# softmax cross-entropy.
report = run_experiment(
    None,  # no frozen model: inputs are already feature vectors
    empty_head_seed(16),
    plan,
    StrategyConfig("tinyol", learning_rate=0.1),
)

# ---------------------------------------------------------------------------
# The report carries everything a benchmark table needs.
print(f"\noverall accuracy : {report.overall_accuracy:.3f}")
print(f"per class        : { {k: round(v, 3) for k, v in report.per_class_accuracy.items()} }")
print(f"classes arrived  : {report.class_arrival_order}")
print(f"OL step time     : {1e3 * report.ol_step_time.mean:.4f} ms mean")
print(f"OL memory        : {report.peak_memory_bytes} bytes")
print("\nconfusion (rows = truth):")
print(np.array(report.confusion))
