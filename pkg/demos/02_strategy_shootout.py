"""
Strategy shootout on a class-incremental stream
===============================================

Seven ways to train the same last layer, benchmarked on a stream that mixes
new instances of known classes with entirely new classes (the head grows a
row whenever an unseen label arrives):

  tinyol             per-sample gradient descent
  tinyol_batches     same gradients, applied as a mini-batch average
  tinyol_v2          updates only rows added after stream start
  tinyol_v2_batches  the batched version of that
  lwf                adds a distillation pull toward a frozen copy's output
  lwf_batches        same, with the copy refreshed every batch
  cwr                trains a throwaway layer, consolidates a running mean

The head is pre-fit on five of eight classes, then every strategy faces the
same 4000-sample stream in which the remaining three classes are novel.
"""

from olbench.datasets import SyntheticSpec, gen_synthetic, resolve_means
from olbench.head import empty_head_seed
from olbench.linalg import Rng
from olbench.report import compare
from olbench.runner import build_stream, fit_head, run_experiment
from olbench.strategies import TABLE_ORDER, StrategyConfig

# ---------------------------------------------------------------------------
# Eight Gaussian classes, 128 features each. The warmup set draws from the
# SAME class means (pinned explicitly) so the pre-fit head actually knows
# the first five classes of the benchmark stream.
full = SyntheticSpec(8, 128, 500, spread=0.5, seed=2024)
means = resolve_means(full, Rng(full.seed))
dataset = gen_synthetic(full)
warmup = gen_synthetic(
    SyntheticSpec(5, 128, 120, spread=0.5, seed=77,
                  means=means[:5], class_labels=full.class_labels[:5])
)

# ---------------------------------------------------------------------------
# Pre-fit: one pass of plain per-sample descent over the warmup stream.
# fit_head returns the head snapshot a strategy would answer with.
head = fit_head(
    empty_head_seed(128),
    build_stream(warmup, seed=11, pseudo_test=1),
    StrategyConfig("tinyol", learning_rate=0.1),
)
print(f"warmed-up head knows: {head.labels}")

# ---------------------------------------------------------------------------
# Every strategy gets the identical stream: same shuffle, same scoring
# region (the last 20%). CWR moves its throwaway layer faster because its
# consolidated answer is a mean over many batches.
plan = build_stream(dataset, seed=42, pseudo_test=0.8)
reports = []
for kind in TABLE_ORDER:
    name = str(kind)
    alpha = 0.2 if name == "cwr" else 0.1
    report = run_experiment(
        None, head, plan, StrategyConfig(kind, learning_rate=alpha, batch_size=16)
    )
    reports.append(report)
    novel = {c: round(report.per_class_accuracy[c], 3) for c in full.class_labels[5:]}
    print(f"{name:18s} overall={report.overall_accuracy:.3f}  novel classes={novel}")

# ---------------------------------------------------------------------------
# The comparison table refuses to mix runs from different datasets and
# keeps one column per run; the markdown renders directly in a README.
table = compare(reports)
print()
print(table.to_markdown())
print("per-class accuracy (%):")
print(table.per_class_csv())
