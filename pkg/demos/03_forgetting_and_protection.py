"""
Catastrophic forgetting, and what each strategy buys back
=========================================================

A head that keeps training on whatever arrives will happily overwrite what
it knew. The harshest case is a stream that contains only new classes: the
old rows never see another refresher, every gradient pushes them down, and
the new rows grow into competitors. This demo runs that exact protocol
(train on three classes, then stream three unseen ones) and evaluates the
final head on held-out data from both groups:

  tinyol     no defense; old-class accuracy collapses
  tinyol_v2  freezes rows that existed at stream start; the protection is
             mechanical (old rows are bit-identical afterward) but partial,
             since new rows still compete inside the softmax
  lwf        distills toward a frozen copy's predictions; retains old
             classes best, at the cost of learning new ones more slowly
  cwr        answers from a slowly consolidated running mean; dampens the
             damage without preventing it
"""

import numpy as np

from olbench.datasets import SyntheticSpec, gen_synthetic, resolve_means
from olbench.head import empty_head_seed, infer, init_from_seed
from olbench.linalg import Rng
from olbench.runner import build_stream, fit_head
from olbench.strategies import StrategyConfig

# ---------------------------------------------------------------------------
# Six Gaussian classes sharing one set of pinned means, split into an "old"
# half (pre-training) and a "new" half (the stream). Held-out sets from the
# same means measure what the final head remembers vs what it picked up.
SPREAD = 0.5
full = SyntheticSpec(6, 64, 100, spread=SPREAD, seed=15)
means = resolve_means(full, Rng(full.seed))
old_labels, new_labels = full.class_labels[:3], full.class_labels[3:]


def around(class_means, labels, per_class, seed):
    return gen_synthetic(
        SyntheticSpec(3, 64, per_class, spread=SPREAD, seed=seed,
                      means=class_means, class_labels=labels)
    )


warmup = around(means[:3], old_labels, 300, seed=5)
new_only = around(means[3:], new_labels, 80, seed=16)
old_val = around(means[:3], old_labels, 80, seed=91)
new_val = around(means[3:], new_labels, 80, seed=92)


def accuracy_on(seed_head, ds):
    layer = init_from_seed(seed_head)
    hits = sum(infer(layer, x).predicted_label == lb for x, lb in ds.samples())
    return hits / len(ds.labels)


# ---------------------------------------------------------------------------
# Phase 1: pre-fit the head on the old classes only.
head = fit_head(
    empty_head_seed(64),
    build_stream(warmup, seed=2, pseudo_test=1),
    StrategyConfig("tinyol", learning_rate=0.1),
)
print(f"after warmup: old classes {accuracy_on(head, old_val):.3f}, "
      f"head knows {head.labels}")

# ---------------------------------------------------------------------------
# Phase 2: every strategy faces the identical new-classes-only stream, then
# is judged on held-out data from both halves. Watch the old column.
print(f"\n{'strategy':12s} {'old classes':>11s} {'new classes':>11s}")
for kind in ("tinyol", "tinyol_v2", "lwf", "cwr"):
    trained = fit_head(
        head,
        build_stream(new_only, seed=4, pseudo_test=1),
        StrategyConfig(kind, learning_rate=0.2, batch_size=8),
    )
    print(f"{kind:12s} {accuracy_on(trained, old_val):11.3f} "
          f"{accuracy_on(trained, new_val):11.3f}")

# ---------------------------------------------------------------------------
# The v2 guarantee is mechanical, not statistical: rows that existed at
# stream start are bit-identical afterward. Verify it directly.
from olbench.strategies import TrainEvent, make_state, train_step  # noqa: E402

layer = init_from_seed(head)
before = layer.weights.copy()
cfg = StrategyConfig("tinyol_v2", learning_rate=0.5)
state = make_state(cfg, layer)
rng = np.random.default_rng(0)
for lb in full.class_labels * 50:
    train_step(layer, state, cfg,
               TrainEvent(rng.normal(size=64).astype(np.float32), lb))
print(f"\nv2 after 300 mixed steps: first {before.shape[0]} rows unchanged -> "
      f"{np.array_equal(layer.weights[:before.shape[0]], before)}")
print(f"rows grown for new classes: {layer.n - before.shape[0]}")
