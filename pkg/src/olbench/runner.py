"""Stream construction and the test-then-train experiment loop.

The dataset is shuffled once under a seed; from `pseudo_test_start`
onward every sample is first scored against the current model and then
(unless frozen) used for one training step, so the accuracy figure is an
online measurement over the tail of the stream and no sample is wasted.
The boundary comes either from a fraction of the dataset (floor) or from
an explicit sample index.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from .datasets import Dataset, InputKind
from .frozen import FrozenModel, HeadSeed, forward
from .head import DEFAULT_MAX_CLASSES, init_from_seed, memory_bytes
from .linalg import Rng, shuffle
from .report import PhaseTiming, RunReport
from .strategies import (
    StrategyConfig,
    TrainEvent,
    eval_head_seed,
    flush_stream_end,
    make_state,
    predict_for_eval,
    train_step,
)


@dataclass
class StreamPlan:
    """A dataset, a fixed presentation order, and the scoring boundary."""

    dataset: Dataset
    order: list[int]
    pseudo_test_start: int
    seed: int

    def __post_init__(self):
        n = len(self.dataset)
        if sorted(self.order) != list(range(n)):
            raise ValueError("stream order must be a permutation of the dataset")
        if not 0 <= self.pseudo_test_start < n:
            raise ValueError(
                f"pseudo_test_start {self.pseudo_test_start} out of range for "
                f"{n} samples"
            )


def build_stream(dataset: Dataset, seed: int, pseudo_test: float | int = 0.8) -> StreamPlan:
    """Shuffle under `seed`; resolve the boundary.

    `pseudo_test` is either a fraction in (0, 1), floored to an index, or
    an explicit integer index in [0, size).
    """
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot build a stream over an empty dataset")
    if isinstance(pseudo_test, bool):
        raise ValueError("pseudo_test must be a fraction or an index")
    if isinstance(pseudo_test, int):
        start = pseudo_test
        if not 0 <= start < n:
            raise ValueError(f"pseudo-test index {start} out of range for {n} samples")
    else:
        frac = float(pseudo_test)
        if not 0.0 < frac < 1.0:
            raise ValueError(f"pseudo-test fraction must be in (0, 1), got {frac}")
        start = math.floor(n * frac)
    order = shuffle(range(n), Rng(seed))
    return StreamPlan(dataset, order, start, seed)


def _check_compatible(model: FrozenModel | None, seed: HeadSeed, dataset: Dataset) -> None:
    if dataset.kind == InputKind.PRECOMPUTED_FEATURES:
        if model is not None:
            raise ValueError(
                "precomputed-features dataset must run without a frozen model"
            )
        m = dataset.inputs.shape[1]
        if m != seed.m:
            raise ValueError(
                f"dataset feature length {m} != head feature length {seed.m}"
            )
    else:
        if model is None:
            raise ValueError(f"{dataset.kind} dataset requires a frozen model")
        if model.feature_len != seed.m:
            raise ValueError(
                f"model feature length {model.feature_len} != head feature "
                f"length {seed.m}"
            )


def run_experiment(
    model: FrozenModel | None,
    head_seed: HeadSeed,
    plan: StreamPlan,
    cfg: StrategyConfig,
    *,
    max_classes: int = DEFAULT_MAX_CLASSES,
    freeze_during_test: bool = False,
) -> RunReport:
    """Play the stream once; returns the validated report.

    Per sample: frozen forward (or pass-through for feature rows), then in
    the pseudo-test region an evaluation prediction is scored, then the
    training step runs. `freeze_during_test` skips training inside the
    pseudo-test region instead (holdout semantics).
    """
    report, _ = run_experiment_with_head(
        model,
        head_seed,
        plan,
        cfg,
        max_classes=max_classes,
        freeze_during_test=freeze_during_test,
    )
    return report


def run_experiment_with_head(
    model: FrozenModel | None,
    head_seed: HeadSeed,
    plan: StreamPlan,
    cfg: StrategyConfig,
    *,
    max_classes: int = DEFAULT_MAX_CLASSES,
    freeze_during_test: bool = False,
) -> tuple[RunReport, HeadSeed]:
    """run_experiment plus a snapshot of the final evaluation head, for
    checkpointing the trained classifier after the run."""
    dataset = plan.dataset
    _check_compatible(model, head_seed, dataset)
    layer = init_from_seed(head_seed, max_classes)
    state = make_state(cfg, layer)
    start = plan.pseudo_test_start

    confusion: dict[str, dict[str, int]] = {}
    frozen_times: list[float] = []
    step_times: list[float] = []
    clock = time.perf_counter

    for pos, idx in enumerate(plan.order):
        raw = dataset.inputs[idx]
        label = dataset.labels[idx]
        t0 = clock()
        x = forward(model, raw) if model is not None else raw
        frozen_times.append(clock() - t0)
        if pos >= start:
            pred = predict_for_eval(layer, state, cfg.kind, x)
            row = confusion.setdefault(label, {})
            row[pred.predicted_label] = row.get(pred.predicted_label, 0) + 1
            if freeze_during_test:
                continue
        t1 = clock()
        train_step(layer, state, cfg, TrainEvent(x, label))
        step_times.append(clock() - t1)
    flush_stream_end(layer, state, cfg)

    axis = list(layer.labels)
    for true_label in confusion:
        if true_label not in axis:
            axis.append(true_label)
    matrix = [[confusion.get(t, {}).get(p, 0) for p in axis] for t in axis]
    scored = len(dataset) - start
    trace = sum(matrix[i][i] for i in range(len(axis)))
    per_class = {}
    for i, label in enumerate(axis):
        row_total = sum(matrix[i])
        if row_total:
            per_class[label] = matrix[i][i] / row_total

    report = RunReport(
        strategy=str(cfg.kind),
        learning_rate=cfg.learning_rate,
        batch_size=cfg.batch_size,
        seed=plan.seed,
        dataset_id=dataset.dataset_id,
        dataset_size=len(dataset),
        pseudo_test_start=start,
        scored=scored,
        freeze_during_test=freeze_during_test,
        class_arrival_order=list(layer.labels),
        confusion_labels=axis,
        confusion=matrix,
        overall_accuracy=trace / scored if scored else 0.0,
        per_class_accuracy=per_class,
        peak_memory_bytes=memory_bytes(layer, cfg.kind),
        frozen_forward_time=PhaseTiming.from_samples(frozen_times),
        ol_step_time=PhaseTiming.from_samples(step_times),
    )
    report.validate()
    return report, eval_head_seed(layer, state, cfg.kind)


def fit_head(
    head_seed: HeadSeed,
    plan: StreamPlan,
    cfg: StrategyConfig,
    *,
    model: FrozenModel | None = None,
    max_classes: int = DEFAULT_MAX_CLASSES,
) -> HeadSeed:
    """Train-only pass over the stream (no scoring); returns the head the
    strategy would answer evaluations with. Used to pre-fit a seed before
    a class-incremental run."""
    dataset = plan.dataset
    _check_compatible(model, head_seed, dataset)
    layer = init_from_seed(head_seed, max_classes)
    state = make_state(cfg, layer)
    for idx in plan.order:
        raw = dataset.inputs[idx]
        x = forward(model, raw) if model is not None else raw
        train_step(layer, state, cfg, TrainEvent(x, dataset.labels[idx]))
    flush_stream_end(layer, state, cfg)
    return eval_head_seed(layer, state, cfg.kind)
