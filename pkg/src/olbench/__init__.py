"""Streaming continual-learning benchmark on a frozen feature extractor.

A pretrained network, truncated before its classifier, feeds an
expandable softmax head that is trained one labeled sample at a time by
one of seven update rules; accuracy is measured online over the tail of
the stream (test-then-train).
"""

from .datasets import (
    Dataset,
    InputKind,
    SyntheticSpec,
    as_kind,
    gen_synthetic,
    load_feature_csv,
    load_mnist_idx,
    save_feature_csv,
)
from .errors import CapacityError, FormatError, ShapeError
from .frozen import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    FrozenModel,
    HeadSeed,
    MaxPool2x2,
    Relu,
    Softmax,
    forward,
)
from .head import (
    DEFAULT_MAX_CLASSES,
    OLLayer,
    Prediction,
    empty_head_seed,
    ensure_class,
    head_seed_from_layer,
    infer,
    init_from_seed,
    memory_bytes,
)
from .linalg import Rng, argmax_tiebreak, cross_entropy, mat_vec_affine, shuffle, softmax
from .modelio import load_head_seed, load_model, save_head_seed, save_model
from .report import ComparisonTable, RunReport, compare, load_report, save_report
from .runner import StreamPlan, build_stream, fit_head, run_experiment
from .strategies import (
    TABLE_ORDER,
    StrategyConfig,
    StrategyKind,
    TrainEvent,
    make_state,
    predict_for_eval,
    train_step,
)

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "ComparisonTable",
    "Conv2d",
    "DEFAULT_MAX_CLASSES",
    "Dataset",
    "Dense",
    "Dropout",
    "Flatten",
    "FormatError",
    "FrozenModel",
    "HeadSeed",
    "InputKind",
    "MaxPool2x2",
    "OLLayer",
    "Prediction",
    "Relu",
    "Rng",
    "RunReport",
    "ShapeError",
    "Softmax",
    "StrategyConfig",
    "StrategyKind",
    "StreamPlan",
    "SyntheticSpec",
    "TABLE_ORDER",
    "TrainEvent",
    "argmax_tiebreak",
    "as_kind",
    "build_stream",
    "compare",
    "cross_entropy",
    "empty_head_seed",
    "ensure_class",
    "fit_head",
    "forward",
    "gen_synthetic",
    "head_seed_from_layer",
    "infer",
    "init_from_seed",
    "load_feature_csv",
    "load_head_seed",
    "load_mnist_idx",
    "load_model",
    "load_report",
    "make_state",
    "mat_vec_affine",
    "memory_bytes",
    "predict_for_eval",
    "run_experiment",
    "save_feature_csv",
    "save_head_seed",
    "save_model",
    "save_report",
    "shuffle",
    "softmax",
    "train_step",
]
