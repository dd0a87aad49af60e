"""The trainable classification head: an expandable softmax layer.

The head starts as a copy of the exported final layer of the pretrained
network (never zeros or random values) and grows one weight row plus one
bias cell whenever a label it has never seen arrives. Rows keep arrival
order: seed order first, then discovery order. Growth never rewrites an
existing row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, ShapeError
from .frozen import HeadSeed
from .linalg import FLOAT, argmax_tiebreak, as_vec, mat_vec_affine, softmax

DEFAULT_MAX_CLASSES = 64


@dataclass
class Prediction:
    probabilities: np.ndarray  # softmax over current classes
    predicted_label: str
    raw_logits: np.ndarray


@dataclass
class OLLayer:
    """Weights (n x m), biases (n), and the label registry, all mutable.

    `known_at_start` is the seed class count p; it never changes and marks
    the boundary the v2 strategies refuse to update below.
    """

    weights: np.ndarray
    biases: np.ndarray
    labels: list[str]
    known_at_start: int
    max_classes: int = DEFAULT_MAX_CLASSES
    _rows: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        n, m = self.weights.shape
        if self.biases.shape != (n,) or len(self.labels) != n:
            raise ShapeError(
                f"head rows ({n}), biases ({self.biases.shape[0]}) and "
                f"labels ({len(self.labels)}) disagree"
            )
        self._rows = {label: i for i, label in enumerate(self.labels)}
        if len(self._rows) != n:
            raise ValueError(f"labels are not distinct: {self.labels}")
        if n > self.max_classes:
            raise CapacityError(f"{n} classes exceeds the cap of {self.max_classes}")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    def row_of(self, label: str):
        return self._rows.get(label)


def init_from_seed(seed: HeadSeed, max_classes: int = DEFAULT_MAX_CLASSES) -> OLLayer:
    """Head initialized as an exact copy of the exported final layer."""
    return OLLayer(
        weights=seed.weights.astype(FLOAT).copy(),
        biases=seed.biases.astype(FLOAT).copy(),
        labels=list(seed.labels),
        known_at_start=seed.n,
        max_classes=max_classes,
    )


def head_seed_from_layer(layer: OLLayer) -> HeadSeed:
    """Snapshot the current head as a seed (checkpointing, warm starts)."""
    return HeadSeed(layer.weights.copy(), layer.biases.copy(), list(layer.labels))


def empty_head_seed(feature_len: int) -> HeadSeed:
    """A 0-class seed: the head is then built entirely from the stream."""
    if feature_len < 1:
        raise ShapeError(f"feature_len must be >= 1, got {feature_len}")
    return HeadSeed(
        np.zeros((0, feature_len), dtype=FLOAT), np.zeros(0, dtype=FLOAT), []
    )


def ensure_class(layer: OLLayer, label: str) -> tuple[int, bool]:
    """Row index for `label`, appending a zero row/bias cell if it is new.

    Returns (row, was_new). Idempotent for known labels; raises
    CapacityError instead of growing past `max_classes`.
    """
    row = layer.row_of(label)
    if row is not None:
        return row, False
    if layer.n >= layer.max_classes:
        raise CapacityError(
            f"cannot add class {label!r}: head already holds "
            f"{layer.n}/{layer.max_classes} classes"
        )
    layer.weights = np.concatenate(
        [layer.weights, np.zeros((1, layer.m), dtype=FLOAT)]
    )
    layer.biases = np.concatenate([layer.biases, np.zeros(1, dtype=FLOAT)])
    layer.labels.append(label)
    layer._rows[label] = layer.n - 1
    return layer.n - 1, True


def predict_with(weights: np.ndarray, biases: np.ndarray, labels: list[str],
                 features: np.ndarray) -> Prediction:
    """Affine + softmax + lowest-index-tiebreak argmax over given weights."""
    logits = mat_vec_affine(weights, features, biases)
    probs = softmax(logits)
    return Prediction(
        probabilities=probs,
        predicted_label=labels[argmax_tiebreak(probs)],
        raw_logits=logits,
    )


def infer(layer: OLLayer, features: np.ndarray) -> Prediction:
    features = as_vec(features, "features")
    return predict_with(layer.weights, layer.biases, layer.labels, features)


# Bytes per float32 parameter; the accounting is analytic (OL structures
# only), so absolute numbers are comparable between strategies here but
# not with any particular device's process-level footprint.
_BYTES = 4


def memory_bytes(layer: OLLayer, strategy_kind: str) -> int:
    """Analytic footprint of the head plus one strategy's auxiliary state.

    Base layer: 4*(n*m + n). Auxiliary storage: nothing for tinyol and
    tinyol_v2; a full shadow layer for tinyol_batches, lwf, lwf_batches,
    and cwr; a (n-p)-row shadow for tinyol_v2_batches; cwr additionally
    keeps one 4-byte counter per class.
    """
    kind = str(strategy_kind)
    n, m, p = layer.n, layer.m, layer.known_at_start
    base = _BYTES * (n * m + n)
    if kind in ("tinyol", "tinyol_v2"):
        aux = 0
    elif kind in ("tinyol_batches", "lwf", "lwf_batches"):
        aux = _BYTES * (n * m + n)
    elif kind == "tinyol_v2_batches":
        aux = _BYTES * ((n - p) * m + (n - p))
    elif kind == "cwr":
        aux = _BYTES * (n * m + n) + _BYTES * n
    else:
        raise ValueError(f"unknown strategy kind {strategy_kind!r}")
    return base + aux
