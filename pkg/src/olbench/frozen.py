"""Inference-only forward pass for the pretrained feature extractor.

The extractor ("frozen model") is an ordered stack of layers that never
trains here; it turns a raw sample (flat vector or image plane) into the
feature vector consumed by the trainable classification head. Supported
layer kinds are the ones the two reference architectures need: dense,
relu, softmax, conv2d, maxpool2x2, flatten, dropout (identity at
inference).

Shapes are validated symbolically when a model is built, so a bad layer
stack fails at load time with the offending layer index, not mid-stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ShapeError
from .linalg import FLOAT, as_mat, as_vec, mat_vec_affine, softmax

# Symbolic shapes: ("flat", n) or ("image", h, w, c).
Shape = tuple


@dataclass
class Dense:
    weights: np.ndarray  # (out, in) float32
    biases: np.ndarray  # (out,) float32
    kind: str = field(default="dense", init=False)

    def __post_init__(self):
        self.weights = as_mat(self.weights, "dense weights")
        self.biases = as_vec(self.biases, "dense biases")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ShapeError(
                f"dense weights rows ({self.weights.shape[0]}) != "
                f"biases length ({self.biases.shape[0]})"
            )


@dataclass
class Relu:
    kind: str = field(default="relu", init=False)


@dataclass
class Softmax:
    kind: str = field(default="softmax", init=False)


@dataclass
class Conv2d:
    filters: np.ndarray  # (kh, kw, in_c, out_c) float32
    biases: np.ndarray  # (out_c,) float32
    padding: str  # "valid" | "same"
    kind: str = field(default="conv2d", init=False)

    def __post_init__(self):
        f = np.asarray(self.filters, dtype=FLOAT)
        if f.ndim != 4 or f.shape[0] < 1 or f.shape[1] < 1:
            raise ShapeError(f"conv2d filters must be (kh, kw, in_c, out_c), got {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("conv2d filters contain non-finite entries")
        self.filters = f
        self.biases = as_vec(self.biases, "conv2d biases")
        if self.biases.shape[0] != f.shape[3]:
            raise ShapeError(
                f"conv2d biases length ({self.biases.shape[0]}) != filter count ({f.shape[3]})"
            )
        if self.padding not in ("valid", "same"):
            raise ValueError(f"conv2d padding must be 'valid' or 'same', got {self.padding!r}")


@dataclass
class MaxPool2x2:
    kind: str = field(default="maxpool2x2", init=False)


@dataclass
class Flatten:
    kind: str = field(default="flatten", init=False)


@dataclass
class Dropout:
    rate: float
    kind: str = field(default="dropout", init=False)

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.rate}")


Layer = Union[Dense, Relu, Softmax, Conv2d, MaxPool2x2, Flatten, Dropout]


@dataclass
class HeadSeed:
    """Exported final-layer weights that initialize the trainable head."""

    weights: np.ndarray  # (n0, m)
    biases: np.ndarray  # (n0,)
    labels: list[str]

    def __post_init__(self):
        # n = 0 is legal (a head bootstrapped purely from the stream), so
        # the empty-rejecting as_mat/as_vec coercions do not apply here.
        w = np.asarray(self.weights, dtype=FLOAT)
        if w.ndim != 2 or w.shape[1] < 1:
            raise ShapeError(f"head weights must be (n, m), m >= 1, got {w.shape}")
        b = np.asarray(self.biases, dtype=FLOAT)
        if b.ndim != 1:
            raise ShapeError(f"head biases must be 1-D, got shape {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("head weights/biases contain non-finite entries")
        self.weights, self.biases = w, b
        self.labels = [str(l) for l in self.labels]
        n = self.weights.shape[0]
        if self.biases.shape[0] != n or len(self.labels) != n:
            raise ShapeError(
                f"head rows ({n}), biases ({self.biases.shape[0]}) and "
                f"labels ({len(self.labels)}) disagree"
            )
        if len(set(self.labels)) != n:
            raise ValueError(f"head labels are not distinct: {self.labels}")

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]


def layer_output_shape(layer: Layer, shape: Shape) -> Shape:
    """Symbolic shape of `layer` applied to `shape`; raises ShapeError."""
    if isinstance(layer, Dense):
        if shape[0] != "flat":
            raise ShapeError(f"dense layer needs a flat input, got {shape}")
        if layer.weights.shape[1] != shape[1]:
            raise ShapeError(
                f"dense weights cols ({layer.weights.shape[1]}) != "
                f"incoming length ({shape[1]})"
            )
        return ("flat", layer.weights.shape[0])
    if isinstance(layer, (Relu, Dropout)):
        return shape
    if isinstance(layer, Softmax):
        if shape[0] != "flat":
            raise ShapeError(f"softmax layer needs a flat input, got {shape}")
        return shape
    if isinstance(layer, Conv2d):
        if shape[0] != "image":
            raise ShapeError(f"conv2d layer needs an image input, got {shape}")
        _, h, w, c = shape
        kh, kw, in_c, out_c = layer.filters.shape
        if in_c != c:
            raise ShapeError(f"conv2d expects {in_c} input channels, got {c}")
        if layer.padding == "same":
            return ("image", h, w, out_c)
        oh, ow = h - kh + 1, w - kw + 1
        if oh < 1 or ow < 1:
            raise ShapeError(f"conv2d kernel {kh}x{kw} larger than input {h}x{w}")
        return ("image", oh, ow, out_c)
    if isinstance(layer, MaxPool2x2):
        if shape[0] != "image":
            raise ShapeError(f"maxpool2x2 layer needs an image input, got {shape}")
        _, h, w, c = shape
        if h < 2 or w < 2:
            raise ShapeError(f"maxpool2x2 needs at least a 2x2 plane, got {h}x{w}")
        return ("image", h // 2, w // 2, c)
    if isinstance(layer, Flatten):
        if shape[0] != "image":
            raise ShapeError(f"flatten layer needs an image input, got {shape}")
        _, h, w, c = shape
        return ("flat", h * w * c)
    raise TypeError(f"unknown layer type: {layer!r}")


@dataclass
class FrozenModel:
    """Validated, immutable-by-convention feature extractor."""

    layers: list[Layer]
    input_shape: Shape
    feature_len: int = field(init=False)

    def __post_init__(self):
        if self.input_shape[0] not in ("flat", "image"):
            raise ShapeError(f"input shape must be flat or image, got {self.input_shape}")
        shape = self.input_shape
        for i, layer in enumerate(self.layers):
            try:
                shape = layer_output_shape(layer, shape)
            except ShapeError as exc:
                raise ShapeError(f"layer {i} ({layer.kind}): {exc}") from exc
        if shape[0] != "flat":
            raise ShapeError(
                f"model must end in a flat feature vector, final shape is {shape}"
            )
        self.feature_len = shape[1]


def conv2d_forward(x: np.ndarray, filters: np.ndarray, biases: np.ndarray,
                   padding: str) -> np.ndarray:
    """Cross-correlation (no kernel flip) of (h, w, c) with (kh, kw, c, f).

    'valid' shrinks by k-1 per axis; 'same' zero-pads to preserve h, w.
    """
    x = np.asarray(x, dtype=FLOAT)
    if x.ndim != 3:
        raise ShapeError(f"conv2d input must be (h, w, c), got shape {x.shape}")
    kh, kw, in_c, out_c = filters.shape
    if x.shape[2] != in_c:
        raise ShapeError(f"conv2d expects {in_c} input channels, got {x.shape[2]}")
    if padding == "same":
        pt, pl = (kh - 1) // 2, (kw - 1) // 2
        pb, pr = kh - 1 - pt, kw - 1 - pl
        x = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
    elif padding != "valid":
        raise ValueError(f"unknown padding {padding!r}")
    if x.shape[0] < kh or x.shape[1] < kw:
        raise ShapeError(
            f"conv2d kernel {kh}x{kw} larger than padded input {x.shape[0]}x{x.shape[1]}"
        )
    # windows: (oh, ow, c, kh, kw)
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(0, 1))
    out = np.einsum(
        "opchw,hwcf->opf",
        windows.astype(np.float64),
        filters.astype(np.float64),
    )
    return (out + biases.astype(np.float64)).astype(FLOAT)


def maxpool2x2(x: np.ndarray) -> np.ndarray:
    """2x2 max pooling, stride 2; trailing odd row/col dropped."""
    h, w, c = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2x2 needs at least a 2x2 plane, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    return x[: h2 * 2, : w2 * 2].reshape(h2, 2, w2, 2, c).max(axis=(1, 3))


def _coerce_input(model: FrozenModel, raw) -> np.ndarray:
    if model.input_shape[0] == "flat":
        x = as_vec(raw, "model input")
        if x.shape[0] != model.input_shape[1]:
            raise ShapeError(
                f"model input length ({x.shape[0]}) != declared ({model.input_shape[1]})"
            )
        return x
    x = np.asarray(raw, dtype=FLOAT)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3:
        raise ShapeError(f"image input must be (h, w) or (h, w, c), got shape {x.shape}")
    _, h, w, c = model.input_shape
    if x.shape != (h, w, c):
        raise ShapeError(f"image input shape {x.shape} != declared ({h}, {w}, {c})")
    if not np.all(np.isfinite(x)):
        raise ValueError("model input contains non-finite entries")
    return x


def forward(model: FrozenModel, raw) -> np.ndarray:
    """Feature vector (length model.feature_len) for one raw sample.

    Deterministic: dropout acts as identity.
    """
    x = _coerce_input(model, raw)
    for layer in model.layers:
        if isinstance(layer, Dense):
            x = mat_vec_affine(layer.weights, x, layer.biases)
        elif isinstance(layer, Relu):
            x = np.maximum(x, np.float32(0.0))
        elif isinstance(layer, Softmax):
            x = softmax(x)
        elif isinstance(layer, Conv2d):
            x = conv2d_forward(x, layer.filters, layer.biases, layer.padding)
        elif isinstance(layer, MaxPool2x2):
            x = maxpool2x2(x)
        elif isinstance(layer, Flatten):
            x = x.reshape(-1).astype(FLOAT)
        elif isinstance(layer, Dropout):
            pass
        else:
            raise TypeError(f"unknown layer type: {layer!r}")
    return x
