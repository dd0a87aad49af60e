"""Reader/writer for the plain-text model file format.

The format is deliberately human-readable and language-neutral so a model
trained elsewhere can be replayed here bit-for-bit:

    olmodel v1
    input flat 600              # or: input image 28 28 1
    layer dense 128 600         # <out> <in>; then <out> weight rows + 1 bias row
    ...floats...
    layer relu
    layer conv2d 8 3 3 1 same   # <filters> <kh> <kw> <in_c> <padding>;
    ...floats...                # one row per filter (kh*kw*in_c values), + 1 bias row
    layer maxpool2x2
    layer flatten
    layer dropout 0.25
    head 5 128 A E I O U        # <n> <m> <labels...>; n weight rows + 1 bias row

Blank lines and '#' comments are ignored. Floats are written with "%.9g",
which round-trips float32 exactly, so save -> load -> save is byte-stable.

A file with zero layer blocks is a valid "identity extractor" and doubles
as a standalone checkpoint for a classification head.
"""

from __future__ import annotations

import os
from typing import IO, Iterator, Optional

import numpy as np

from .errors import FormatError, ShapeError
from .frozen import (
    Conv2d,
    Dense,
    Dropout,
    Flatten,
    FrozenModel,
    HeadSeed,
    Layer,
    MaxPool2x2,
    Relu,
    Softmax,
)
from .linalg import FLOAT

MAGIC = "olmodel v1"


def format_float(v) -> str:
    """Decimal text that parses back to the identical float32."""
    return "%.9g" % float(v)


def _format_row(row: np.ndarray) -> str:
    return " ".join(format_float(v) for v in row)


class _Lines:
    """Line reader that skips blanks/comments and remembers positions."""

    def __init__(self, fh: IO[str], path: str):
        self._it: Iterator[tuple[int, str]] = (
            (i + 1, line) for i, line in enumerate(fh)
        )
        self.path = path
        self.lineno = 0

    def next(self) -> Optional[str]:
        for lineno, raw in self._it:
            self.lineno = lineno
            line = raw.split("#", 1)[0].strip()
            if line:
                return line
        return None

    def require(self, what: str) -> str:
        line = self.next()
        if line is None:
            raise self.error(f"unexpected end of file, expected {what}")
        return line

    def error(self, msg: str) -> FormatError:
        return FormatError(f"{self.path}:{self.lineno}: {msg}")


def _parse_float_row(lines: _Lines, expected: int, what: str) -> np.ndarray:
    line = lines.require(f"{expected} floats ({what})")
    tokens = line.split()
    if len(tokens) != expected:
        raise lines.error(f"{what}: expected {expected} values, got {len(tokens)}")
    try:
        return np.array([np.float32(t) for t in tokens], dtype=FLOAT)
    except ValueError as exc:
        raise lines.error(f"{what}: bad float ({exc})") from exc


def _parse_int(lines: _Lines, token: str, what: str) -> int:
    try:
        value = int(token)
    except ValueError:
        raise lines.error(f"{what}: expected an integer, got {token!r}") from None
    if value < 1:
        raise lines.error(f"{what}: must be >= 1, got {value}")
    return value


def _parse_input_shape(lines: _Lines, fields: list[str]):
    if len(fields) >= 2 and fields[1] == "flat" and len(fields) == 3:
        return ("flat", _parse_int(lines, fields[2], "input length"))
    if len(fields) >= 2 and fields[1] == "image" and len(fields) == 5:
        h = _parse_int(lines, fields[2], "input height")
        w = _parse_int(lines, fields[3], "input width")
        c = _parse_int(lines, fields[4], "input channels")
        return ("image", h, w, c)
    raise lines.error(
        f"input line must be 'input flat <n>' or 'input image <h> <w> <c>', got {fields!r}"
    )


def _parse_layer(lines: _Lines, fields: list[str]) -> Layer:
    kind = fields[1] if len(fields) > 1 else ""
    args = fields[2:]
    if kind == "dense":
        if len(args) != 2:
            raise lines.error("layer dense needs '<out> <in>'")
        out_n = _parse_int(lines, args[0], "dense out")
        in_n = _parse_int(lines, args[1], "dense in")
        rows = [_parse_float_row(lines, in_n, f"dense weight row {r}") for r in range(out_n)]
        biases = _parse_float_row(lines, out_n, "dense biases")
        return Dense(np.stack(rows), biases)
    if kind == "relu":
        return Relu()
    if kind == "softmax":
        return Softmax()
    if kind == "conv2d":
        return _parse_conv2d(lines, args)
    if kind == "maxpool2x2":
        return MaxPool2x2()
    if kind == "flatten":
        return Flatten()
    if kind == "dropout":
        if len(args) != 1:
            raise lines.error("layer dropout needs '<rate>'")
        try:
            rate = float(args[0])
        except ValueError:
            raise lines.error(f"dropout rate: bad float {args[0]!r}") from None
        return Dropout(rate)
    raise lines.error(f"unknown layer kind {kind!r}")


def _parse_conv2d(lines: _Lines, args: list[str]) -> Conv2d:
    if len(args) != 5:
        raise lines.error("layer conv2d needs '<filters> <kh> <kw> <in_c> <padding>'")
    out_c = _parse_int(lines, args[0], "conv2d filters")
    kh = _parse_int(lines, args[1], "conv2d kernel height")
    kw = _parse_int(lines, args[2], "conv2d kernel width")
    in_c = _parse_int(lines, args[3], "conv2d in channels")
    padding = args[4]
    if padding not in ("valid", "same"):
        raise lines.error(f"conv2d padding must be 'valid' or 'same', got {padding!r}")
    per_filter = kh * kw * in_c
    rows = [
        _parse_float_row(lines, per_filter, f"conv2d filter row {r}") for r in range(out_c)
    ]
    biases = _parse_float_row(lines, out_c, "conv2d biases")
    # rows are (out_c, kh*kw*in_c), kernel flattened row-major over (kh, kw, in_c)
    filters = np.stack(rows).reshape(out_c, kh, kw, in_c).transpose(1, 2, 3, 0)
    return Conv2d(np.ascontiguousarray(filters), biases, padding)


def _parse_head(lines: _Lines, fields: list[str]) -> HeadSeed:
    if len(fields) < 3:
        raise lines.error("head line needs '<n> <m> <labels...>'")
    n = _parse_int(lines, fields[1], "head n")
    m = _parse_int(lines, fields[2], "head m")
    labels = fields[3:]
    if len(labels) != n:
        raise lines.error(f"head declares n={n} but lists {len(labels)} labels")
    rows = [_parse_float_row(lines, m, f"head weight row {r}") for r in range(n)]
    biases = _parse_float_row(lines, n, "head biases")
    try:
        return HeadSeed(np.stack(rows), biases, labels)
    except (ShapeError, ValueError) as exc:
        raise lines.error(f"head block invalid: {exc}") from exc


def load_model(path) -> tuple[FrozenModel, HeadSeed]:
    """Parse a model file into a shape-validated extractor plus its head."""
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = _Lines(fh, path)
        header = lines.require("header")
        if header != MAGIC:
            raise lines.error(f"expected header {MAGIC!r}, got {header!r}")
        fields = lines.require("input line").split()
        if fields[0] != "input":
            raise lines.error(f"expected 'input ...' line, got {fields[0]!r}")
        input_shape = _parse_input_shape(lines, fields)

        layers: list[Layer] = []
        head: Optional[HeadSeed] = None
        while True:
            line = lines.next()
            if line is None:
                break
            fields = line.split()
            if fields[0] == "layer":
                layers.append(_parse_layer(lines, fields))
            elif fields[0] == "head":
                head = _parse_head(lines, fields)
                trailing = lines.next()
                if trailing is not None:
                    raise lines.error(f"unexpected content after head block: {trailing!r}")
                break
            else:
                raise lines.error(f"expected 'layer ...' or 'head ...', got {fields[0]!r}")
        if head is None:
            raise FormatError(f"{path}: missing head block")

    model = FrozenModel(layers, input_shape)
    if head.m != model.feature_len:
        raise ShapeError(
            f"{path}: head expects {head.m} features but the layer stack "
            f"produces {model.feature_len}"
        )
    return model, head


def _write_layer(fh: IO[str], layer: Layer) -> None:
    if isinstance(layer, Dense):
        out_n, in_n = layer.weights.shape
        fh.write(f"layer dense {out_n} {in_n}\n")
        for row in layer.weights:
            fh.write(_format_row(row) + "\n")
        fh.write(_format_row(layer.biases) + "\n")
    elif isinstance(layer, Relu):
        fh.write("layer relu\n")
    elif isinstance(layer, Softmax):
        fh.write("layer softmax\n")
    elif isinstance(layer, Conv2d):
        kh, kw, in_c, out_c = layer.filters.shape
        fh.write(f"layer conv2d {out_c} {kh} {kw} {in_c} {layer.padding}\n")
        flat = layer.filters.transpose(3, 0, 1, 2).reshape(out_c, kh * kw * in_c)
        for row in flat:
            fh.write(_format_row(row) + "\n")
        fh.write(_format_row(layer.biases) + "\n")
    elif isinstance(layer, MaxPool2x2):
        fh.write("layer maxpool2x2\n")
    elif isinstance(layer, Flatten):
        fh.write("layer flatten\n")
    elif isinstance(layer, Dropout):
        fh.write(f"layer dropout {format_float(layer.rate)}\n")
    else:
        raise TypeError(f"unknown layer type: {layer!r}")


def _check_labels(labels: list[str]) -> None:
    for label in labels:
        if not label or any(ch.isspace() for ch in label):
            raise ValueError(f"label {label!r} is empty or contains whitespace")


def write_head_block(fh: IO[str], weights: np.ndarray, biases: np.ndarray,
                     labels: list[str]) -> None:
    _check_labels(labels)
    n, m = weights.shape
    fh.write(f"head {n} {m} {' '.join(labels)}\n")
    for row in weights:
        fh.write(_format_row(row) + "\n")
    fh.write(_format_row(biases) + "\n")


def save_model(path, model: FrozenModel, head: HeadSeed) -> None:
    """Serialize extractor + head; output re-parses bit-identically."""
    path = os.fspath(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MAGIC + "\n")
        if model.input_shape[0] == "flat":
            fh.write(f"input flat {model.input_shape[1]}\n")
        else:
            _, h, w, c = model.input_shape
            fh.write(f"input image {h} {w} {c}\n")
        for layer in model.layers:
            _write_layer(fh, layer)
        write_head_block(fh, head.weights, head.biases, head.labels)


def save_head_seed(path, head: HeadSeed) -> None:
    """Checkpoint a head on its own: a model file with zero layers."""
    save_model(path, FrozenModel([], ("flat", head.m)), head)


def load_head_seed(path) -> HeadSeed:
    _, head = load_model(path)
    return head
