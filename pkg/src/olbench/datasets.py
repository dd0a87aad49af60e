"""Dataset containers and loaders for the streaming benchmark.

Three sample kinds flow through the harness: image planes (for models
with a convolutional front), flat vectors (fed to a dense frozen model),
and precomputed feature rows (bypassing the frozen model entirely).

Loaders cover the two on-disk formats of the benchmark: big-endian IDX
pairs for raw digit images, and a plain feature CSV whose header is
`label,f0,...,f{m-1}`. A seeded Gaussian-cluster generator stands in for
private sensor recordings when a quick separable stream is needed.
"""

from __future__ import annotations

import csv
import hashlib
import math
import os
import struct
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import FormatError, ShapeError
from .linalg import FLOAT, Rng
from .modelio import format_float

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# Distance scale of synthetic class means; the per-axis standard deviation
# is MEAN_SCALE/sqrt(m) so the expected mean-to-mean distance stays O(1)
# regardless of feature length.
MEAN_SCALE = 2.0


class InputKind(str, Enum):
    FLAT_VECTOR = "flat_vector"
    IMAGE_PLANE = "image_plane"
    PRECOMPUTED_FEATURES = "precomputed_features"

    def __str__(self) -> str:
        return self.value


@dataclass
class Dataset:
    """Samples stacked along axis 0, with one string label per sample.

    `dataset_id` is a content digest; reports carry it so comparison
    tables can refuse mixing runs from different data.
    """

    inputs: np.ndarray
    labels: list[str]
    kind: InputKind
    dataset_id: str = ""

    def __post_init__(self):
        self.kind = InputKind(self.kind)
        self.inputs = np.ascontiguousarray(self.inputs, dtype=FLOAT)
        if self.inputs.ndim < 2:
            raise ShapeError(
                f"dataset inputs must be (count, ...), got shape {self.inputs.shape}"
            )
        self.labels = [str(lb) for lb in self.labels]
        if len(self.labels) != self.inputs.shape[0]:
            raise ShapeError(
                f"{self.inputs.shape[0]} inputs but {len(self.labels)} labels"
            )
        if any(lb == "" for lb in self.labels):
            raise ValueError("dataset labels must be nonempty strings")
        if not self.dataset_id:
            self.dataset_id = _content_id(self.inputs, self.labels, self.kind)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    @property
    def sample_shape(self) -> tuple:
        return self.inputs.shape[1:]

    def samples(self):
        """Iterate (input, label) pairs in stored order."""
        return zip(self.inputs, self.labels)

    def distinct_labels(self) -> list[str]:
        """Labels in order of first appearance."""
        seen: dict[str, None] = {}
        for lb in self.labels:
            seen.setdefault(lb)
        return list(seen)

    def class_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for lb in self.labels:
            counts[lb] = counts.get(lb, 0) + 1
        return counts


def as_kind(dataset: Dataset, kind: InputKind) -> Dataset:
    """Same samples viewed as a different input kind (e.g. generated
    feature rows reused as flat inputs to a dense frozen model)."""
    return Dataset(dataset.inputs, dataset.labels, kind)


def _content_id(inputs: np.ndarray, labels: list[str], kind: InputKind) -> str:
    h = hashlib.sha256()
    h.update(str(kind).encode())
    h.update(repr(inputs.shape).encode())
    h.update("\x00".join(labels).encode())
    h.update(inputs.tobytes())
    return h.hexdigest()[:16]


def _read_exact(fh, count: int, path: str, offset: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(
            f"{path}: truncated {what}: wanted {count} bytes at offset "
            f"{offset}, got {len(data)}"
        )
    return data


def load_mnist_idx(images_path, labels_path, keep_labels=None) -> Dataset:
    """Read an IDX image/label file pair into an image-plane dataset.

    Pixels are scaled from unsigned bytes to [0, 1]. `keep_labels` is an
    optional set of label strings; samples outside it are dropped.
    """
    images_path, labels_path = os.fspath(images_path), os.fspath(labels_path)
    with open(images_path, "rb") as fh:
        header = _read_exact(fh, 16, images_path, 0, "image header")
        magic, count, rows, cols = struct.unpack(">IIII", header)
        if magic != IDX_IMAGES_MAGIC:
            raise FormatError(
                f"{images_path}: bad magic 0x{magic:08x} at offset 0 "
                f"(want 0x{IDX_IMAGES_MAGIC:08x})"
            )
        payload = _read_exact(fh, count * rows * cols, images_path, 16, "image data")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)

    with open(labels_path, "rb") as fh:
        header = _read_exact(fh, 8, labels_path, 0, "label header")
        magic, label_count = struct.unpack(">II", header)
        if magic != IDX_LABELS_MAGIC:
            raise FormatError(
                f"{labels_path}: bad magic 0x{magic:08x} at offset 0 "
                f"(want 0x{IDX_LABELS_MAGIC:08x})"
            )
        raw_labels = _read_exact(fh, label_count, labels_path, 8, "label data")
    if label_count != count:
        raise FormatError(
            f"{labels_path}: {label_count} labels for {count} images in "
            f"{images_path}"
        )

    labels = [str(b) for b in raw_labels]
    if keep_labels is not None:
        keep = {str(lb) for lb in keep_labels}
        mask = np.array([lb in keep for lb in labels], dtype=bool)
        images = images[mask]
        labels = [lb for lb in labels if lb in keep]
    if len(labels) == 0:
        warnings.warn(f"{images_path}: filtered dataset is empty", stacklevel=2)
    scaled = images.astype(FLOAT) / np.float32(255.0)
    return Dataset(scaled, labels, InputKind.IMAGE_PLANE)


def _feature_header(m: int) -> list[str]:
    return ["label"] + [f"f{j}" for j in range(m)]


def save_feature_csv(path, features: np.ndarray, labels: list[str]) -> None:
    """Write rows `label,f0..` with floats rendered via format_float, so a
    rewrite of the same data is byte-identical."""
    features = np.asarray(features, dtype=FLOAT)
    if features.ndim != 2 or features.shape[0] != len(labels):
        raise ShapeError(
            f"features {features.shape} do not match {len(labels)} labels"
        )
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_feature_header(features.shape[1])) + "\n")
        for row, label in zip(features, labels):
            fh.write(label + "," + ",".join(format_float(v) for v in row) + "\n")
    os.replace(tmp, path)


def load_feature_csv(path) -> Dataset:
    """Read a feature CSV into a precomputed-features dataset."""
    path = os.fspath(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}:1: empty file, expected header") from None
        m = len(header) - 1
        if m < 1 or header != _feature_header(m):
            raise FormatError(
                f"{path}:1: bad header, expected label,f0,...,f{{m-1}}"
            )
        labels: list[str] = []
        rows: list[np.ndarray] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != m + 1:
                raise FormatError(
                    f"{path}:{lineno}: expected {m + 1} fields, got {len(row)}"
                )
            if row[0] == "":
                raise FormatError(f"{path}:{lineno}: empty label")
            try:
                values = np.array(row[1:], dtype=FLOAT)
            except ValueError:
                bad = next(v for v in row[1:] if not _is_float(v))
                raise FormatError(
                    f"{path}:{lineno}: non-numeric value {bad!r}"
                ) from None
            if not np.all(np.isfinite(values)):
                raise FormatError(f"{path}:{lineno}: non-finite value")
            labels.append(row[0])
            rows.append(values)
    features = np.stack(rows) if rows else np.zeros((0, m), dtype=FLOAT)
    return Dataset(features, labels, InputKind.PRECOMPUTED_FEATURES)


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


@dataclass
class SyntheticSpec:
    """Gaussian-cluster stream description.

    Means default to a seeded draw with per-axis deviation
    MEAN_SCALE/sqrt(feature_len); pass `means` to pin them explicitly.
    """

    n_classes: int
    feature_len: int
    samples_per_class: int
    spread: float = 0.25
    seed: int = 0
    means: np.ndarray | None = None
    class_labels: list[str] | None = None

    def __post_init__(self):
        if self.n_classes < 2:
            raise ValueError(f"n_classes must be >= 2, got {self.n_classes}")
        if self.feature_len < 1 or self.samples_per_class < 1:
            raise ValueError("feature_len and samples_per_class must be >= 1")
        if not self.spread > 0:
            raise ValueError(f"spread must be > 0, got {self.spread}")
        if self.means is not None:
            self.means = np.asarray(self.means, dtype=np.float64)
            if self.means.shape != (self.n_classes, self.feature_len):
                raise ShapeError(
                    f"means shape {self.means.shape} != "
                    f"({self.n_classes}, {self.feature_len})"
                )
        if self.class_labels is None:
            self.class_labels = [f"c{i}" for i in range(self.n_classes)]
        if len(self.class_labels) != self.n_classes or len(set(self.class_labels)) != self.n_classes:
            raise ValueError("class_labels must be n_classes distinct names")


def resolve_means(spec: SyntheticSpec, rng: Rng) -> np.ndarray:
    """Class means: explicit ones if given, else the seeded draw. The draw
    consumes the generator, so call before sampling."""
    if spec.means is not None:
        return spec.means
    scale = MEAN_SCALE / math.sqrt(spec.feature_len)
    return rng.normal((spec.n_classes, spec.feature_len), scale)


def gen_synthetic(spec: SyntheticSpec) -> Dataset:
    """Draw `samples_per_class` points around each class mean.

    Samples are stored class-major (all of class 0 first); stream order is
    the harness's job. Same spec -> bit-identical dataset.
    """
    rng = Rng(spec.seed)
    means = resolve_means(spec, rng)
    blocks = []
    labels: list[str] = []
    for i in range(spec.n_classes):
        noise = rng.normal((spec.samples_per_class, spec.feature_len), spec.spread)
        blocks.append((means[i] + noise).astype(FLOAT))
        labels.extend([spec.class_labels[i]] * spec.samples_per_class)
    return Dataset(np.concatenate(blocks), labels, InputKind.PRECOMPUTED_FEATURES)
