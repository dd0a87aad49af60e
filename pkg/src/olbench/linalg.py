"""Dense float32 primitives used by every other module.

Everything on the online-learning path is float32, matching the 4-byte-
per-parameter memory model of the target class of devices. Dot products
accumulate in float64 internally and cast back, which keeps results stable
without changing the stored precision.

Randomness is centralised here: one PCG64 generator per seed, and an
explicit Fisher-Yates shuffle on top of it, so a seed fixes every stream
order the package ever produces.
"""

from __future__ import annotations

from typing import Sequence, TypeVar

import numpy as np

from .errors import ShapeError

T = TypeVar("T")

FLOAT = np.float32

# Predicted probabilities are clamped to this floor before any log, so a
# confident-and-wrong prediction yields a large finite loss instead of inf.
PROB_FLOOR = 1e-7


def as_vec(values, name: str = "vector") -> np.ndarray:
    """Coerce to a finite 1-D float32 array, validating on the way in."""
    v = np.asarray(values, dtype=FLOAT)
    if v.ndim != 1 or v.size == 0:
        raise ShapeError(f"{name} must be 1-D and nonempty, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_mat(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float32 array."""
    m = np.asarray(values, dtype=FLOAT)
    if m.ndim != 2 or m.size == 0:
        raise ShapeError(f"{name} must be 2-D and nonempty, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def mat_vec_affine(w: np.ndarray, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """w @ x + b with float64 accumulation, returned as float32.

    Raises ShapeError naming both operands when dimensions do not compose.
    """
    w = as_mat(w, "weights")
    x = as_vec(x, "input")
    b = as_vec(b, "bias")
    if w.shape[1] != x.shape[0]:
        raise ShapeError(
            f"weights cols ({w.shape[1]}) != input length ({x.shape[0]})"
        )
    if w.shape[0] != b.shape[0]:
        raise ShapeError(
            f"weights rows ({w.shape[0]}) != bias length ({b.shape[0]})"
        )
    out = w.astype(np.float64) @ x.astype(np.float64) + b.astype(np.float64)
    return out.astype(FLOAT)


def softmax(v: np.ndarray) -> np.ndarray:
    """Numerically stable softmax (max subtraction), float32 out.

    Preserves the argmax and sums to 1 within float32 rounding for any
    finite input, including entries of magnitude ~1e3.
    """
    v = as_vec(v, "logits")
    shifted = v.astype(np.float64) - float(np.max(v))
    e = np.exp(shifted)
    return (e / e.sum()).astype(FLOAT)


def cross_entropy(pred: np.ndarray, target: np.ndarray) -> float:
    """-sum(target * ln(pred)) with pred clamped to [PROB_FLOOR, 1].

    `target` may be a one-hot vector or any probability vector (soft
    targets are how the distillation term of LWF enters).
    """
    pred = as_vec(pred, "pred")
    target = as_vec(target, "target")
    if pred.shape != target.shape:
        raise ShapeError(
            f"pred length ({pred.shape[0]}) != target length ({target.shape[0]})"
        )
    p = np.clip(pred.astype(np.float64), PROB_FLOOR, 1.0)
    return float(-(target.astype(np.float64) * np.log(p)).sum())


def argmax_tiebreak(v: np.ndarray) -> int:
    """Index of the maximum entry; ties broken by the lowest index."""
    v = as_vec(v, "vector")
    return int(np.argmax(v))


class Rng:
    """Project-wide deterministic generator: numpy PCG64 behind one seed.

    The same seed yields the same draw sequence on every platform; all
    shuffling in the package flows through an instance of this class.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def integers(self, low: int, high: int) -> int:
        """One draw, uniform over [low, high)."""
        return int(self._gen.integers(low, high))

    def normal(self, size, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(0.0, scale, size=size)


def shuffle(items: Sequence[T], rng: Rng) -> list[T]:
    """Fisher-Yates permutation driven solely by `rng`; input untouched."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = rng.integers(0, i + 1)
        out[i], out[j] = out[j], out[i]
    return out
