"""Independent reference implementations used only by the tests.

Everything here is written from the math directly, in float64 and with
naive loops where possible, deliberately sharing no code with the
package so agreement between the two is evidence rather than tautology.
"""

from __future__ import annotations

import math

import numpy as np


def softmax64(logits) -> np.ndarray:
    v = np.asarray(logits, dtype=np.float64)
    e = np.exp(v - v.max())
    return e / e.sum()


def cross_entropy64(pred, target, floor=1e-7) -> float:
    p = np.clip(np.asarray(pred, dtype=np.float64), floor, 1.0)
    t = np.asarray(target, dtype=np.float64)
    return float(-(t * np.log(p)).sum())


def tinyol_loss(w, b, x, t) -> float:
    """Cross-entropy of softmax(Wx+b) against the one-hot target."""
    logits = np.asarray(w, np.float64) @ np.asarray(x, np.float64) + np.asarray(b, np.float64)
    return cross_entropy64(softmax64(logits), t)


def lwf_loss(w, b, x, t, z, lam) -> float:
    """(1-lam)*CE(y,t) + lam*CE(y,z) with y = softmax(Wx+b), z constant."""
    logits = np.asarray(w, np.float64) @ np.asarray(x, np.float64) + np.asarray(b, np.float64)
    y = softmax64(logits)
    return (1.0 - lam) * cross_entropy64(y, t) + lam * cross_entropy64(y, z)


def fd_grad(loss_fn, w, b, h=1e-3):
    """Central finite differences of loss_fn(w, b) in every coordinate."""
    w = np.asarray(w, dtype=np.float64).copy()
    b = np.asarray(b, dtype=np.float64).copy()
    gw = np.zeros_like(w)
    gb = np.zeros_like(b)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            w[i, j] += h
            up = loss_fn(w, b)
            w[i, j] -= 2 * h
            down = loss_fn(w, b)
            w[i, j] += h
            gw[i, j] = (up - down) / (2 * h)
    for i in range(b.shape[0]):
        b[i] += h
        up = loss_fn(w, b)
        b[i] -= 2 * h
        down = loss_fn(w, b)
        b[i] += h
        gb[i] = (up - down) / (2 * h)
    return gw, gb


def conv2d_loops(x, filters, biases, padding="same") -> np.ndarray:
    """Brute-force convolution: explicit loops over every output cell."""
    x = np.asarray(x, dtype=np.float64)
    f = np.asarray(filters, dtype=np.float64)  # (kh, kw, cin, cout)
    b = np.asarray(biases, dtype=np.float64)
    h, w, cin = x.shape
    kh, kw, fcin, cout = f.shape
    assert cin == fcin
    if padding == "same":
        pt, pl = (kh - 1) // 2, (kw - 1) // 2
        pb, pr = kh - 1 - pt, kw - 1 - pl
        x = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
        oh, ow = h, w
    else:
        oh, ow = h - kh + 1, w - kw + 1
    out = np.zeros((oh, ow, cout))
    for oy in range(oh):
        for ox in range(ow):
            for oc in range(cout):
                acc = 0.0
                for ky in range(kh):
                    for kx in range(kw):
                        for c in range(cin):
                            acc += x[oy + ky, ox + kx, c] * f[ky, kx, c, oc]
                out[oy, ox, oc] = acc + b[oc]
    return out


def least_squares_accuracy(features, labels) -> float:
    """Train/test an offline one-hot least-squares classifier on a 50/50
    interleaved split; returns test accuracy. Sanity oracle for whether a
    dataset is linearly separable enough to benchmark on."""
    x = np.asarray(features, dtype=np.float64)
    names = sorted(set(labels))
    t = np.zeros((len(labels), len(names)))
    for i, lb in enumerate(labels):
        t[i, names.index(lb)] = 1.0
    train = np.arange(len(labels)) % 2 == 0
    xt = np.hstack([x, np.ones((len(labels), 1))])
    coef, *_ = np.linalg.lstsq(xt[train], t[train], rcond=None)
    pred = np.argmax(xt[~train] @ coef, axis=1)
    truth = np.argmax(t[~train], axis=1)
    return float((pred == truth).mean())


class StreamSim:
    """Minimal self-contained test-then-train simulator: plain per-sample
    gradient descent on a growing softmax layer, float64 throughout.

    Mirrors the documented behavior (score from the boundary on, then
    train; new labels grow a zero row) without reusing package code, so
    accuracy figures can be cross-checked between the two routes.
    """

    def __init__(self, m: int, alpha: float):
        self.m = m
        self.alpha = alpha
        self.labels: list[str] = []
        self.w = np.zeros((0, m))
        self.b = np.zeros(0)

    def _ensure(self, label: str) -> int:
        if label in self.labels:
            return self.labels.index(label)
        self.labels.append(label)
        self.w = np.vstack([self.w, np.zeros((1, self.m))])
        self.b = np.append(self.b, 0.0)
        return len(self.labels) - 1

    def predict(self, x) -> str:
        y = softmax64(self.w @ np.asarray(x, np.float64) + self.b)
        return self.labels[int(np.argmax(y))]

    def train(self, x, label: str) -> None:
        row = self._ensure(label)
        x = np.asarray(x, np.float64)
        y = softmax64(self.w @ x + self.b)
        t = np.zeros(len(self.labels))
        t[row] = 1.0
        g = self.alpha * (y - t)
        self.w -= np.outer(g, x)
        self.b -= g

    def run(self, inputs, labels, order, start) -> float:
        correct = scored = 0
        for pos, idx in enumerate(order):
            x, lb = inputs[idx], labels[idx]
            if pos >= start and self.labels:
                scored += 1
                correct += self.predict(x) == lb
            self.train(x, lb)
        return correct / scored if scored else 0.0


def running_mean_layers(snapshots) -> np.ndarray:
    """Plain arithmetic mean of a list of layer snapshots (float64)."""
    return np.mean([np.asarray(s, dtype=np.float64) for s in snapshots], axis=0)
