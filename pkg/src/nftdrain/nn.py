"""Small float64 numeric core with hand-written backward passes.

Arrays are plain ``numpy`` float64 matrices with samples in rows, so an
affine map ``y = W x`` is computed batched as ``Y = X @ W.T``.
"""
from __future__ import annotations

import struct

import numpy as np


class ShapeMismatch(ValueError):
    pass


class EmptyPool(ValueError):
    pass


class NonDeterministicClosure(RuntimeError):
    pass


def as_matrix(x):
    """Return ``x`` as a 2-D float64 array, rejecting non-finite entries."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeMismatch(f"expected a matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("matrix has non-finite entries")
    return arr


class Parameter:
    """A learnable matrix with its gradient and Adam moments."""

    __slots__ = ("name", "value", "grad", "m", "v", "step")

    def __init__(self, value, name=""):
        self.name = name
        self.value = as_matrix(value).copy()
        self.grad = np.zeros_like(self.value)
        self.m = np.zeros_like(self.value)
        self.v = np.zeros_like(self.value)
        self.step = 0

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def glorot(rng, rows, cols):
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def affine(W, X):
    if X.shape[1] != W.value.shape[1]:
        raise ShapeMismatch(f"affine: W is {W.shape}, input has {X.shape[1]} columns")
    return X @ W.value.T


def affine_backward(W, X, dY):
    """Accumulate dL/dW into ``W.grad`` and return dL/dX."""
    if dY.shape != (X.shape[0], W.value.shape[0]):
        raise ShapeMismatch("affine_backward: gradient shape does not match output")
    W.grad += dY.T @ X
    return dY @ W.value


def relu(x):
    return np.maximum(x, 0.0)


def relu_backward(x, dy):
    return dy * (x > 0)


def leaky_relu(x, slope=0.2):
    return np.where(x > 0, x, slope * x)


def leaky_relu_backward(x, dy, slope=0.2):
    return dy * np.where(x > 0, 1.0, slope)


def softmax(x):
    """Row-wise softmax, shifted by the row maximum."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(x - x.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def softmax_backward(s, ds):
    return s * (ds - (s * ds).sum(axis=-1, keepdims=True))


def mean_pool(rows):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] == 0:
        raise EmptyPool("mean_pool of zero rows")
    return rows.mean(axis=0, keepdims=True)


def mean_pool_backward(n_rows, dy):
    return np.repeat(dy / n_rows, n_rows, axis=0)


def cross_entropy(logits, labels, weights=None):
    """Mean negative log-likelihood of ``labels`` under row-softmax of ``logits``.

    Returns ``(loss, dlogits)``. Optional per-row ``weights`` turn the mean
    into a weighted mean.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ShapeMismatch("cross_entropy: logits/labels mismatch")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise ShapeMismatch("cross_entropy: label out of range")
    n = logits.shape[0]
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    wsum = w.sum()
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    nll = logz - shifted[np.arange(n), labels]
    loss = float((w * nll).sum() / wsum)
    d = softmax(logits)
    d[np.arange(n), labels] -= 1.0
    d *= (w / wsum)[:, None]
    return loss, d


def adam_step(params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update per parameter; gradients are zeroed afterwards."""
    for p in params:
        p.step += 1
        p.m = beta1 * p.m + (1.0 - beta1) * p.grad
        p.v = beta2 * p.v + (1.0 - beta2) * p.grad * p.grad
        m_hat = p.m / (1.0 - beta1 ** p.step)
        v_hat = p.v / (1.0 - beta2 ** p.step)
        p.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
        p.zero_grad()


def grad_check(closure, params, eps=1e-5, floor=1e-6):
    """Compare analytic gradients with central finite differences.

    ``closure()`` must return the loss and fill ``p.grad`` for every
    parameter. Relative error per coordinate is
    ``|a - n| / max(|a|, |n|, floor)``; the maximum is returned.
    """
    for p in params:
        p.zero_grad()
    base = closure()
    analytic = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()
    if closure() != base:
        raise NonDeterministicClosure("closure returned different losses on repeat")
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.value.reshape(-1)
        gflat = ga.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + eps
            fp = closure()
            flat[k] = orig - eps
            fm = closure()
            flat[k] = orig
            num = (fp - fm) / (2.0 * eps)
            err = abs(gflat[k] - num) / max(abs(gflat[k]), abs(num), floor)
            worst = max(worst, err)
    for p in params:
        p.zero_grad()
    return worst


CHECKPOINT_MAGIC = b"NFDK"
CHECKPOINT_VERSION = 1


def save_checkpoint(path, arrays):
    """Write named float64 arrays: magic, version, shape table, then payload (little-endian)."""
    items = [(name, np.ascontiguousarray(np.asarray(a, dtype="<f8"))) for name, a in arrays.items()]
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(items)))
        for name, a in items:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
        for _, a in items:
            fh.write(a.tobytes(order="C"))


def load_checkpoint(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint")
    version, count = struct.unpack_from("<II", data, 4)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 12
    table = []
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<I", data, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, off)
        off += 8 * ndim
        table.append((name, shape))
    out = {}
    for name, shape in table:
        n = int(np.prod(shape)) if shape else 1
        out[name] = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(shape).astype(np.float64)
        off += 8 * n
    return out
