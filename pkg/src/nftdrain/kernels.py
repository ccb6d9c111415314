"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``NFTDRAIN_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

import numpy as np

from nftdrain import _pykernels

BACKEND = "python"
_impl = _pykernels
if os.environ.get("NFTDRAIN_PURE_PYTHON") != "1":
    try:
        from nftdrain import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _pykernels


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python') or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        from nftdrain import _ckernels
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def segment_sum(values, seg, n_segments):
    """Sum rows of ``values`` into ``n_segments`` buckets given by ``seg``."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    seg = np.ascontiguousarray(seg, dtype=np.intp)
    return _impl.segment_sum(values, seg, int(n_segments))


def segment_mean(values, seg, n_segments):
    counts = np.bincount(seg, minlength=n_segments).astype(np.float64)
    total = segment_sum(values, seg, n_segments)
    return total / np.maximum(counts, 1.0)[:, None]


def segment_softmax(scores, seg, n_segments):
    """Column-wise softmax of ``scores`` within each segment (max-shifted)."""
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    seg = np.ascontiguousarray(seg, dtype=np.intp)
    return _impl.segment_softmax(scores, seg, int(n_segments))


def gather_rowdot(A, ia, B, ib):
    """Row-wise dot products ``A[ia[e]] . B[ib[e]]``."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    ia = np.ascontiguousarray(ia, dtype=np.intp)
    ib = np.ascontiguousarray(ib, dtype=np.intp)
    if A.shape[1] != B.shape[1]:
        raise ValueError("gather_rowdot needs equal row widths")
    return _impl.gather_rowdot(A, ia, B, ib)


def smo_solve(K, y, C, tol=1e-3, max_iter=10_000_000):
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    return _impl.smo_solve(K, y, float(C), float(tol), int(max_iter))
