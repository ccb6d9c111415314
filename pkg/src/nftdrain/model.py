"""Representation fusion and the RBF-kernel SVM classifier."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nftdrain import kernels
from nftdrain.nn import load_checkpoint, save_checkpoint

BLOCKS = ("tce", "sce", "user")
BLOCK_ALIASES = {
    "transaction-context": "tce", "tce": "tce",
    "social-context": "sce", "sce": "sce",
    "user-features": "user", "user": "user",
}


class MissingBlock(KeyError):
    pass


class SingleClass(ValueError):
    pass


class NonFiniteFeature(ValueError):
    pass


class DimMismatch(ValueError):
    pass


def parse_ablation(names):
    """Normalise block names ('social-context', 'sce', ...) to a frozenset of BLOCKS keys."""
    out = set()
    for name in names:
        if name not in BLOCK_ALIASES:
            raise ValueError(f"unknown block {name!r}; choose from {sorted(BLOCK_ALIASES)}")
        out.add(BLOCK_ALIASES[name])
    if out == set(BLOCKS):
        raise ValueError("cannot drop every block")
    return frozenset(out)


@dataclass
class FusedRepresentation:
    accounts: list
    X: np.ndarray
    blocks: tuple


def fuse(accounts, tce=None, sce=None, user=None, drop=frozenset()):
    """Concatenate [TCE ; SCE ; scaled user attributes] per account, skipping dropped blocks.

    Each block is a mapping account -> 1-D vector.
    """
    sources = {"tce": tce, "sce": sce, "user": user}
    enabled = tuple(b for b in BLOCKS if b not in drop)
    rows = []
    for acct in accounts:
        parts = []
        for b in enabled:
            src = sources[b]
            if src is None or acct not in src:
                raise MissingBlock(f"{acct}: no {b} representation")
            parts.append(np.asarray(src[acct], dtype=np.float64).ravel())
        rows.append(np.concatenate(parts))
    width = sum(len(next(iter(sources[b].values()))) for b in enabled) if not rows else len(rows[0])
    X = np.vstack(rows) if rows else np.zeros((0, width))
    return FusedRepresentation(list(accounts), X, enabled)


def rbf_kernel(X, Y, gamma):
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * (X @ Y.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray       # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    platt_a: float = -1.0
    platt_b: float = 0.0
    alpha: np.ndarray | None = None
    n_iter: int = 0

    @property
    def n_features(self):
        return self.support_vectors.shape[1]

    def decision_function(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise DimMismatch(f"expected {self.n_features} features, got {X.shape}")
        out = np.full(X.shape[0], self.bias)
        for start in range(0, X.shape[0], 4096):
            K = rbf_kernel(X[start:start + 4096], self.support_vectors, self.gamma)
            out[start:start + 4096] += K @ self.dual_coef
        return out

    def risk(self, decision):
        return _sigmoid(-(self.platt_a * np.asarray(decision) + self.platt_b))


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_pm1(y):
    y = np.asarray(y)
    return np.where(y > 0, 1.0, -1.0)


def _solve(K, ypm, C, tol):
    alpha, rho, n_iter, _ = kernels.smo_solve(K, ypm, C, tol)
    return alpha, rho, n_iter


def platt_fit(decision, labels, max_iter=100):
    """Sigmoid calibration ``P(y=1|f) = 1 / (1 + exp(A f + B))`` (Newton with backtracking)."""
    f = np.asarray(decision, dtype=np.float64)
    y = np.asarray(labels) > 0
    n_pos, n_neg = int(y.sum()), int((~y).sum())
    hi, lo = (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0)
    t = np.where(y, hi, lo)
    A, B = 0.0, math.log((n_neg + 1.0) / (n_pos + 1.0))
    sigma, min_step, eps = 1e-12, 1e-10, 1e-5

    def objective(A, B):
        fab = f * A + B
        # t*fab + log(1 + exp(-fab)), written to stay finite for large |fab|
        return float(np.sum(t * fab + np.logaddexp(0.0, -fab)))

    fval = objective(A, B)
    for _ in range(max_iter):
        fab = f * A + B
        p = _sigmoid(-fab)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + float(np.sum(f * f * d2))
        h22 = sigma + float(np.sum(d2))
        h21 = float(np.sum(f * d2))
        d1 = t - p
        g1, g2 = float(np.sum(f * d1)), float(np.sum(d1))
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        else:
            break
    return A, B


def _folds(y, k, rng):
    fold = np.empty(len(y), dtype=np.intp)
    for cls in (False, True):
        idx = np.flatnonzero((y > 0) == cls)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = np.arange(len(idx)) % k
    return fold


def resolve_gamma(gamma, X):
    """A float, or "scale" for ``1 / (n_features * X.var())`` on the training rows."""
    if isinstance(gamma, str):
        if gamma != "scale":
            raise ValueError(f"gamma must be a number or 'scale', got {gamma!r}")
        var = float(np.asarray(X).var())
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    return gamma


def svm_train(X, y, C=0.1, gamma=0.1, tol=1e-3, seed=0, platt_folds=5):
    """Train a C-SVC with RBF kernel by SMO; calibrate risk scores by Platt scaling.

    ``y`` uses 1 for drainers and 0 (or -1) for regular users. Platt
    parameters are fit on out-of-fold decision values from a seeded
    ``platt_folds``-fold split (training decision values when folds < 2).
    """
    X = np.asarray(X, dtype=np.float64)
    ypm = _as_pm1(y)
    if not np.all(np.isfinite(X)):
        raise NonFiniteFeature("training features contain NaN/inf")
    if len(np.unique(ypm)) < 2:
        raise SingleClass("training labels contain a single class")
    gamma = resolve_gamma(gamma, X)
    K = rbf_kernel(X, X, gamma)
    alpha, rho, n_iter = _solve(K, ypm, C, tol)
    sv = alpha > 0
    model = SvmModel(X[sv].copy(), (alpha * ypm)[sv], -rho, gamma, C, alpha=alpha, n_iter=n_iter)

    dec = None
    if platt_folds >= 2:
        rng = np.random.default_rng(seed)
        fold = _folds(ypm, platt_folds, rng)
        dec = np.empty(len(ypm))
        for k in range(platt_folds):
            te = fold == k
            tr = ~te
            if len(np.unique(ypm[tr])) < 2 or not te.any():
                dec = None
                break
            Ktr = np.ascontiguousarray(K[np.ix_(tr, tr)])
            a, r, _ = _solve(Ktr, ypm[tr], C, tol)
            dec[te] = K[np.ix_(te, tr)] @ (a * ypm[tr]) - r
    if dec is None:
        dec = K @ (alpha * ypm) - rho
    model.platt_a, model.platt_b = platt_fit(dec, ypm)
    return model


@dataclass
class Prediction:
    label: np.ndarray
    decision: np.ndarray
    risk: np.ndarray


def svm_predict(model, X):
    """Label 1 (drainer) iff the decision value is strictly positive."""
    dec = model.decision_function(X)
    return Prediction((dec > 0).astype(np.intp), dec, model.risk(dec))


def save_svm(model, path):
    save_checkpoint(path, {
        "svm.support_vectors": model.support_vectors,
        "svm.dual_coef": model.dual_coef[None, :],
        "svm.scalars": np.array([[model.bias, model.gamma, model.C, model.platt_a, model.platt_b]]),
    })


def load_svm(path):
    a = load_checkpoint(path)
    b, gamma, C, pa, pb = a["svm.scalars"][0]
    return SvmModel(a["svm.support_vectors"], a["svm.dual_coef"][0], float(b), float(gamma),
                    float(C), float(pa), float(pb))
