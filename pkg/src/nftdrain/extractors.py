"""Transaction-context (TCE) and social-context (SCE) representation learners.

TCE: per NFT, ``h_n = relu(W_N . mean(incident edge attributes))``; per
ownership, ``h_un = W_U . [t_un ; h_n]``; per head ``k`` the score
``leaky_relu(a_k . h_un)`` is softmax-normalised over the user's NFTs and the
user vector is the attention-weighted sum of ``h_un``, averaged over heads.

SCE: two R-GCN layers over the SALE/GIFT user graph,
``h' = relu(W h_u + sum_r sum_{v in N_r(u)} W_r h_v / c_u)``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from nftdrain import kernels
from nftdrain.features import EDGE_DIMS, USER_DIMS
from nftdrain.graphs import RELATIONS
from nftdrain.nn import (Parameter, adam_step, cross_entropy, glorot, leaky_relu,
                         leaky_relu_backward)

logger = logging.getLogger(__name__)


class NoPositives(ValueError):
    pass


@dataclass
class ExtractorConfig:
    hidden: int = 64
    heads: int = 8
    layers: int = 2
    lr: float | None = None
    max_epochs: int = 200
    patience: int = 10
    val_frac: float = 0.1
    leaky_slope: float = 0.2
    norm: str = "total"          # SCE: 'total' = |N(u)| over all relations, 'relation' = |N_r(u)|
    class_weight: str | None = None
    seed: int = 0


TCE_LR = 6e-4
SCE_LR = 2e-3


def _head_params(rng, hidden):
    return [Parameter(glorot(rng, 2, hidden), "head.W"), Parameter(np.zeros((1, 2)), "head.b")]


# ---------------------------------------------------------------- TCE

class TceContext:
    """Index arrays for one (graph, target users) pair, reused across epochs.

    Edges of the target users are kept grouped by user so the per-epoch
    attention matrix (users x NFTs) can be assembled without sorting.
    """

    def __init__(self, graph, users):
        self.graph = graph
        self.users = list(users)
        uidx = np.array([graph.user_index.get(u, -1) for u in self.users], dtype=np.intp)
        self.isolated = uidx < 0
        pos = np.full(len(graph.users), -1, dtype=np.intp)
        pos[uidx[uidx >= 0]] = np.flatnonzero(uidx >= 0)
        # a canonical edge order makes every sum independent of input edge order
        canon = np.lexsort((*graph.edge_attr.T[::-1], graph.edge_nft, graph.edge_user))
        sel = canon[pos[graph.edge_user[canon]] >= 0]
        sel = sel[np.argsort(pos[graph.edge_user[sel]], kind="stable")]
        self.edge_index = sel
        self.edge_seg = pos[graph.edge_user[sel]]
        deg = np.bincount(self.edge_seg, minlength=len(self.users))
        self.isolated |= deg == 0
        self.indptr = np.concatenate([[0], np.cumsum(deg)]).astype(np.intp)
        nfts_used, local = np.unique(graph.edge_nft[sel], return_inverse=True)
        self.edge_nft_local = local.reshape(-1).astype(np.intp)
        self.n_nfts = len(nfts_used)
        self.edge_attr = np.ascontiguousarray(graph.edge_attr[sel])
        # NFT context input is a constant: mean of all incident edges in the graph
        full_mean = kernels.segment_mean(graph.edge_attr[canon], graph.edge_nft[canon], len(graph.nfts))
        self.nft_mean = full_mean[nfts_used]

    def weight_matrix(self, weights):
        """Sparse users x NFTs matrix holding one weight per ownership edge."""
        return sp.csr_matrix((weights, self.edge_nft_local, self.indptr),
                             shape=(len(self.users), self.n_nfts))


class TCE:
    def __init__(self, hidden=64, heads=8, seed=0, leaky_slope=0.2):
        rng = np.random.default_rng(seed)
        d = len(EDGE_DIMS)
        self.hidden, self.heads, self.slope = hidden, heads, leaky_slope
        self.W_N = Parameter(glorot(rng, hidden, d), "tce.W_N")
        self.W_U = Parameter(glorot(rng, hidden, d + hidden), "tce.W_U")
        self.A = Parameter(glorot(rng, heads, hidden), "tce.a")
        self.head = _head_params(rng, hidden)

    @property
    def params(self):
        return [self.W_N, self.W_U, self.A, *self.head]

    @property
    def encoder_params(self):
        return [self.W_N, self.W_U, self.A]

    def forward(self, ctx):
        # h_un = W_Ut t_un + W_Uh h_n is never formed per edge: scores and
        # the weighted sum are assembled from its two halves instead
        d = len(EDGE_DIMS)
        W_Ut, W_Uh = self.W_U.value[:, :d], self.W_U.value[:, d:]
        A = self.A.value
        preN = ctx.nft_mean @ self.W_N.value.T
        hN = np.maximum(preN, 0.0)
        Q = hN @ W_Uh.T
        pre = ctx.edge_attr @ (A @ W_Ut).T + (Q @ A.T)[ctx.edge_nft_local]
        s = leaky_relu(pre, self.slope)
        n_users = len(ctx.users)
        alpha = kernels.segment_softmax(s, ctx.edge_seg, n_users)
        abar = alpha.mean(axis=1)
        S = ctx.weight_matrix(abar)
        AT = kernels.segment_sum(abar[:, None] * ctx.edge_attr, ctx.edge_seg, n_users)
        out = AT @ W_Ut.T + S @ Q
        cache = (preN, hN, Q, pre, alpha, abar, S, AT)
        return out, cache

    def backward(self, ctx, cache, dout):
        preN, hN, Q, pre, alpha, abar, S, AT = cache
        d = len(EDGE_DIMS)
        W_Ut, W_Uh = self.W_U.value[:, :d], self.W_U.value[:, d:]
        A = self.A.value
        n_users = len(ctx.users)
        G = dout @ W_Ut
        dabar = np.einsum("ij,ij->i", ctx.edge_attr, G[ctx.edge_seg])
        dabar += kernels.gather_rowdot(Q, ctx.edge_nft_local, dout, ctx.edge_seg)
        dalpha = np.repeat(dabar[:, None] / self.heads, self.heads, axis=1)
        inner = kernels.segment_sum(alpha * dalpha, ctx.edge_seg, n_users)
        ds = alpha * (dalpha - inner[ctx.edge_seg])
        dpre = leaky_relu_backward(pre, ds, self.slope)
        dpre_T = dpre.T @ ctx.edge_attr                                  # heads x d
        dpre_n = kernels.segment_sum(dpre, ctx.edge_nft_local, ctx.n_nfts)  # nfts x heads
        self.A.grad += dpre_T @ W_Ut.T + dpre_n.T @ Q
        dQ = S.T @ dout + dpre_n @ A
        self.W_U.grad[:, :d] += dout.T @ AT + A.T @ dpre_T
        self.W_U.grad[:, d:] += dQ.T @ hN
        dhN = dQ @ W_Uh
        dpreN = dhN * (preN > 0)
        self.W_N.grad += dpreN.T @ ctx.nft_mean

    def attention(self, ctx):
        """Per-edge, per-head attention weights (for inspection and tests)."""
        _, cache = self.forward(ctx)
        return cache[4]

    def to_arrays(self):
        return {p.name: p.value for p in self.params}

    @classmethod
    def from_arrays(cls, arrays, leaky_slope=0.2):
        hidden = arrays["tce.W_N"].shape[0]
        heads = arrays["tce.a"].shape[0]
        m = cls(hidden, heads, 0, leaky_slope)
        for p in m.params:
            p.value = arrays[p.name].copy()
        return m


def tce_forward(graph, model, users):
    """TCE representation per user; isolated users get zeros and a True flag."""
    ctx = TceContext(graph, users)
    out, _ = model.forward(ctx)
    out[ctx.isolated] = 0.0
    return out, ctx.isolated


# ---------------------------------------------------------------- SCE

class SceContext:
    """Normalised per-relation adjacency of a user graph."""

    def __init__(self, graph, norm="total"):
        self.graph = graph
        n = len(graph.users)
        nbrs = graph.neighbor_sets()
        counts = np.array([[len(nbrs[r][u]) for u in range(n)] for r in range(len(RELATIONS))],
                          dtype=np.float64).reshape(len(RELATIONS), n)
        if norm == "total":
            c = np.broadcast_to(counts.sum(axis=0), counts.shape)
        elif norm == "relation":
            c = counts
        else:
            raise ValueError(f"unknown SCE normalisation {norm!r}")
        self.adj = []
        for r in range(len(RELATIONS)):
            rows, cols, vals = [], [], []
            for u in range(n):
                for v in nbrs[r][u]:
                    rows.append(u)
                    cols.append(v)
                    vals.append(1.0 / c[r, u])
            A = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
            self.adj.append(A)
        self.adj_t = [A.T.tocsr() for A in self.adj]
        self.x = np.asarray(graph.attrs, dtype=np.float64)


class SCE:
    def __init__(self, hidden=64, layers=2, seed=0):
        rng = np.random.default_rng(seed)
        dims = [len(USER_DIMS)] + [hidden] * layers
        self.hidden, self.layers = hidden, layers
        self.W_self = [Parameter(glorot(rng, dims[l + 1], dims[l]), f"sce.W{l}") for l in range(layers)]
        self.W_rel = [[Parameter(glorot(rng, dims[l + 1], dims[l]), f"sce.W{l}.{rel}")
                       for rel in RELATIONS] for l in range(layers)]
        self.head = _head_params(rng, hidden)

    @property
    def encoder_params(self):
        out = []
        for l in range(self.layers):
            out.append(self.W_self[l])
            out.extend(self.W_rel[l])
        return out

    @property
    def params(self):
        return [*self.encoder_params, *self.head]

    def forward(self, ctx):
        h = ctx.x
        cache = []
        for l in range(self.layers):
            msgs = [A @ h for A in ctx.adj]
            pre = h @ self.W_self[l].value.T
            for r, M in enumerate(msgs):
                pre = pre + M @ self.W_rel[l][r].value.T
            cache.append((h, msgs, pre))
            h = np.maximum(pre, 0.0)
        return h, cache

    def backward(self, ctx, cache, dout):
        dh = dout
        for l in reversed(range(self.layers)):
            h, msgs, pre = cache[l]
            dpre = dh * (pre > 0)
            self.W_self[l].grad += dpre.T @ h
            dh = dpre @ self.W_self[l].value
            for r, M in enumerate(msgs):
                self.W_rel[l][r].grad += dpre.T @ M
                dh = dh + ctx.adj_t[r] @ (dpre @ self.W_rel[l][r].value)

    def to_arrays(self):
        return {p.name: p.value for p in self.params}

    @classmethod
    def from_arrays(cls, arrays):
        layers = sum(1 for k in arrays if k.startswith("sce.W") and k.count(".") == 1)
        hidden = arrays["sce.W0"].shape[0]
        m = cls(hidden, layers, 0)
        for p in m.params:
            p.value = arrays[p.name].copy()
        return m


def sce_forward(graph, model, users, norm="total", ctx=None):
    ctx = ctx or SceContext(graph, norm)
    h, _ = model.forward(ctx)
    idx = np.array([graph.user_index[u] for u in users], dtype=np.intp)
    return h[idx]


# ---------------------------------------------------------------- training

def head_forward(head, z):
    W, b = head
    return z @ W.value.T + b.value


def head_backward(head, z, dlogits):
    W, b = head
    W.grad += dlogits.T @ z
    b.grad += dlogits.sum(axis=0, keepdims=True)
    return dlogits @ W.value


def f1_score(y_true, y_pred):
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return 2 * tp / (2 * tp + fp + fn) if tp else 0.0


def stratified_split(labels, frac, rng):
    """Indices (train, val) with ``frac`` of each class in validation."""
    labels = np.asarray(labels)
    val = []
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        idx = idx[rng.permutation(len(idx))]
        n_val = int(round(frac * len(idx)))
        if len(idx) >= 2:
            n_val = min(max(n_val, 1), len(idx) - 1)
        else:
            n_val = 0
        val.extend(idx[:n_val].tolist())
    val = np.array(sorted(val), dtype=np.intp)
    train = np.setdiff1d(np.arange(len(labels)), val)
    return train, val


def _class_weights(y, mode):
    if mode is None:
        return None
    if mode != "balanced":
        raise ValueError(f"unknown class_weight {mode!r}")
    n = len(y)
    w = np.empty(n)
    for cls in (0, 1):
        m = y == cls
        w[m] = n / (2.0 * max(m.sum(), 1))
    return w


@dataclass
class TrainedExtractor:
    kind: str
    model: object
    best_epoch: int
    history: list = field(default_factory=list)


def train_extractor(kind, graph, train_users, labels, config=None):
    """Full-batch Adam on cross-entropy through a linear 2-class head.

    Early stopping watches validation F1 (ties broken by validation loss)
    and restores the best parameters. ``kind`` is 'tce' or 'sce'.
    """
    config = config or ExtractorConfig()
    y = np.asarray(labels, dtype=np.intp)
    if not (y == 1).any():
        raise NoPositives("training set has no drainers")
    rng = np.random.default_rng(config.seed)
    tr, va = stratified_split(y, config.val_frac, rng)
    users = list(train_users)
    if kind == "tce":
        model = TCE(config.hidden, config.heads, config.seed, config.leaky_slope)
        ctx = TceContext(graph, users)
        lr = config.lr or TCE_LR

        def encode():
            return model.forward(ctx)

        def encode_backward(cache, dz):
            model.backward(ctx, cache, dz)
    elif kind == "sce":
        model = SCE(config.hidden, config.layers, config.seed)
        ctx = SceContext(graph, config.norm)
        idx = np.array([graph.user_index[u] for u in users], dtype=np.intp)
        lr = config.lr or SCE_LR

        def encode():
            h, cache = model.forward(ctx)
            return h[idx], cache

        def encode_backward(cache, dz):
            dh = np.zeros((len(graph.users), model.hidden))
            np.add.at(dh, idx, dz)
            model.backward(ctx, cache, dh)
    else:
        raise ValueError(f"unknown extractor {kind!r}")

    w_train = _class_weights(y[tr], config.class_weight)
    w_val = _class_weights(y[va], config.class_weight)
    best = (-1.0, np.inf)
    best_state = [p.value.copy() for p in model.params]
    best_epoch = 0
    stale = 0
    history = []
    # each forward pass scores the current parameters on the validation rows
    # before the Adam step, so one pass per epoch serves both purposes
    best_loss = np.inf
    for epoch in range(config.max_epochs + 1):
        z, cache = encode()
        logits = head_forward(model.head, z)
        loss, dlogits_tr = cross_entropy(logits[tr], y[tr], w_train)
        if len(va):
            val_loss, _ = cross_entropy(logits[va], y[va], w_val)
            val_f1 = f1_score(y[va], (logits[va, 1] > logits[va, 0]).astype(int))
        else:
            val_loss, val_f1 = loss, f1_score(y[tr], (logits[tr, 1] > logits[tr, 0]).astype(int))
        history.append((epoch, loss, val_loss, val_f1))
        improved = False
        if (val_f1, -val_loss) > (best[0], -best[1]):
            best = (val_f1, val_loss)
            best_state = [p.value.copy() for p in model.params]
            best_epoch = epoch
            improved = True
        if val_loss < best_loss:
            best_loss = val_loss
            improved = True
        # patience runs out only when neither F1 nor loss has improved
        stale = 0 if improved else stale + 1
        if stale >= config.patience or epoch == config.max_epochs:
            break
        dlogits = np.zeros_like(logits)
        dlogits[tr] = dlogits_tr
        dz = head_backward(model.head, z, dlogits)
        encode_backward(cache, dz)
        adam_step(model.params, lr)
    for p, v in zip(model.params, best_state):
        p.value = v
    logger.info("%s: best epoch %d (val F1 %.3f, val loss %.4f)", kind, best_epoch, best[0], best[1])
    return TrainedExtractor(kind, model, best_epoch, history)
