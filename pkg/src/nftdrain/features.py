"""Ownership-edge attributes, user node attributes and feature scaling."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from nftdrain.measure import DAY, NoRecords, role, role_counts, _ratios
from nftdrain.txdata import MINT, NULL_ACCOUNT, SALE

EDGE_DIMS = (
    "holding_time_days",
    "in_mint", "in_buy", "in_gift",
    "out_sell", "out_gift", "out_hold",
    "in_price_eth", "out_price_eth",
    "nft_avg_holding_time_days", "nft_avg_sale_price_eth",
)

TX_TYPES = ("mint", "buy", "gift_in", "sell", "gift_out")
NEIGHBOR_TYPES = ("buy", "sell", "gift_in", "gift_out")

USER_DIMS = (
    "active_timespan_days", "gift_in_ratio", "out_in_ratio",
    *(f"n_tx_{t}" for t in TX_TYPES),
    *(f"n_collections_{t}" for t in TX_TYPES),
    *(f"n_neighbors_{t}" for t in NEIGHBOR_TYPES),
    "freq_gift_in", "freq_sell",
)

# dims that stay on their natural scale (one-hots, bounded ratios)
EDGE_RAW_DIMS = frozenset(range(1, 7))
USER_RAW_DIMS = frozenset({1, 2})


class EmptyTrainingSet(ValueError):
    pass


def nft_statistics(episode_list, records):
    """Per-token (average holding time over all owners, average sale price)."""
    ht = defaultdict(list)
    for ep in episode_list:
        ht[ep.token].append(ep.holding_time_days)
    prices = defaultdict(list)
    for rec in records:
        if rec.kind == SALE:
            prices[rec.token].append(rec.price_eth)
    out = {}
    for token, hts in ht.items():
        ps = prices.get(token, ())
        out[token] = (sum(hts) / len(hts), sum(ps) / len(ps) if ps else 0.0)
    return out


def ownership_edge_features(episode, nft_stats):
    """The 11-dim edge vector of one ownership episode (see ``EDGE_DIMS``)."""
    v = np.zeros(len(EDGE_DIMS))
    v[0] = episode.holding_time_days
    rin = episode.in_record
    if rin.kind == MINT:
        v[1] = 1.0
    elif rin.kind == SALE:
        v[2] = 1.0
        v[7] = rin.price_eth
    else:
        v[3] = 1.0
    rout = episode.out_record
    if rout is None:
        v[6] = 1.0
        v[8] = -1.0
    elif rout.kind == SALE:
        v[4] = 1.0
        v[8] = rout.price_eth
    else:
        # gifts and burns both leave without payment
        v[5] = 1.0
    v[9], v[10] = nft_stats
    return v


def edge_feature_matrix(episode_list, nft_stats):
    if not episode_list:
        return np.zeros((0, len(EDGE_DIMS)))
    return np.vstack([ownership_edge_features(ep, nft_stats[ep.token]) for ep in episode_list])


def user_node_attributes(user, records, null_account=NULL_ACCOUNT):
    """The 19-dim behaviour vector of ``user`` (see ``USER_DIMS``)."""
    mine = [rec for rec in records if rec.sender == user or rec.receiver == user]
    if not mine:
        raise NoRecords(user)
    ts = [rec.timestamp for rec in mine]
    span = (max(ts) - min(ts)) / DAY
    counts = role_counts(user, mine)
    g_ratio, oi_ratio = _ratios(counts)
    collections = defaultdict(set)
    neighbors = defaultdict(set)
    for rec in mine:
        r = role(user, rec)
        if r is None or r == "burn":
            continue
        collections[r].add(rec.contract)
        other = rec.sender if rec.receiver == user else rec.receiver
        if other != null_account:
            neighbors[r].add(other)
    v = np.empty(len(USER_DIMS))
    v[0] = span
    v[1] = g_ratio
    v[2] = oi_ratio
    v[3:8] = [counts[t] for t in TX_TYPES]
    v[8:13] = [len(collections[t]) for t in TX_TYPES]
    v[13:17] = [len(neighbors[t]) for t in NEIGHBOR_TYPES]
    v[17] = counts["gift_in"] / span if span > 0 else 0.0
    v[18] = counts["sell"] / span if span > 0 else 0.0
    return v


def user_attribute_matrix(users, by_user, null_account=NULL_ACCOUNT):
    return np.vstack([user_node_attributes(u, by_user[u], null_account) for u in users]) \
        if len(users) else np.zeros((0, len(USER_DIMS)))


@dataclass(frozen=True)
class Scaler:
    shift: np.ndarray
    scale: np.ndarray
    log_mask: np.ndarray

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (_compress(X, self.log_mask) - self.shift) / self.scale

    def to_arrays(self, prefix):
        return {f"{prefix}.shift": self.shift[None, :], f"{prefix}.scale": self.scale[None, :],
                f"{prefix}.log_mask": self.log_mask.astype(np.float64)[None, :]}

    @classmethod
    def from_arrays(cls, arrays, prefix):
        return cls(arrays[f"{prefix}.shift"][0], arrays[f"{prefix}.scale"][0],
                   arrays[f"{prefix}.log_mask"][0] > 0.5)


def _compress(X, log_mask):
    out = X.copy()
    cols = out[:, log_mask]
    # negative entries are sentinels (out-price -1) and are left as they are
    out[:, log_mask] = np.where(cols >= 0, np.log1p(np.maximum(cols, 0.0)), cols)
    return out


def fit_scaler(X, rows=None, raw_dims=frozenset()):
    """log1p-compress the heavy-tailed dims, then standardise on the training rows.

    Dims in ``raw_dims`` (one-hots, ratios) keep shift 0 and scale 1;
    constant dims get scale 1.
    """
    X = np.asarray(X, dtype=np.float64)
    train = X if rows is None else X[np.asarray(rows)]
    if train.shape[0] < 2:
        raise EmptyTrainingSet("scaler needs at least two training rows")
    d = X.shape[1]
    log_mask = np.array([k not in raw_dims for k in range(d)])
    Z = _compress(train, log_mask)
    shift = Z.mean(axis=0)
    scale = Z.std(axis=0)
    scale = np.where(scale > 1e-12, scale, 1.0)
    shift = np.where(log_mask, shift, 0.0)
    scale = np.where(log_mask, scale, 1.0)
    return Scaler(shift, scale, log_mask)


def apply_scaler(scaler, X):
    return scaler.transform(X)


def write_feature_csv(path, ids, X, dims, id_header="account"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([id_header, *dims])
        for ident, row in zip(ids, X):
            w.writerow([ident, *(repr(float(x)) for x in row)])


def read_feature_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        ids, rows = [], []
        for line in r:
            ids.append(line[0])
            rows.append([float(x) for x in line[1:]])
    return header, ids, np.asarray(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
