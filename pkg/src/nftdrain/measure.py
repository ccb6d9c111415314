"""Drainer activity characterization over classified NFT records."""
from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from nftdrain.txdata import BURN, GIFT, MINT, NULL_ACCOUNT, SALE, DataError

DAY = 86400.0


class BrokenChain(DataError):
    def __init__(self, token, detail=""):
        super().__init__(f"broken ownership chain for {token}: {detail}")
        self.token = token


class NoRecords(ValueError):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class OwnershipEpisode:
    token: tuple
    owner: str
    in_record: object
    out_record: object | None
    holding_time_days: float


@dataclass(frozen=True)
class ComparisonStats:
    n_total: int
    n_below_avg: int
    n_is_min: int
    percent_decrease_mean: float
    percent_decrease_std: float
    n_excluded: int = 0

    @property
    def frac_below(self):
        return self.n_below_avg / self.n_total if self.n_total else 0.0


class FateRow(NamedTuple):
    count: int
    share: float
    pct_eventually_sold: float


FATE_BUCKETS = ("SELL", "GIFT_OUT_1", "GIFT_OUT_2PLUS", "NONE")


def token_chains(records):
    """Group records by token, keeping their (time) order."""
    chains = defaultdict(list)
    for rec in records:
        chains[rec.token].append(rec)
    return chains


def episodes(records, collection_end, strict=True):
    """Split each token's record chain into ownership episodes.

    A record whose sender is not the current owner raises
    :class:`BrokenChain`; with ``strict=False`` the token is dropped instead.
    Chains that start with a transfer (no mint in view) begin with the
    receiver of that transfer.
    """
    out = []
    for token, chain in token_chains(records).items():
        try:
            out.extend(_token_episodes(token, chain, collection_end))
        except BrokenChain:
            if strict:
                raise
    return out


def _token_episodes(token, chain, collection_end):
    eps = []
    owner = None
    in_rec = None
    burned = False
    for rec in chain:
        if burned:
            raise BrokenChain(token, "record after burn")
        if owner is not None:
            if rec.sender != owner:
                raise BrokenChain(token, f"{rec.sender} is not the owner {owner}")
            eps.append(OwnershipEpisode(token, owner, in_rec, rec,
                                        max(rec.timestamp - in_rec.timestamp, 0) / DAY))
        if rec.kind == BURN:
            owner, in_rec, burned = None, None, True
        else:
            owner, in_rec = rec.receiver, rec
    if owner is not None:
        eps.append(OwnershipEpisode(token, owner, in_rec, None,
                                    max(collection_end - in_rec.timestamp, 0) / DAY))
    return eps


def user_records(records, null_account=NULL_ACCOUNT):
    """Index records by participating account (the null account excluded)."""
    by_user = defaultdict(list)
    for rec in records:
        if rec.sender != null_account:
            by_user[rec.sender].append(rec)
        if rec.receiver != null_account and rec.receiver != rec.sender:
            by_user[rec.receiver].append(rec)
    return by_user


def role(user, rec):
    """The user's side of a record: mint, buy, gift_in, sell, gift_out, burn or None."""
    if rec.receiver == user:
        if rec.kind == MINT:
            return "mint"
        if rec.kind == SALE:
            return "buy"
        if rec.kind == GIFT:
            return "gift_in"
    if rec.sender == user:
        if rec.kind == SALE:
            return "sell"
        if rec.kind == GIFT:
            return "gift_out"
        if rec.kind == BURN:
            return "burn"
    return None


def role_counts(user, records):
    counts = dict.fromkeys(("mint", "buy", "gift_in", "sell", "gift_out", "burn"), 0)
    for rec in records:
        r = role(user, rec)
        if r is not None:
            counts[r] += 1
    return counts


def active_timespan(user, records):
    """Days between the user's first and last record."""
    ts = [rec.timestamp for rec in records if rec.sender == user or rec.receiver == user]
    if not ts:
        raise NoRecords(user)
    return (max(ts) - min(ts)) / DAY


def _ratios(c):
    n_in = c["mint"] + c["buy"] + c["gift_in"]
    if n_in == 0:
        return 0.0, 0.0
    return c["gift_in"] / n_in, (c["sell"] + c["gift_out"]) / n_in


def gift_in_ratio(user, records):
    return _ratios(role_counts(user, records))[0]


def out_in_ratio(user, records):
    return _ratios(role_counts(user, records))[1]


def _drainer_gift_outs(records, drainers):
    """Yield GIFT records in which a drainer passes on an NFT it was gifted."""
    drainers = frozenset(drainers)
    for chain in token_chains(records).values():
        got_by_gift = {}
        for rec in chain:
            if rec.kind == GIFT and rec.sender in drainers and got_by_gift.get(rec.sender):
                yield rec
            got_by_gift.pop(rec.sender, None)
            got_by_gift[rec.receiver] = rec.kind == GIFT


def find_affiliated_users(records, drainers, null_account=NULL_ACCOUNT):
    """Accounts gifted a drained NFT (one gifted in to a drainer) by that drainer."""
    drainers = frozenset(drainers)
    if not drainers:
        raise ValueError("find_affiliated_users needs at least one drainer")
    return frozenset(rec.receiver for rec in _drainer_gift_outs(records, drainers)
                     if rec.receiver not in drainers and rec.receiver != null_account)


def drain_events(records, drainers):
    """(token, index in chain) of each gift from a non-drainer to a drainer."""
    drainers = frozenset(drainers)
    out = []
    for token, chain in token_chains(records).items():
        for k, rec in enumerate(chain):
            if rec.kind == GIFT and rec.receiver in drainers and rec.sender not in drainers:
                out.append((token, chain, k))
    return out


def _fate(chain, k):
    drainer = chain[k].receiver
    rest = chain[k + 1:]
    if not rest or rest[0].sender != drainer:
        return "NONE", False
    if rest[0].kind == SALE:
        return "SELL", True
    gifts = 0
    for rec in rest:
        if rec.kind == SALE:
            return ("GIFT_OUT_1" if gifts == 1 else "GIFT_OUT_2PLUS"), True
        gifts += 1
    return ("GIFT_OUT_1" if gifts == 1 else "GIFT_OUT_2PLUS"), False


def drained_nft_fates(records, drainers):
    """Bucket each drained NFT by what the drainer did next.

    GIFT_OUT buckets count the gifts made before the first sale after the
    drain. Returns ``{bucket: FateRow}`` including a ``"TOTAL"`` row.
    """
    counts = dict.fromkeys(FATE_BUCKETS, 0)
    sold = dict.fromkeys(FATE_BUCKETS, 0)
    for _, chain, k in drain_events(records, drainers):
        bucket, was_sold = _fate(chain, k)
        counts[bucket] += 1
        sold[bucket] += was_sold
    total = sum(counts.values())
    table = {}
    for b in FATE_BUCKETS:
        table[b] = FateRow(counts[b], counts[b] / total if total else 0.0,
                           100.0 * sold[b] / counts[b] if counts[b] else 0.0)
    n_sold = sum(sold.values())
    table["TOTAL"] = FateRow(total, 1.0 if total else 0.0, 100.0 * n_sold / total if total else 0.0)
    return table


def percent_decrease(reference, value):
    return 100.0 * (reference - value) / reference


def _stats(n_total, n_below, n_min, decreases, n_excluded):
    if decreases:
        arr = np.asarray(decreases)
        mean, std = float(arr.mean()), float(arr.std())
    else:
        mean, std = math.nan, math.nan
    return ComparisonStats(n_total, n_below, n_min, mean, std, n_excluded)


def _out_kind(rec):
    return "sell" if rec.kind == SALE else "gift_out"


def holding_time_comparison(episode_list, drainers, affiliated=frozenset(), out_kind=None):
    """Compare drainer holding times with the NFT's regular-owner average.

    Only drainer episodes that started with a gift-in and ended with an
    out-transaction count (optionally just ``out_kind`` 'sell'/'gift_out').
    Percent-decrease statistics are taken over the episodes that were
    shorter than the regular average.
    """
    drainers = frozenset(drainers)
    excluded_owners = drainers | frozenset(affiliated)
    by_token = defaultdict(list)
    for ep in episode_list:
        by_token[ep.token].append(ep)
    n_total = n_below = n_min = n_excl = 0
    decreases = []
    for eps in by_token.values():
        regular = [ep.holding_time_days for ep in eps if ep.owner not in excluded_owners]
        for ep in eps:
            if ep.owner not in drainers or ep.out_record is None or ep.in_record.kind != GIFT:
                continue
            if out_kind is not None and _out_kind(ep.out_record) != out_kind:
                continue
            if not regular or sum(regular) <= 0:
                n_excl += 1
                continue
            avg = sum(regular) / len(regular)
            ht = ep.holding_time_days
            n_total += 1
            if ht <= min(regular):
                n_min += 1
            if ht < avg:
                n_below += 1
                decreases.append(percent_decrease(avg, ht))
    return _stats(n_total, n_below, n_min, decreases, n_excl)


def price_comparison(records, drainers, affiliated=frozenset()):
    """Compare drain-sale prices with the NFT's average and closest-in-time sale prices.

    The drain sale is the first sale after a drain, made by a drainer or an
    affiliated account. Returns ``(vs_average, vs_closest)``.
    """
    sellers = frozenset(drainers) | frozenset(affiliated)
    rows = {"avg": [0, 0, 0, []], "closest": [0, 0, 0, []]}
    n_excl = 0
    for _, chain, k in drain_events(records, drainers):
        drain_sale = None
        for rec in chain[k + 1:]:
            if rec.kind == SALE:
                if rec.sender in sellers:
                    drain_sale = rec
                break
        if drain_sale is None:
            continue
        others = [rec for rec in chain if rec.kind == SALE and rec is not drain_sale]
        if not others:
            n_excl += 1
            continue
        prices = [rec.price_eth for rec in others]
        p_avg = sum(prices) / len(prices)
        closest = min(others, key=lambda rec: (abs(rec.timestamp - drain_sale.timestamp), rec.timestamp))
        p_min = min(prices)
        for key, ref in (("avg", p_avg), ("closest", closest.price_eth)):
            row = rows[key]
            row[0] += 1
            if drain_sale.price_eth <= p_min:
                row[2] += 1
            if ref > drain_sale.price_eth:
                row[1] += 1
                row[3].append(percent_decrease(ref, drain_sale.price_eth))
    return tuple(_stats(r[0], r[1], r[2], r[3], n_excl) for r in (rows["avg"], rows["closest"]))


def empirical_cdf(values):
    """Right-continuous empirical CDF as sorted ``(value, fraction <= value)`` pairs."""
    arr = np.sort(np.asarray(list(values), dtype=np.float64))
    if arr.size == 0:
        raise EmptyInput("empirical_cdf of no values")
    uniq, idx = np.unique(arr, return_index=True)
    ends = np.append(idx[1:], arr.size)
    return [(float(v), float(e) / arr.size) for v, e in zip(uniq, ends)]


def drainer_summary(records, drainers, collection_end):
    """Headline drainer statistics used for generator calibration checks."""
    drainers = sorted(drainers)
    by_user = user_records(records)
    gift_only = 0
    for d in drainers:
        c = role_counts(d, by_user.get(d, ()))
        if c["gift_in"] > 0 and c["mint"] == 0 and c["buy"] == 0:
            gift_only += 1
    aff_gifts = defaultdict(set)
    for rec in _drainer_gift_outs(records, drainers):
        if rec.receiver not in drainers:
            aff_gifts[rec.sender].add(rec.receiver)
    dset = frozenset(drainers)
    sells = [ep for ep in episodes(records, collection_end, strict=False)
             if ep.owner in dset and ep.out_record is not None and ep.out_record.kind == SALE
             and ep.in_record.kind == GIFT]
    fast = sum(ep.holding_time_days < 1.0 for ep in sells)
    n = len(drainers)
    return {
        "n_drainers": n,
        "frac_gift_in_only": gift_only / n if n else 0.0,
        "frac_with_affiliates": sum(1 for d in drainers if aff_gifts.get(d)) / n if n else 0.0,
        "sell_within_day_frac": fast / len(sells) if sells else 0.0,
    }


def write_fate_table(path, table):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["type", "n_gifting", "n_drained_nfts", "share", "pct_sold"])
        labels = {"SELL": ("sell", "0"), "GIFT_OUT_1": ("gift_out", "1"),
                  "GIFT_OUT_2PLUS": ("gift_out", ">=2"), "NONE": ("none", "0"),
                  "TOTAL": ("total", "")}
        for key in (*FATE_BUCKETS, "TOTAL"):
            row = table[key]
            w.writerow([*labels[key], row.count, f"{row.share:.6f}", f"{row.pct_eventually_sold:.4f}"])


def write_comparison_table(path, named_stats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "n_total", "n_below", "frac_below", "n_is_min",
                    "pd_mean", "pd_std", "n_excluded"])
        for name, s in named_stats:
            w.writerow([name, s.n_total, s.n_below_avg, f"{s.frac_below:.6f}", s.n_is_min,
                        f"{s.percent_decrease_mean:.4f}", f"{s.percent_decrease_std:.4f}",
                        s.n_excluded])


def write_cdf(path, pairs, name="value"):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name, "cumulative_fraction"])
        for v, f in pairs:
            w.writerow([repr(v), repr(f)])
