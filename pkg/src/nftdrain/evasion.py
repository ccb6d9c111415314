"""Evasion attacks as record transformations, and the SVM-retraining defense."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
import zlib
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from nftdrain.txdata import GIFT, MINT, NULL_ACCOUNT, SALE, TransactionRecord

MINT_ATTACK, TIMESPAN, PAY_VICTIM, COMBO = "MINT", "TIMESPAN", "PAY_VICTIM", "COMBO"
ATTACK_KINDS = (MINT_ATTACK, TIMESPAN, PAY_VICTIM, COMBO)
ATTACK_NUMBERS = {1: MINT_ATTACK, 2: TIMESPAN, 3: PAY_VICTIM, 4: COMBO}


class InvalidAttack(ValueError):
    pass


class NoGiftIns(ValueError):
    pass


class FractionTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    level: float
    pay_pct: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise InvalidAttack(f"unknown attack kind {self.kind!r}")
        if not self.level > 0:
            raise InvalidAttack("attack level must be > 0")
        if self.kind in (PAY_VICTIM, COMBO):
            if self.pay_pct is None or not 0 < self.pay_pct <= 60:
                raise InvalidAttack("pay_pct must lie in (0, 60] for victim-payment attacks")

    @classmethod
    def from_number(cls, number, level, pay_pct=None, seed=0):
        if number not in ATTACK_NUMBERS:
            raise InvalidAttack(f"attack number must be one of {sorted(ATTACK_NUMBERS)}")
        return cls(ATTACK_NUMBERS[number], level, pay_pct, seed)


@dataclass
class AttackResult:
    records: list
    audit: dict            # drainer -> [records_added, records_converted]
    no_gift_ins: list      # drainers skipped by the victim-payment step


def _sort_key(rec):
    return (rec.timestamp, rec.tx_hash, rec.contract, rec.token_id, rec.sender, rec.receiver)


def _drainer_rng(seed, drainer, step):
    return np.random.default_rng([seed, zlib.crc32(drainer.encode()), zlib.crc32(step.encode())])


def _throwaway_contract(drainer, seed, step):
    return "0x" + hashlib.sha1(f"throwaway:{step}:{seed}:{drainer}".encode()).hexdigest()


def _fake_tx(drainer, seed, step, k):
    return "0x" + hashlib.sha256(f"{step}:{seed}:{drainer}:{k}".encode()).hexdigest()


def _by_drainer(records, drainers):
    mine = defaultdict(list)
    for rec in records:
        for acct in (rec.sender, rec.receiver):
            if acct in drainers:
                mine[acct].append(rec)
    return mine


def _gift_ins(recs, drainer):
    return sorted((r for r in recs if r.kind == GIFT and r.receiver == drainer), key=_sort_key)


def _mint_step(records, drainers, level, seed, audit):
    mine = _by_drainer(records, drainers)
    added = []
    for d in sorted(drainers):
        recs = mine.get(d, [])
        n = math.ceil(level / 100.0 * len(_gift_ins(recs, d)) - 1e-9)
        if n <= 0:
            continue
        ts = [r.timestamp for r in recs]
        first, last = min(ts), max(ts)
        contract = _throwaway_contract(d, seed, "mint")
        for k in range(n):
            t = first + int(round((k + 1) * (last - first) / (n + 1)))
            added.append(TransactionRecord(contract, str(k), NULL_ACCOUNT, d, MINT, 0.0, t,
                                           _fake_tx(d, seed, "mint", k)))
        audit[d][0] += n
    return records + added


def _timespan_step(records, drainers, level, seed, audit):
    mine = _by_drainer(records, drainers)
    added = []
    for d in sorted(drainers):
        recs = mine.get(d)
        if not recs:
            continue
        ts = [r.timestamp for r in recs]
        first, span = min(ts), max(ts) - min(ts)
        t = first - int(round(level / 100.0 * span))
        added.append(TransactionRecord(_throwaway_contract(d, seed, "timespan"), "0", NULL_ACCOUNT, d,
                                       MINT, 0.0, t, _fake_tx(d, seed, "timespan", 0)))
        audit[d][0] += 1
    return added + records


def _avg_prices(records):
    """Average sale price per NFT, with collection and global fallbacks."""
    per_token, per_coll = defaultdict(list), defaultdict(list)
    for rec in records:
        if rec.kind == SALE:
            per_token[rec.token].append(rec.price_eth)
            per_coll[rec.contract].append(rec.price_eth)
    all_prices = [p for ps in per_token.values() for p in ps]
    glob = sum(all_prices) / len(all_prices) if all_prices else 0.0

    def price(token):
        ps = per_token.get(token) or per_coll.get(token[0])
        return sum(ps) / len(ps) if ps else glob
    return price


def _pay_step(records, drainers, level, pay_pct, seed, audit, skipped):
    mine = _by_drainer(records, drainers)
    avg_price = _avg_prices(records)
    convert = {}
    for d in sorted(drainers):
        gins = _gift_ins(mine.get(d, []), d)
        if not gins:
            skipped.append(d)
            continue
        n = int(round(level / 100.0 * len(gins)))
        if n == 0:
            continue
        rng = _drainer_rng(seed, d, "pay")
        for k in sorted(rng.choice(len(gins), size=n, replace=False).tolist()):
            rec = gins[k]
            convert[id(rec)] = dataclasses.replace(rec, kind=SALE,
                                                   price_eth=pay_pct / 100.0 * avg_price(rec.token))
        audit[d][1] += n
    return [convert.get(id(rec), rec) for rec in records]


def apply_attack(records, drainer_accounts, spec):
    """Transform drainer records according to ``spec``; returns an :class:`AttackResult`.

    Records of other accounts are untouched except the victim-side gift
    records that the victim-payment attack turns into sales.
    """
    drainers = frozenset(drainer_accounts)
    if not drainers:
        raise InvalidAttack("no drainers to attack")
    audit = {d: [0, 0] for d in sorted(drainers)}
    skipped = []
    # stable time order keeps same-second records in chain order
    recs = sorted(records, key=lambda r: r.timestamp)
    if spec.kind in (MINT_ATTACK, COMBO):
        recs = _mint_step(recs, drainers, 50.0 if spec.kind == COMBO else spec.level, spec.seed, audit)
    if spec.kind in (TIMESPAN, COMBO):
        recs = _timespan_step(recs, drainers, 50.0 if spec.kind == COMBO else spec.level, spec.seed, audit)
    if spec.kind in (PAY_VICTIM, COMBO):
        # prices come from the pre-attack sales so conversions do not feed back
        recs = _pay_step(recs, drainers, spec.level, spec.pay_pct, spec.seed, audit, skipped)
    recs.sort(key=lambda r: r.timestamp)
    return AttackResult(recs, audit, skipped)


def write_audit(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["drainer", "records_added", "records_converted"])
        for d, (added, converted) in sorted(result.audit.items()):
            w.writerow([d, added, converted])


def split_attackers(attacked, fraction=0.03, seed=0):
    """Seeded (train, held_out) split of attacked accounts for retraining."""
    attacked = sorted(attacked)
    n = int(round(fraction * len(attacked)))
    if n <= 0:
        raise FractionTooSmall(f"fraction {fraction} of {len(attacked)} attackers rounds to 0")
    rng = np.random.default_rng(seed)
    pick = set(rng.choice(len(attacked), size=n, replace=False).tolist())
    train = [a for k, a in enumerate(attacked) if k in pick]
    held = [a for k, a in enumerate(attacked) if k not in pick]
    return train, held


def defend_retrain(base_X, base_y, attacked_X, attacked_accounts, fraction=0.03, seed=0,
                   C=0.1, gamma=0.1):
    """Retrain only the SVM on the base set plus a sampled share of attacked drainers.

    ``attacked_X`` maps each attacked account to its fused vector computed
    on the attacked graph with frozen extractors. Returns
    ``(model, held_out_accounts)``.
    """
    from nftdrain.model import svm_train

    train, held = split_attackers(attacked_accounts, fraction, seed)
    X = np.vstack([np.asarray(base_X)] + [np.asarray(attacked_X[a])[None, :] for a in train])
    y = np.concatenate([np.asarray(base_y), np.ones(len(train), dtype=np.intp)])
    return svm_train(X, y, C=C, gamma=gamma, seed=seed), held
