"""Transfer-log ingestion and NFT transaction classification.

An NFT transfer is a MINT when it comes from the null account, a BURN when it
goes to it, a SALE when the receiver paid the sender (Ether or fungible
tokens, directly or through a marketplace account) inside the same blockchain
transaction, and a GIFT otherwise.
"""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple

logger = logging.getLogger(__name__)

NULL_ACCOUNT = "0x" + "0" * 40

NFT, FT, ETHER = "NFT", "FT", "ETHER"
TOKEN_KINDS = (NFT, FT, ETHER)

MINT, SALE, GIFT, BURN = "MINT", "SALE", "GIFT", "BURN"
RECORD_KINDS = (MINT, SALE, GIFT, BURN)

EVENT_KEYS = ("tx_hash", "log_index", "token_kind", "contract", "token_id",
              "from", "to", "amount", "timestamp")
RECORD_KEYS = ("contract", "token_id", "from", "to", "kind", "price_eth",
               "timestamp", "tx_hash")


class DataError(Exception):
    """Base class for input data problems (CLI exit code 2)."""


class MalformedRecord(DataError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NegativeAmount(MalformedRecord):
    pass


@dataclass(frozen=True, slots=True)
class TransferEvent:
    tx_hash: str
    log_index: int
    token_kind: str
    contract: str
    token_id: str | None
    sender: str
    receiver: str
    amount: float
    timestamp: int

    def to_json(self):
        return {"tx_hash": self.tx_hash, "log_index": self.log_index,
                "token_kind": self.token_kind, "contract": self.contract,
                "token_id": self.token_id, "from": self.sender, "to": self.receiver,
                "amount": self.amount, "timestamp": self.timestamp}


@dataclass(frozen=True, slots=True)
class TransactionRecord:
    contract: str
    token_id: str
    sender: str
    receiver: str
    kind: str
    price_eth: float
    timestamp: int
    tx_hash: str

    @property
    def token(self):
        return (self.contract, self.token_id)

    def to_json(self):
        return {"contract": self.contract, "token_id": self.token_id,
                "from": self.sender, "to": self.receiver, "kind": self.kind,
                "price_eth": self.price_eth, "timestamp": self.timestamp,
                "tx_hash": self.tx_hash}


class Payment(NamedTuple):
    payer: str
    payee: str
    amount_eth: float
    via_marketplace: bool


def _event_from_obj(obj, line_no, null_account):
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "not a JSON object")
    keys = set(obj)
    if keys != set(EVENT_KEYS):
        missing = sorted(set(EVENT_KEYS) - keys)
        extra = sorted(keys - set(EVENT_KEYS))
        raise MalformedRecord(line_no, f"bad keys (missing={missing}, extra={extra})")
    kind = obj["token_kind"]
    if kind not in TOKEN_KINDS:
        raise MalformedRecord(line_no, f"unknown token_kind {kind!r}")
    for key in ("tx_hash", "contract", "from", "to"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise MalformedRecord(line_no, f"{key} must be a non-empty string")
    token_id = obj["token_id"]
    if kind == NFT:
        if token_id is None or token_id == "":
            raise MalformedRecord(line_no, "NFT event without token_id")
        token_id = str(token_id)
    elif token_id is not None:
        token_id = str(token_id)
    amount = obj["amount"]
    if isinstance(amount, bool) or not isinstance(amount, (int, float)):
        raise MalformedRecord(line_no, "amount must be a number")
    if amount != amount or amount in (float("inf"), float("-inf")):
        raise MalformedRecord(line_no, "amount must be finite")
    if amount < 0:
        raise NegativeAmount(line_no, f"negative amount {amount}")
    log_index, ts = obj["log_index"], obj["timestamp"]
    for key, val in (("log_index", log_index), ("timestamp", ts)):
        if isinstance(val, bool) or not isinstance(val, int) or val < 0:
            raise MalformedRecord(line_no, f"{key} must be a nonnegative integer")
    sender, receiver = obj["from"], obj["to"]
    if sender == receiver and sender != null_account:
        raise MalformedRecord(line_no, "self transfer")
    return TransferEvent(obj["tx_hash"], log_index, kind, obj["contract"], token_id,
                         sender, receiver, float(amount), ts)


def parse_transfer_events(source: Iterable[str], strict: bool = True,
                          null_account: str = NULL_ACCOUNT):
    """Parse JSONL transfer events.

    Blank lines are ignored. In strict mode the first bad line raises
    :class:`MalformedRecord`; otherwise bad lines are skipped and reported.

    Returns ``(events, skipped)`` where ``skipped`` is a list of
    ``(line_no, reason)``.
    """
    events = []
    skipped = []
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedRecord(line_no, f"invalid JSON ({exc.msg})") from None
            events.append(_event_from_obj(obj, line_no, null_account))
        except MalformedRecord as exc:
            if strict:
                raise
            skipped.append((line_no, exc.reason))
    if skipped:
        logger.warning("skipped %d malformed line(s)", len(skipped))
    return events, skipped


def read_transfer_events(path, strict=True, null_account=NULL_ACCOUNT):
    with open(path, encoding="utf-8") as fh:
        return parse_transfer_events(fh, strict=strict, null_account=null_account)


def write_transfer_events(events, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_json(), separators=(",", ":")) + "\n")


def read_marketplaces(path):
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


def group_by_tx(events):
    groups = defaultdict(list)
    for ev in events:
        groups[ev.tx_hash].append(ev)
    return groups


def _flatten_group(evs, marketplaces):
    direct = []
    inflow = defaultdict(float)   # payer -> amount paid into marketplaces
    deposits = []
    outflow = []
    for ev in evs:
        src_mp = ev.sender in marketplaces
        dst_mp = ev.receiver in marketplaces
        if not src_mp and dst_mp:
            inflow[ev.sender] += ev.amount
            deposits.append(ev)
        elif src_mp and not dst_mp:
            outflow.append(ev)
        elif not src_mp and not dst_mp:
            direct.append(Payment(ev.sender, ev.receiver, ev.amount, False))
        # marketplace-to-marketplace hops are internal routing
    payments = list(direct)
    total_in = sum(inflow.values())
    total_out = sum(ev.amount for ev in outflow)
    # a marketplace never passes on more of a payer's money than it received
    cap = min(1.0, total_in / total_out) if total_out > 0 else 1.0
    for ev in outflow:
        if total_in <= 0:
            payments.append(Payment(ev.sender, ev.receiver, ev.amount, False))
        elif len(inflow) == 1:
            (payer,) = inflow
            payments.append(Payment(payer, ev.receiver, ev.amount * cap, True))
        else:
            for payer, paid in inflow.items():
                payments.append(Payment(payer, ev.receiver, ev.amount * cap * paid / total_in, True))
    if not outflow:
        # deposits that were never forwarded stay visible as direct payments
        payments.extend(Payment(ev.sender, ev.receiver, ev.amount, False) for ev in deposits)
    return payments


def build_payment_index(events, marketplace_accounts=frozenset()):
    """Map tx_hash to the Ether/FT payments inside it.

    Payments that pass through a marketplace account are flattened to
    (original payer, final payee, forwarded amount, True). When several
    payers fund the same marketplace hop the forwarded amount is split in
    proportion to what each paid in, and forwarded amounts are capped at
    the total paid in.
    """
    marketplaces = frozenset(marketplace_accounts)
    money = defaultdict(list)
    for ev in events:
        if ev.token_kind != NFT:
            money[ev.tx_hash].append(ev)
    return {tx: _flatten_group(evs, marketplaces) for tx, evs in money.items()}


def _paid(index, tx_hash, buyer, seller):
    return sum(p.amount_eth for p in index.get(tx_hash, ()) if p.payer == buyer and p.payee == seller)


def classify_transfer(nft_event, index, null_account=NULL_ACCOUNT, bundle_size=1):
    """Classify one NFT transfer.

    ``bundle_size`` is the number of NFTs the same seller sent to the same
    buyer in this transaction; a shared payment is split evenly among them.
    """
    if nft_event.token_kind != NFT:
        raise ValueError("classify_transfer needs an NFT event")
    ev = nft_event
    if ev.sender == null_account:
        kind, price = MINT, 0.0
    elif ev.receiver == null_account:
        kind, price = BURN, 0.0
    else:
        paid = _paid(index, ev.tx_hash, ev.receiver, ev.sender)
        if paid > 0:
            kind, price = SALE, paid / bundle_size
        else:
            kind, price = GIFT, 0.0
    return TransactionRecord(ev.contract, ev.token_id, ev.sender, ev.receiver,
                             kind, price, ev.timestamp, ev.tx_hash)


def classify_events(events, marketplace_accounts=frozenset(), null_account=NULL_ACCOUNT):
    """Classify every NFT event; output is ordered by timestamp, then input order."""
    index = build_payment_index(events, marketplace_accounts)
    bundles = defaultdict(int)
    for ev in events:
        if ev.token_kind == NFT:
            bundles[(ev.tx_hash, ev.sender, ev.receiver)] += 1
    records = [classify_transfer(ev, index, null_account,
                                 bundles[(ev.tx_hash, ev.sender, ev.receiver)])
               for ev in events if ev.token_kind == NFT]
    order = sorted(range(len(records)), key=lambda k: records[k].timestamp)
    return [records[k] for k in order]


def write_records(records, path):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(), separators=(",", ":")) + "\n")


def read_records(path):
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(TransactionRecord(obj["contract"], str(obj["token_id"]), obj["from"],
                                             obj["to"], obj["kind"], float(obj["price_eth"]),
                                             int(obj["timestamp"]), obj["tx_hash"]))
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                raise MalformedRecord(line_no, f"bad record ({exc})") from None
    return out
