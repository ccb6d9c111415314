"""Seeded synthetic NFT ecosystem with planted drainers, affiliated users and victims.

The generator is an event-driven market simulation. Regular users mint,
buy, sell and gift tokens; drainers receive every NFT of each victim in one
transaction, then sell them fast at a discount, pass them to affiliated
accounts, or keep them. Mint-farm "consolidators" are regular accounts that
also collect NFTs by gift and sell them fast, but at market price; they keep
user-level statistics from being enough on their own.
"""
from __future__ import annotations

import dataclasses
import hashlib
import heapq
import math
import random
from dataclasses import dataclass, field

import numpy as np

from nftdrain.config import InvalidConfig, config_from_mapping, config_to_lines, read_key_values
from nftdrain.txdata import ETHER, FT, NFT, NULL_ACCOUNT, TransferEvent

DAY = 86400

REGULAR, DRAINER, AFFILIATED, VICTIM = "REGULAR", "DRAINER", "AFFILIATED", "VICTIM"
LABELS = (REGULAR, DRAINER, AFFILIATED, VICTIM)


@dataclass
class SynthConfig:
    seed: int = 0
    n_regular: int = 50000
    n_drainers: int = 200
    n_collections: int = 150
    start_ts: int = 1640995200            # 2022-01-01
    end_ts: int = 1672531200              # 2023-01-01
    # drainer behaviour
    frac_gift_in_only: float = 0.751
    frac_with_affiliates: float = 0.825
    sell_within_day_frac: float = 0.80
    price_discount_mean: float = 0.373
    price_discount_std: float = 0.249
    drain_fair_price_frac: float = 0.40
    drainer_span_median_days: float = 4.0
    victims_mean: float = 3.0
    slow_sell_median_days: float = 3.0
    affiliate_share_prob: float = 0.2
    # fate mix of drained NFTs
    fate_sell: float = 0.418
    fate_gift: float = 0.282
    fate_none: float = 0.301
    gift1_sold: float = 0.751
    gift2_frac: float = 0.149
    gift2_sold: float = 0.393
    # regular users
    regular_tx_median: float = 8.0
    regular_tx_sigma: float = 1.5
    regular_window_median_days: float = 120.0
    regular_holding_median_days: float = 3.0
    regular_holding_sigma: float = 1.0
    regular_hold_forever: float = 0.1
    regular_gift_frac: float = 0.2
    regular_burn_frac: float = 0.02
    price_noise_sigma: float = 0.25
    price_walk_sigma: float = 0.04
    # mint-farm consolidators (regular accounts)
    frac_consolidators: float = 0.03
    # payments
    n_marketplaces: int = 3
    marketplace_fee: float = 0.025
    marketplace_frac: float = 0.6
    ft_frac: float = 0.2

    def validate(self):
        fracs = [f.name for f in dataclasses.fields(self)
                 if f.name.startswith(("frac_", "fate_", "gift1", "gift2", "sell_within",
                                       "regular_hold_forever", "regular_gift", "regular_burn",
                                       "drain_fair", "affiliate_share", "marketplace_f", "ft_frac",
                                       "price_discount_mean"))]
        for name in fracs:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidConfig(f"{name}={v} must lie in [0, 1]")
        for name in ("n_regular", "n_drainers", "n_collections", "n_marketplaces"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be >= 0")
        if self.n_collections < 1 or self.n_regular < 2:
            raise InvalidConfig("need at least one collection and two regular users")
        if self.start_ts >= self.end_ts:
            raise InvalidConfig("start_ts must precede end_ts")
        if self.price_discount_std < 0:
            raise InvalidConfig("price_discount_std must be >= 0")
        if abs(self.fate_sell + self.fate_gift + self.fate_none - 1.0) > 0.01:
            raise InvalidConfig("fate_sell + fate_gift + fate_none must sum to 1 (within 0.01)")
        return self


def read_synth_config(path):
    return config_from_mapping(read_key_values(path), SynthConfig).validate()


def write_synth_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(config_to_lines(cfg)) + "\n")


@dataclass
class GroundTruth:
    labels: dict
    drain_fates: list = field(default_factory=list)    # (token, bucket, sold)
    consolidators: frozenset = frozenset()
    marketplaces: frozenset = frozenset()

    def accounts(self, label):
        return sorted(a for a, lab in self.labels.items() if lab == label)

    def write_labels(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("account,label\n")
            for acct in sorted(self.labels):
                fh.write(f"{acct},{self.labels[acct]}\n")


def read_labels(path):
    labels = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "account,label":
            raise InvalidConfig(f"{path}: expected header 'account,label'")
        for line in fh:
            line = line.strip()
            if line:
                acct, label = line.split(",")
                labels[acct] = label
    return labels


def _address(seed, kind, k):
    return "0x" + hashlib.sha1(f"{seed}:{kind}:{k}".encode()).hexdigest()


class _Sim:
    def __init__(self, cfg):
        self.cfg = cfg
        self.rng = random.Random(cfg.seed)
        self.nrng = np.random.default_rng(cfg.seed)
        self.events = []
        self.heap = []
        self.seq = 0
        self.tx_counter = 0
        self.owner = {}
        self.version = {}
        self.holdings = {}
        self.market_mult = {}
        self.minted = {}
        self.n_days = int(math.ceil((cfg.end_ts - cfg.start_ts) / DAY)) + 1

    # -------------------------------------------------------------- setup
    def setup(self):
        cfg, nrng = self.cfg, self.nrng
        n = cfg.n_regular
        self.regulars = [_address(cfg.seed, "user", k) for k in range(n)]
        self.marketplaces = [_address(cfg.seed, "market", k) for k in range(cfg.n_marketplaces)]
        self.ft_contract = _address(cfg.seed, "weth", 0)
        self.collections = [_address(cfg.seed, "collection", k) for k in range(cfg.n_collections)]
        pop = 1.0 / np.arange(1, cfg.n_collections + 1) ** 0.8
        self.coll_cum = np.cumsum(pop / pop.sum())
        self.coll_base = np.exp(nrng.normal(math.log(0.08), 1.0, cfg.n_collections))
        steps = nrng.normal(0.0, cfg.price_walk_sigma, (cfg.n_collections, self.n_days))
        self.coll_walk = np.cumsum(steps, axis=1)

        # activity weight sets how often a user is picked as counterparty
        w = np.exp(nrng.normal(0.0, cfg.regular_tx_sigma, n))
        span = cfg.end_ts - cfg.start_ts
        win = np.exp(nrng.normal(math.log(cfg.regular_window_median_days * DAY), 1.0, n))
        win = np.minimum(win, span)
        center = nrng.uniform(cfg.start_ts, cfg.end_ts, n)
        lo = np.clip(center - win / 2, cfg.start_ts, cfg.end_ts)
        hi = np.clip(center + win / 2, cfg.start_ts, cfg.end_ts)
        self.weights = w
        d_lo = ((lo - cfg.start_ts) // DAY).astype(int)
        d_hi = ((hi - cfg.start_ts) // DAY).astype(int)
        self.day_users, self.day_cum = [], []
        for d in range(self.n_days):
            idx = np.flatnonzero((d_lo <= d) & (d_hi >= d))
            if len(idx) == 0:
                idx = np.arange(n)
            self.day_users.append(idx)
            self.day_cum.append(np.cumsum(w[idx]))

        # expected participations per user ~ regular_tx_median * weight
        mean_part = cfg.regular_tx_median * float(np.mean(w))
        transfers_per_token = 1.0 / cfg.regular_hold_forever
        n_mints = int(n * mean_part / (2.0 * transfers_per_token))
        for _ in range(n_mints):
            t = self.rng.uniform(cfg.start_ts, cfg.end_ts - 1)
            self.push(t, "regular_mint", None)

    def day(self, t):
        return min(max(int((t - self.cfg.start_ts) // DAY), 0), self.n_days - 1)

    def active_user(self, t, exclude=None):
        d = self.day(t)
        idx, cum = self.day_users[d], self.day_cum[d]
        for _ in range(20):
            k = int(np.searchsorted(cum, self.rng.random() * cum[-1], side="right"))
            u = self.regulars[idx[min(k, len(idx) - 1)]]
            if u != exclude:
                return u
        return self.regulars[(self.regulars.index(exclude) + 1) % len(self.regulars)]

    def market_price(self, token, t):
        c = self.coll_index[token[0]]
        return float(self.coll_base[c] * self.market_mult[token] * math.exp(self.coll_walk[c, self.day(t)]))

    # -------------------------------------------------------------- events
    def push(self, t, kind, payload):
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, payload))

    def new_tx(self):
        self.tx_counter += 1
        return "0x%064x" % self.tx_counter

    def emit_nft(self, tx, log, token, sender, receiver, t):
        self.events.append(TransferEvent(tx, log, NFT, token[0], token[1], sender, receiver, 1.0, int(t)))

    def emit_pay(self, tx, log, kind, contract, sender, receiver, amount, t):
        self.events.append(TransferEvent(tx, log, kind, contract, None, sender, receiver,
                                         round(amount, 12), int(t)))

    def set_owner(self, token, who):
        prev = self.owner.get(token)
        if prev is not None and prev != NULL_ACCOUNT:
            self.holdings[prev].pop(token, None)
        self.owner[token] = who
        self.version[token] = self.version.get(token, 0) + 1
        if who != NULL_ACCOUNT:
            self.holdings.setdefault(who, {})[token] = None

    def mint(self, who, t, collection=None):
        if collection is None:
            c = int(np.searchsorted(self.coll_cum, self.rng.random(), side="right"))
            c = min(c, len(self.collections) - 1)
            collection = self.collections[c]
        k = self.minted.get(collection, 0)
        self.minted[collection] = k + 1
        token = (collection, str(k))
        self.market_mult[token] = math.exp(self.rng.gauss(0.0, 0.3))
        tx = self.new_tx()
        self.emit_nft(tx, 0, token, NULL_ACCOUNT, who, t)
        self.set_owner(token, who)
        return token

    def sale(self, token, seller, buyer, price, t):
        tx = self.new_tx()
        self.emit_nft(tx, 0, token, seller, buyer, t)
        r = self.rng.random()
        if self.marketplaces and r < self.cfg.marketplace_frac:
            m = self.marketplaces[self.rng.randrange(len(self.marketplaces))]
            gross = price / (1.0 - self.cfg.marketplace_fee)
            self.emit_pay(tx, 1, ETHER, ETHER, buyer, m, gross, t)
            self.emit_pay(tx, 2, ETHER, ETHER, m, seller, price, t)
        elif r < self.cfg.marketplace_frac + self.cfg.ft_frac:
            self.emit_pay(tx, 1, FT, self.ft_contract, buyer, seller, price, t)
        else:
            self.emit_pay(tx, 1, ETHER, ETHER, buyer, seller, price, t)
        self.set_owner(token, buyer)

    def gift(self, tokens, sender, receiver, t):
        tx = self.new_tx()
        for log, token in enumerate(tokens):
            self.emit_nft(tx, log, token, sender, receiver, t)
            self.set_owner(token, receiver)

    def burn(self, token, sender, t):
        tx = self.new_tx()
        self.emit_nft(tx, 0, token, sender, NULL_ACCOUNT, t)
        self.set_owner(token, NULL_ACCOUNT)

    def regular_price(self, token, t):
        return self.market_price(token, t) * math.exp(self.rng.gauss(0.0, self.cfg.price_noise_sigma))

    def schedule_regular(self, token, t):
        cfg = self.cfg
        if self.rng.random() < cfg.regular_hold_forever:
            return
        ht = math.exp(self.rng.gauss(math.log(cfg.regular_holding_median_days * DAY), cfg.regular_holding_sigma))
        t_out = t + max(ht, 60.0)
        if t_out < cfg.end_ts:
            self.push(t_out, "regular_out", (token, self.version[token]))

    def regular_out(self, token, t):
        cfg = self.cfg
        owner = self.owner[token]
        r = self.rng.random()
        if r < cfg.regular_burn_frac:
            self.burn(token, owner, t)
            return
        if r < cfg.regular_burn_frac + cfg.regular_gift_frac:
            self.gift([token], owner, self.active_user(t, owner), t)
        else:
            self.sale(token, owner, self.active_user(t, owner), self.regular_price(token, t), t)
        self.schedule_regular(token, t)

    def take_from_holder(self, t, exclude=()):
        """A regular account currently holding NFTs (activity-weighted)."""
        for _ in range(200):
            u = self.active_user(t)
            if u in exclude:
                continue
            if self.holdings.get(u):
                return u
        holders = sorted(u for u, h in self.holdings.items() if h and u in self.regular_set and u not in exclude)
        return holders[self.rng.randrange(len(holders))] if holders else None

    # -------------------------------------------------------------- drainers
    def setup_drainers(self):
        cfg, rng = self.cfg, self.rng
        self.drainers = [_address(cfg.seed, "drainer", k) for k in range(cfg.n_drainers)]
        self.affiliates = []
        self.affiliate_active = []
        self.drainer_affiliates = {}
        self.established = []
        self.established_set = set()
        self.drain_fates = {}
        self.victims = set()
        self.non_gift_only = set()
        n_non_gift = int(round(cfg.n_drainers * (1.0 - cfg.frac_gift_in_only)))
        order = list(range(cfg.n_drainers))
        rng.shuffle(order)
        self.non_gift_only = {self.drainers[k] for k in order[:n_non_gift]}
        rng.shuffle(order)
        n_aff = int(round(cfg.n_drainers * cfg.frac_with_affiliates))
        with_aff = {self.drainers[k] for k in order[:n_aff]}
        span_all = cfg.end_ts - cfg.start_ts
        for d in self.drainers:
            affs = []
            if d in with_aff:
                k = 1 + (1 if rng.random() < 0.25 else 0)
                for _ in range(k):
                    if self.affiliates and rng.random() < cfg.affiliate_share_prob:
                        a = self.affiliates[rng.randrange(len(self.affiliates))]
                    else:
                        a = _address(cfg.seed, "affiliate", len(self.affiliates))
                        self.affiliates.append(a)
                        if rng.random() < 0.4:
                            self.affiliate_active.append(a)
                    if a not in affs:
                        affs.append(a)
            self.drainer_affiliates[d] = affs
            t0 = rng.uniform(cfg.start_ts + 0.02 * span_all, cfg.end_ts - 20 * DAY)
            span = math.exp(rng.gauss(math.log(cfg.drainer_span_median_days * DAY), 0.8))
            n_vict = 1 + self._poisson(cfg.victims_mean - 1.0)
            times = sorted([t0] + [t0 + rng.random() * span for _ in range(n_vict - 1)])
            self.push(times[0], "drain", (d, True))
            for t in times[1:]:
                self.push(t, "drain", (d, False))
            if d in self.non_gift_only:
                for _ in range(1 + self._poisson(0.6)):
                    self.push(t0 + rng.random() * max(span, DAY), "drainer_acquire", d)

    def _poisson(self, lam):
        if lam <= 0:
            return 0
        # Knuth's method; lam is small here
        limit, k, p = math.exp(-lam), 0, 1.0
        while True:
            p *= self.rng.random()
            if p <= limit:
                return k
            k += 1

    def drain(self, drainer, first, t):
        victim = self.take_from_holder(t, exclude=self.affiliate_set)
        if victim is None:
            return
        held = list(self.holdings[victim])[:30]
        self.victims.add(victim)
        self.gift(held, victim, drainer, t)
        affs = self.drainer_affiliates[drainer]
        cfg = self.cfg
        has_aff = bool(affs)
        for i, token in enumerate(held):
            if has_aff:
                p_gift = cfg.fate_gift / max(cfg.frac_with_affiliates, 1e-9)
                rest = 1.0 - p_gift
                p_sell = rest * cfg.fate_sell / (cfg.fate_sell + cfg.fate_none)
            else:
                p_gift = 0.0
                p_sell = cfg.fate_sell / (cfg.fate_sell + cfg.fate_none)
            r = self.rng.random()
            if has_aff and first and i == 0:
                r = 0.0   # guarantee that drainers with affiliates use one
                fate = "gift"
            elif r < p_gift:
                fate = "gift"
            elif r < p_gift + p_sell:
                fate = "sell"
            else:
                fate = "none"
            ver = self.version[token]
            if fate == "sell":
                self.push(t + self.drainer_delay(), "drain_sell", (token, ver, drainer))
                self.drain_fates[(token, t)] = ["SELL", True]
            elif fate == "gift":
                a = affs[self.rng.randrange(len(affs))] if not (first and i == 0) else affs[0]
                self.push(t + self.drainer_delay(), "drain_gift", (token, ver, drainer, a, t))
                self.drain_fates[(token, t)] = ["GIFT_OUT_1", False]
            else:
                self.drain_fates[(token, t)] = ["NONE", False]

    def drainer_delay(self):
        cfg = self.cfg
        if self.rng.random() < cfg.sell_within_day_frac:
            return DAY * self.rng.uniform(0.01, 0.99)
        return DAY * (1.0 + math.exp(self.rng.gauss(math.log(cfg.slow_sell_median_days), 1.0)))

    def drain_price(self, token, t):
        cfg = self.cfg
        fair = self.market_price(token, t)
        if self.rng.random() < cfg.drain_fair_price_frac:
            return fair * math.exp(self.rng.gauss(0.0, cfg.price_noise_sigma))
        d = self.rng.gauss(cfg.price_discount_mean, cfg.price_discount_std)
        return fair * max(1.0 - d, 0.05)

    def drain_sell(self, token, seller, t):
        buyer = self.active_user(t)
        self.sale(token, seller, buyer, self.drain_price(token, t), t)
        self.schedule_regular(token, t)

    def affiliate_next(self, token, affiliate, drain_t, t):
        cfg = self.cfg
        fate = self.drain_fates[(token, drain_t)]
        if self.rng.random() < cfg.gift2_frac:
            others = [a for a in self.established if a != affiliate]
            if others:
                nxt = others[self.rng.randrange(len(others))]
                delay = math.exp(self.rng.gauss(math.log(0.3 * DAY), 1.0))
                self.push(t + delay, "affiliate_gift", (token, self.version[token], affiliate, nxt, drain_t))
                fate[0] = "GIFT_OUT_2PLUS"
                return
        p_sold = cfg.gift2_sold if fate[0] == "GIFT_OUT_2PLUS" else cfg.gift1_sold
        if self.rng.random() < p_sold:
            delay = math.exp(self.rng.gauss(math.log(0.4 * DAY), 1.0))
            self.push(t + delay, "affiliate_sell", (token, self.version[token], drain_t))

    def affiliate_gift_second(self, token, sender, receiver, drain_t, t):
        self.gift([token], sender, receiver, t)
        fate = self.drain_fates[(token, drain_t)]
        if self.rng.random() < self.cfg.gift2_sold:
            delay = math.exp(self.rng.gauss(math.log(0.4 * DAY), 1.0))
            self.push(t + delay, "affiliate_sell", (token, self.version[token], drain_t))
        del fate  # bucket already set

    # -------------------------------------------------------------- consolidators
    def setup_consolidators(self):
        cfg, rng = self.cfg, self.rng
        n = int(round(cfg.frac_consolidators * cfg.n_regular))
        self.consolidators = []
        self.farm_accounts = []
        span_all = cfg.end_ts - cfg.start_ts
        for k in range(n):
            c = _address(cfg.seed, "consolidator", k)
            vault = _address(cfg.seed, "vault", k)
            self.consolidators.append(c)
            t0 = rng.uniform(cfg.start_ts + 0.02 * span_all, cfg.end_ts - 20 * DAY)
            span = math.exp(rng.gauss(math.log(cfg.drainer_span_median_days * DAY), 0.8))
            n_farms = 1 + self._poisson(cfg.victims_mean - 1.0)
            n_coll = 1 + self._poisson(2.0)
            colls = [self.collections[min(int(np.searchsorted(self.coll_cum, rng.random(), side="right")),
                                          len(self.collections) - 1)] for _ in range(n_coll)]
            for f in range(n_farms):
                farm = _address(cfg.seed, f"farm{k}", f)
                self.farm_accounts.append(farm)
                tf = t0 + rng.random() * span
                n_tok = 1 + self._poisson(2.5)
                self.push(tf, "farm", (farm, c, vault, [colls[rng.randrange(n_coll)] for _ in range(n_tok)]))

    def farm(self, farm, consolidator, vault, colls, t):
        tokens = [self.mint(farm, t + i, coll) for i, coll in enumerate(colls)]
        tg = t + len(colls) + self.rng.uniform(60, 3 * 3600)
        self.push(tg, "farm_gift", (farm, consolidator, vault, tokens,
                                    [self.version[tok] for tok in tokens]))

    def farm_gift(self, farm, consolidator, vault, tokens, t):
        self.gift(tokens, farm, consolidator, t)
        for token in tokens:
            r = self.rng.random()
            ver = self.version[token]
            if r < 0.6:
                self.push(t + self.drainer_delay(), "cons_sell", (token, ver, consolidator))
            elif r < 0.85:
                delay = min(self.rng.expovariate(1.0 / (2 * 3600.0)), 0.9 * DAY)
                self.push(t + delay, "cons_gift", (token, ver, consolidator, vault))

    # -------------------------------------------------------------- main loop
    def run(self):
        cfg = self.cfg
        self.setup()
        self.regular_set = set(self.regulars)
        self.coll_index = {c: k for k, c in enumerate(self.collections)}
        self.setup_drainers()
        self.affiliate_set = set(self.affiliates)
        self.setup_consolidators()
        # trading affiliates join the regular counterparty pool from their first gift on
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            if t >= cfg.end_ts:
                break
            if kind == "regular_mint":
                who = self.active_user(t)
                token = self.mint(who, t)
                self.schedule_regular(token, t)
            elif kind == "regular_out":
                token, ver = payload
                if self.version[token] == ver:
                    self.regular_out(token, t)
            elif kind == "drain":
                drainer, first = payload
                self.drain(drainer, first, t)
            elif kind == "drainer_acquire":
                self.drainer_acquire(payload, t)
            elif kind == "drain_sell":
                token, ver, drainer = payload
                if self.version[token] == ver:
                    self.drain_sell(token, drainer, t)
            elif kind == "drain_gift":
                token, ver, drainer, aff, drain_t = payload
                if self.version[token] == ver:
                    self.gift([token], drainer, aff, t)
                    if aff not in self.established_set:
                        self.established_set.add(aff)
                        self.established.append(aff)
                    self.affiliate_next(token, aff, drain_t, t)
            elif kind == "affiliate_gift":
                token, ver, sender, receiver, drain_t = payload
                if self.version[token] == ver:
                    self.affiliate_gift_second(token, sender, receiver, drain_t, t)
            elif kind == "affiliate_sell":
                token, ver, drain_t = payload
                if self.version[token] == ver:
                    self.drain_fates[(token, drain_t)][1] = True
                    self.drain_sell(token, self.owner[token], t)
            elif kind == "farm":
                self.farm(*payload, t)
            elif kind == "farm_gift":
                farm, cons, vault, tokens, vers = payload
                live = [tok for tok, v in zip(tokens, vers) if self.version[tok] == v]
                if live:
                    self.farm_gift(farm, cons, vault, live, t)
            elif kind == "cons_sell":
                token, ver, cons = payload
                if self.version[token] == ver:
                    buyer = self.active_user(t)
                    self.sale(token, cons, buyer, self.regular_price(token, t), t)
                    self.schedule_regular(token, t)
            elif kind == "cons_gift":
                token, ver, cons, vault = payload
                if self.version[token] == ver:
                    self.gift([token], cons, vault, t)
        return self

    def drainer_acquire(self, drainer, t):
        if self.rng.random() < 0.5:
            self.mint(drainer, t)
            return
        seller = self.take_from_holder(t, exclude=self.affiliate_set)
        if seller is None:
            self.mint(drainer, t)
            return
        token = next(iter(self.holdings[seller]))
        self.sale(token, seller, drainer, self.regular_price(token, t), t)

    def ground_truth(self):
        participants = set()
        for ev in self.events:
            if ev.token_kind == NFT:
                participants.add(ev.sender)
                participants.add(ev.receiver)
        participants.discard(NULL_ACCOUNT)
        drainers = set(self.drainers)
        labels = {}
        for acct in participants:
            if acct in drainers:
                labels[acct] = DRAINER
            elif acct in self.established_set:
                labels[acct] = AFFILIATED
            elif acct in self.victims:
                labels[acct] = VICTIM
            else:
                labels[acct] = REGULAR
        fates = [(token, bucket, sold) for (token, _), (bucket, sold) in sorted(
            self.drain_fates.items(), key=lambda kv: (kv[0][1], kv[0][0]))]
        return GroundTruth(labels, fates, frozenset(self.consolidators), frozenset(self.marketplaces))


def generate_ecosystem(config):
    """Simulate the ecosystem; returns ``(events, ground_truth)``. Deterministic per seed."""
    config.validate()
    sim = _Sim(config)
    sim.run()
    return sim.events, sim.ground_truth()
