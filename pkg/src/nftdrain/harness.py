"""Dataset construction, metrics and end-to-end experiment orchestration."""
from __future__ import annotations

import csv
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from nftdrain import evasion, features, graphs, measure
from nftdrain.config import InvalidConfig, config_from_mapping, config_to_lines
from nftdrain.extractors import ExtractorConfig, sce_forward, tce_forward, train_extractor
from nftdrain.model import fuse, parse_ablation, save_svm, svm_predict, svm_train
from nftdrain.nn import save_checkpoint
from nftdrain.synth import DRAINER, SynthConfig, generate_ecosystem, read_labels
from nftdrain.txdata import GIFT, NULL_ACCOUNT, SALE, classify_events, read_marketplaces, \
    read_transfer_events

logger = logging.getLogger(__name__)

TRAIN, EVAL = "TRAIN", "EVAL"
STANDARD_EVAL_RATIOS = (10, 100, 1000)


class PoolTooSmall(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class StageError(RuntimeError):
    """Wraps an exception raised inside a pipeline stage."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")
        self.stage = stage
        self.cause = exc


# ---------------------------------------------------------------- metrics

@dataclass(frozen=True)
class MetricsReport:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int
    tn: int
    seed: int = 0

    @property
    def n_positive(self):
        return self.tp + self.fn

    @property
    def n_negative(self):
        return self.fp + self.tn


def compute_metrics(predictions, labels, seed=0):
    """Confusion-matrix metrics with drainers (1) as the positive class."""
    p = np.asarray(predictions).astype(bool)
    y = np.asarray(labels).astype(bool)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.shape} predictions vs {y.shape} labels")
    tp = int(np.sum(p & y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    tn = int(np.sum(~p & ~y))
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec > 0 else 0.0
    return MetricsReport(prec, rec, f1, tp, fp, fn, tn, seed)


# ---------------------------------------------------------------- datasets

@dataclass
class DatasetSpec:
    role: str
    ratio: int
    heavy_ratio: int = 0
    heavy_threshold: int = 50
    seed: int = 0
    window: tuple = (None, None)

    def __post_init__(self):
        if self.role not in (TRAIN, EVAL):
            raise ValueError(f"role must be {TRAIN} or {EVAL}")
        if self.ratio <= 0 or self.heavy_ratio < 0:
            raise ValueError("sampling ratios must be positive")


@dataclass
class LabeledAccounts:
    accounts: list
    labels: np.ndarray
    n_heavy: int = 0

    @property
    def drainers(self):
        return [a for a, y in zip(self.accounts, self.labels) if y == 1]

    @property
    def regulars(self):
        return [a for a, y in zip(self.accounts, self.labels) if y == 0]


def suspicious_accounts(records, affiliated, drainers=frozenset()):
    """Affiliated users plus non-drainer accounts that gift NFTs to them."""
    affiliated = frozenset(affiliated)
    gifters = {rec.sender for rec in records
               if rec.kind == GIFT and rec.receiver in affiliated and rec.sender not in drainers}
    return affiliated | gifters


def _window(records, window):
    lo, hi = window
    return [r for r in records if (lo is None or r.timestamp >= lo) and (hi is None or r.timestamp < hi)]


def _sample(pool, n, rng, what):
    pool = sorted(pool)
    if n > len(pool):
        raise PoolTooSmall(f"{what}: need {n} accounts, pool has {len(pool)}")
    idx = rng.choice(len(pool), size=n, replace=False)
    return sorted(pool[k] for k in idx)


def _labeled(drainers, regulars, n_heavy=0):
    accounts = sorted(drainers) + sorted(regulars)
    labels = np.concatenate([np.ones(len(drainers), dtype=np.intp), np.zeros(len(regulars), dtype=np.intp)])
    return LabeledAccounts(accounts, labels, n_heavy)


def build_training_dataset(records, drainers, spec, excluded=frozenset(), null_account=NULL_ACCOUNT):
    """Drainers active in the window plus ratio-sampled regular users.

    The regular pool keeps accounts that received an NFT from another user
    and have a positive active timespan, minus ``excluded`` (affiliated users
    and those gifting to them). ``spec.heavy_ratio`` heavy users (more than
    ``spec.heavy_threshold`` transactions) per drainer are drawn first, then
    ``spec.ratio`` per drainer from the rest of the pool.
    """
    drainers = frozenset(drainers)
    if not drainers:
        raise ValueError("build_training_dataset needs drainers")
    recs = _window(records, spec.window)
    by_user = measure.user_records(recs, null_account)
    train_drainers = sorted(d for d in drainers if d in by_user)
    if not train_drainers:
        raise PoolTooSmall("no drainer is active in the training window")
    received = {r.receiver for r in recs if r.kind in (SALE, GIFT) and r.sender != null_account}
    pool = []
    for acct in received:
        if acct in drainers or acct in excluded or acct == null_account:
            continue
        ts = [r.timestamp for r in by_user[acct]]
        if max(ts) > min(ts):
            pool.append(acct)
    rng = np.random.default_rng(spec.seed)
    n_d = len(train_drainers)
    # heavy users first so the scarce pool is not thinned by the base sample
    heavy_pool = [a for a in pool if len(by_user[a]) > spec.heavy_threshold]
    heavy = _sample(heavy_pool, spec.heavy_ratio * n_d, rng, "heavy-user pool") if spec.heavy_ratio else []
    chosen = set(heavy)
    base = _sample([a for a in pool if a not in chosen], spec.ratio * n_d, rng, "training regular pool")
    return _labeled(train_drainers, base + heavy, len(heavy))


def build_eval_dataset(records, drainers, spec, excluded=frozenset(), null_account=NULL_ACCOUNT):
    """Drainers active in the window plus ``spec.ratio`` sampled regulars per drainer.

    The regular pool is every non-drainer account active in the window that
    is not in ``excluded`` (suspicious accounts, training centrals).
    """
    if spec.ratio not in STANDARD_EVAL_RATIOS:
        logger.warning("evaluation ratio %d is outside the usual 10/100/1000", spec.ratio)
    drainers = frozenset(drainers)
    recs = _window(records, spec.window)
    by_user = measure.user_records(recs, null_account)
    eval_drainers = sorted(d for d in drainers if d in by_user and d not in excluded)
    if not eval_drainers:
        raise PoolTooSmall("no drainer is active in the evaluation window")
    pool = [a for a in by_user if a not in drainers and a not in excluded]
    rng = np.random.default_rng(spec.seed)
    regulars = _sample(pool, spec.ratio * len(eval_drainers), rng, "evaluation regular pool")
    return _labeled(eval_drainers, regulars)


# ---------------------------------------------------------------- window features

@dataclass
class WindowData:
    """Unscaled features and graphs for the records of one time window."""

    records: list
    collection_end: int
    episodes: list
    edge_raw: np.ndarray
    users: list
    user_raw: np.ndarray
    user_index: dict
    nft_graph: graphs.NftUserGraph
    user_graph: graphs.UserGraph
    by_user: dict = field(repr=False, default_factory=dict)


def prepare_window(records, collection_end, strict=True, null_account=NULL_ACCOUNT, nft_degree_cap=64):
    """Episodes, raw features and both graphs for ``records``.

    NFT nodes with more than ``nft_degree_cap`` owners keep a seeded sample
    of their edges (0 disables the cap).
    """
    eps = measure.episodes(records, collection_end, strict=strict)
    eps = [ep for ep in eps if ep.owner != null_account]
    stats = features.nft_statistics(eps, records)
    edge_raw = features.edge_feature_matrix(eps, stats)
    by_user = measure.user_records(records, null_account)
    users = sorted(by_user)
    user_raw = features.user_attribute_matrix(users, by_user, null_account)
    ng = graphs.build_nft_user_graph(eps, edge_raw)
    if nft_degree_cap:
        ng = graphs.cap_neighbors(ng, nft_degree_cap, seed=0)
    ug = graphs.build_user_graph(records, users, user_raw, null_account)
    return WindowData(records, collection_end, eps, edge_raw, users, user_raw,
                      {u: k for k, u in enumerate(users)}, ng, ug, by_user)


@dataclass
class Scalers:
    edge: features.Scaler
    user: features.Scaler

    def to_arrays(self):
        return {**self.edge.to_arrays("scaler.edge"), **self.user.to_arrays("scaler.user")}


def fit_scalers(window, accounts):
    rows = [window.user_index[a] for a in accounts]
    user = features.fit_scaler(window.user_raw, rows, features.USER_RAW_DIMS)
    acct = set(accounts)
    erows = [k for k, ep in enumerate(window.episodes) if ep.owner in acct]
    if len(erows) < 2:
        erows = None
    edge = features.fit_scaler(window.edge_raw, erows, features.EDGE_RAW_DIMS)
    return Scalers(edge, user)


def scaled_graphs(window, scalers):
    ng = window.nft_graph
    ug = window.user_graph
    ng = graphs.NftUserGraph(ng.users, ng.nfts, ng.edge_user, ng.edge_nft,
                             scalers.edge.transform(ng.edge_attr), ng.user_index, ng.nft_index)
    ug = graphs.UserGraph(ug.users, scalers.user.transform(ug.attrs), ug.edge_src, ug.edge_dst,
                          ug.edge_rel, ug.edge_mult, ug.user_index)
    return ng, ug


# ---------------------------------------------------------------- pipeline config

@dataclass
class PipelineConfig:
    seeds: str = "0,1,2,3,4"
    events: str = ""
    labels: str = ""
    marketplaces: str = ""
    train_frac: float = 7.0 / 12.0
    train_ratio: int = 70
    heavy_ratio: int = 10
    heavy_threshold: int = 50
    eval_ratio: int = 100
    hops: int = 2
    nft_degree_cap: int = 64
    hidden: int = 64
    heads: int = 8
    max_epochs: int = 200
    patience: int = 10
    tce_lr: float = 6e-4
    sce_lr: float = 2e-3
    norm: str = "total"
    class_weight: str = "balanced"
    svm_c: float = 0.1
    svm_gamma: str = "scale"
    drop: str = ""
    compare_user_only: int = 1
    attack: int = 0
    attack_level: float = 50.0
    attack_pay_pct: float = 60.0
    defend_fraction: float = 0.03
    strict: int = 1
    synth: SynthConfig = field(default_factory=SynthConfig)

    @property
    def seed_list(self):
        try:
            return [int(s) for s in self.seeds.split(",") if s.strip()]
        except ValueError:
            raise InvalidConfig(f"seeds must be comma-separated integers, got {self.seeds!r}") from None

    @property
    def gamma(self):
        if self.svm_gamma == "scale":
            return "scale"
        try:
            return float(self.svm_gamma)
        except ValueError:
            raise InvalidConfig(f"svm_gamma must be a number or 'scale', got {self.svm_gamma!r}") from None

    @property
    def drop_blocks(self):
        return parse_ablation([s.strip() for s in self.drop.split(",") if s.strip()])

    def validate(self):
        if not self.seed_list:
            raise InvalidConfig("at least one seed is required")
        if not 0.0 < self.train_frac < 1.0:
            raise InvalidConfig("train_frac must lie in (0, 1)")
        for name in ("train_ratio", "eval_ratio", "hidden", "heads", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise InvalidConfig(f"{name} must be positive")
        if self.heavy_ratio < 0:
            raise InvalidConfig("heavy_ratio must be >= 0")
        if self.nft_degree_cap < 0:
            raise InvalidConfig("nft_degree_cap must be >= 0")
        if self.norm not in ("total", "relation"):
            raise InvalidConfig("norm must be 'total' or 'relation'")
        if self.class_weight not in ("", "balanced"):
            raise InvalidConfig("class_weight must be empty or 'balanced'")
        if self.attack not in (0, 1, 2, 3, 4):
            raise InvalidConfig("attack must be 0 (none) or 1..4")
        if not isinstance(self.gamma, str) and self.gamma <= 0:
            raise InvalidConfig("svm_gamma must be positive")
        try:
            self.drop_blocks
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from None
        self.synth.validate()
        return self

    def extractor_config(self, seed):
        return ExtractorConfig(hidden=self.hidden, heads=self.heads, max_epochs=self.max_epochs,
                               patience=self.patience, norm=self.norm,
                               class_weight=self.class_weight or None, seed=seed)

    def to_lines(self):
        lines = [line for line in config_to_lines(self) if not line.startswith("synth =")]
        return lines + config_to_lines(self.synth, "synth.")


def pipeline_config_from_mapping(mapping):
    cfg = config_from_mapping(mapping, PipelineConfig)
    cfg.synth = config_from_mapping(mapping, SynthConfig, "synth.")
    return cfg.validate()


# ---------------------------------------------------------------- corpus

@dataclass
class Corpus:
    records: list
    drainers: frozenset
    start: int
    end: int
    train_end: int
    suspicious: frozenset
    ground_truth: object = None


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:   # noqa: BLE001 - re-raised with the stage name
                raise StageError(name, exc) from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_stage("ingest")
def load_corpus(cfg):
    """Read (or synthesize) events, classify them and split the time range."""
    truth = None
    if cfg.events:
        events, _ = read_transfer_events(cfg.events, strict=bool(cfg.strict))
        if not cfg.labels:
            raise InvalidConfig("labels file is required with an events file")
        labels = read_labels(cfg.labels)
        markets = read_marketplaces(cfg.marketplaces) if cfg.marketplaces else frozenset()
        records = classify_events(events, markets)
        if not records:
            raise measure.EmptyInput("no NFT records")
        start, end = records[0].timestamp, records[-1].timestamp + 1
    else:
        events, truth = generate_ecosystem(cfg.synth)
        labels = truth.labels
        records = classify_events(events, truth.marketplaces)
        start, end = cfg.synth.start_ts, cfg.synth.end_ts
    drainers = frozenset(a for a, lab in labels.items() if lab == DRAINER)
    if not drainers:
        raise PoolTooSmall("labels contain no drainers")
    affiliated = measure.find_affiliated_users(records, drainers)
    train_end = start + int(cfg.train_frac * (end - start))
    return Corpus(records, drainers, start, end, train_end,
                  suspicious_accounts(records, affiliated, drainers), truth)


# ---------------------------------------------------------------- per-seed run

@dataclass
class SeedRun:
    seed: int
    train: LabeledAccounts
    eval: LabeledAccounts
    metrics: dict                  # variant -> MetricsReport
    fused_dims: int
    attack_audit: object = None


def _embed(window, scalers, accounts, tce, sce, cfg, hops):
    ng, ug = scaled_graphs(window, scalers)
    sub = graphs.select_evaluation_subgraph(ng, ug, accounts, hops)
    blocks = {}
    if tce is not None:
        out, _ = tce_forward(sub.nft_graph, tce.model, accounts)
        blocks["tce"] = dict(zip(accounts, out))
    if sce is not None:
        out = sce_forward(sub.user_graph, sce.model, accounts, cfg.norm)
        blocks["sce"] = dict(zip(accounts, out))
    rows = scalers.user.transform(window.user_raw[[window.user_index[a] for a in accounts]])
    blocks["user"] = dict(zip(accounts, rows))
    return blocks


def _fused(blocks, accounts, drop):
    return fuse(accounts, blocks.get("tce"), blocks.get("sce"), blocks.get("user"), drop).X


def run_seed(cfg, corpus, train_win, eval_win, seed, out_dir=None):
    drop = cfg.drop_blocks
    train = _stage("sample")(build_training_dataset)(
        train_win.records, corpus.drainers,
        DatasetSpec(TRAIN, cfg.train_ratio, cfg.heavy_ratio, cfg.heavy_threshold, seed),
        excluded=corpus.suspicious)
    ev = _stage("sample")(build_eval_dataset)(
        eval_win.records, corpus.drainers, DatasetSpec(EVAL, cfg.eval_ratio, seed=seed),
        excluded=corpus.suspicious | frozenset(train.accounts))

    scalers = _stage("features")(fit_scalers)(train_win, train.accounts)
    ng, ug = scaled_graphs(train_win, scalers)
    sub = _stage("graphs")(graphs.select_evaluation_subgraph)(ng, ug, train.accounts, cfg.hops)
    xcfg = cfg.extractor_config(seed)
    tce = sce = None
    train_stage = _stage("train")
    if "tce" not in drop:
        xcfg.lr = cfg.tce_lr
        tce = train_stage(train_extractor)("tce", sub.nft_graph, train.accounts, train.labels, xcfg)
    if "sce" not in drop:
        xcfg.lr = cfg.sce_lr
        sce = train_stage(train_extractor)("sce", sub.user_graph, train.accounts, train.labels, xcfg)

    tr_blocks = _stage("embed")(_embed)(train_win, scalers, train.accounts, tce, sce, cfg, cfg.hops)
    ev_blocks = _stage("embed")(_embed)(eval_win, scalers, ev.accounts, tce, sce, cfg, cfg.hops)
    X_tr = _fused(tr_blocks, train.accounts, drop)
    X_ev = _fused(ev_blocks, ev.accounts, drop)
    svm = train_stage(svm_train)(X_tr, train.labels, C=cfg.svm_c, gamma=cfg.gamma, seed=seed)
    pred = svm_predict(svm, X_ev)
    metrics = {"full": compute_metrics(pred.label, ev.labels, seed)}

    if cfg.compare_user_only and drop != frozenset({"tce", "sce"}):
        only_user = frozenset({"tce", "sce"})
        svm_u = train_stage(svm_train)(_fused(tr_blocks, train.accounts, only_user), train.labels,
                                       C=cfg.svm_c, gamma=cfg.gamma, seed=seed)
        pred_u = svm_predict(svm_u, _fused(ev_blocks, ev.accounts, only_user))
        metrics["user_only"] = compute_metrics(pred_u.label, ev.labels, seed)

    audit = None
    if cfg.attack:
        spec = evasion.AttackSpec.from_number(cfg.attack, cfg.attack_level,
                                              cfg.attack_pay_pct if cfg.attack in (3, 4) else None, seed)
        eval_drainers = ev.drainers
        result = _stage("attack")(evasion.apply_attack)(eval_win.records, eval_drainers, spec)
        audit = result
        att_win = _stage("attack")(prepare_window)(result.records, eval_win.collection_end, bool(cfg.strict),
                                                      nft_degree_cap=cfg.nft_degree_cap)
        att_blocks = _stage("embed")(_embed)(att_win, scalers, ev.accounts, tce, sce, cfg, cfg.hops)
        X_att = _fused(att_blocks, ev.accounts, drop)
        pred_a = svm_predict(svm, X_att)
        metrics["attacked"] = compute_metrics(pred_a.label, ev.labels, seed)
        att_map = dict(zip(ev.accounts, X_att))
        svm_d, held = _stage("defend")(evasion.defend_retrain)(
            X_tr, train.labels, att_map, eval_drainers, cfg.defend_fraction, seed,
            C=cfg.svm_c, gamma=cfg.gamma)
        keep = set(held) | set(ev.regulars)
        rows = [k for k, a in enumerate(ev.accounts) if a in keep]
        pred_d = svm_predict(svm_d, X_att[rows])
        metrics["defended"] = compute_metrics(pred_d.label, ev.labels[rows], seed)
        # the attacked model on the same held-out rows, for a like-for-like comparison
        metrics["attacked_heldout"] = compute_metrics(pred_a.label[rows], ev.labels[rows], seed)

    if out_dir:
        _save_seed_artifacts(out_dir, seed, scalers, tce, sce, svm, ev, X_ev, pred)
    return SeedRun(seed, train, ev, metrics, X_tr.shape[1], audit)


def _save_seed_artifacts(out_dir, seed, scalers, tce, sce, svm, ev, X_ev, pred):
    d = os.path.join(out_dir, f"seed{seed}")
    os.makedirs(d, exist_ok=True)
    arrays = scalers.to_arrays()
    for ext in (tce, sce):
        if ext is not None:
            arrays.update(ext.model.to_arrays())
    save_checkpoint(os.path.join(d, "extractors.ckpt"), arrays)
    save_svm(svm, os.path.join(d, "svm.ckpt"))
    with open(os.path.join(d, "predictions.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["account", "label", "predicted", "decision", "risk"])
        for a, y, p, dec, r in zip(ev.accounts, ev.labels, pred.label, pred.decision, pred.risk):
            w.writerow([a, int(y), int(p), f"{dec:.10g}", f"{r:.10g}"])
    features.write_feature_csv(os.path.join(d, "eval_embeddings.csv"), ev.accounts, X_ev,
                               [f"x{k}" for k in range(X_ev.shape[1])])


# ---------------------------------------------------------------- reports

METRIC_FIELDS = ("precision", "recall", "f1", "tp", "fp", "fn", "tn")


@dataclass
class PipelineResult:
    runs: list
    mean: dict          # variant -> {field: mean}
    corpus_stats: dict


def _mean_metrics(runs):
    variants = sorted({v for r in runs for v in r.metrics})
    out = {}
    for v in variants:
        reps = [r.metrics[v] for r in runs if v in r.metrics]
        out[v] = {f: float(np.mean([getattr(m, f) for m in reps])) for f in METRIC_FIELDS}
    return out


def write_reports(result, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "variant", *METRIC_FIELDS, "n_train", "n_eval", "fused_dims"])
        for r in result.runs:
            for v in sorted(r.metrics):
                m = r.metrics[v]
                w.writerow([r.seed, v, f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}",
                            m.tp, m.fp, m.fn, m.tn, len(r.train.accounts), len(r.eval.accounts),
                            r.fused_dims])
        for v, row in sorted(result.mean.items()):
            w.writerow(["mean", v, *(f"{row[f]:.6f}" for f in METRIC_FIELDS), "", "", ""])
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_summary(result))


def render_summary(result):
    lines = ["corpus:"]
    for k, v in sorted(result.corpus_stats.items()):
        lines.append(f"  {k}: {v}")
    lines.append(f"seeds: {', '.join(str(r.seed) for r in result.runs)}")
    lines.append("mean metrics:")
    lines.append(f"  {'variant':<18} {'precision':>9} {'recall':>9} {'f1':>9} {'tp':>8} {'fp':>8}")
    for v, row in sorted(result.mean.items()):
        lines.append(f"  {v:<18} {row['precision']:>9.4f} {row['recall']:>9.4f} {row['f1']:>9.4f} "
                     f"{row['tp']:>8.1f} {row['fp']:>8.1f}")
    return "\n".join(lines) + "\n"


def run_pipeline(cfg, out_dir=None):
    """Ingest, build features and graphs, train, evaluate (and optionally attack/defend).

    Returns a :class:`PipelineResult`; with ``out_dir`` also writes
    checkpoints, predictions and the CSV/text reports.
    """
    cfg.validate()
    corpus = load_corpus(cfg)
    strict = bool(cfg.strict)
    train_recs = [r for r in corpus.records if r.timestamp < corpus.train_end]
    eval_recs = [r for r in corpus.records if r.timestamp >= corpus.train_end]
    cap = cfg.nft_degree_cap
    train_win = _stage("features")(prepare_window)(train_recs, corpus.train_end, strict, nft_degree_cap=cap)
    eval_win = _stage("features")(prepare_window)(eval_recs, corpus.end, strict, nft_degree_cap=cap)
    runs = []
    for seed in cfg.seed_list:
        logger.info("seed %d", seed)
        runs.append(run_seed(cfg, corpus, train_win, eval_win, seed, out_dir))
    counts = Counter(r.kind for r in corpus.records)
    stats = {
        "records": len(corpus.records),
        "records_by_kind": ", ".join(f"{k}={counts[k]}" for k in sorted(counts)),
        "drainers": len(corpus.drainers),
        "train_window_end": corpus.train_end,
        "train_accounts": len(runs[0].train.accounts),
        "train_drainers": len(runs[0].train.drainers),
        "eval_accounts": len(runs[0].eval.accounts),
        "eval_drainers": len(runs[0].eval.drainers),
        "fused_dims": runs[0].fused_dims,
    }
    result = PipelineResult(runs, _mean_metrics(runs), stats)
    if out_dir:
        write_reports(result, out_dir)
        with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(cfg.to_lines()) + "\n")
    return result


def relative_drop(clean, attacked):
    return (clean - attacked) / clean if clean > 0 else math.nan
