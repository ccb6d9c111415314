"""Command-line entry point: ``nftdrain <subcommand> [options]``.

Exit codes: 0 ok, 1 usage or configuration error, 2 data error,
3 training failure.
"""
from __future__ import annotations

import argparse
import csv
import glob
import logging
import os
import sys

import numpy as np

from nftdrain import evasion, features, graphs, harness, measure
from nftdrain.config import InvalidConfig, read_key_values
from nftdrain.extractors import NoPositives
from nftdrain.model import DimMismatch, NonFiniteFeature, SingleClass
from nftdrain.synth import AFFILIATED, DRAINER, generate_ecosystem, read_labels, write_synth_config
from nftdrain.txdata import DataError, classify_events, read_marketplaces, read_records, \
    read_transfer_events, write_records, write_transfer_events

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN = 0, 1, 2, 3
TRAIN_STAGES = ("train", "embed", "defend")
TRAIN_ERRORS = (NoPositives, SingleClass, NonFiniteFeature, DimMismatch, FloatingPointError)
USAGE_ERRORS = (InvalidConfig, evasion.InvalidAttack, evasion.FractionTooSmall)

logger = logging.getLogger("nftdrain")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- helpers

def load_config(args):
    mapping = read_key_values(args.config) if args.config else {}
    cfg = harness.pipeline_config_from_mapping(mapping)
    if args.seed is not None:
        cfg.seeds = str(args.seed)
        cfg.synth.seed = args.seed
    if args.strict is not None:
        cfg.strict = int(args.strict)
    if getattr(args, "drop", None):
        cfg.drop = args.drop
    return cfg.validate()


def _out(args, name=None):
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name) if name else args.out


def _need(args, *names):
    missing = [n for n in names if not getattr(args, n, None)]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _load_records(args):
    _need(args, "records")
    return read_records(args.records)


def _drainers_from(args):
    _need(args, "labels")
    labels = read_labels(args.labels)
    return frozenset(a for a, lab in labels.items() if lab == DRAINER), labels


# ---------------------------------------------------------------- subcommands

def cmd_synth(args, cfg):
    events, truth = generate_ecosystem(cfg.synth)
    write_transfer_events(events, _out(args, "events.jsonl"))
    truth.write_labels(_out(args, "labels.csv"))
    with open(_out(args, "marketplaces.txt"), "w", encoding="utf-8") as fh:
        fh.write("".join(m + "\n" for m in sorted(truth.marketplaces)))
    write_synth_config(cfg.synth, _out(args, "synth_config.txt"))
    print(f"wrote {len(events)} events, {len(truth.accounts(DRAINER))} drainers to {args.out}")


def cmd_ingest(args, cfg):
    _need(args, "events")
    events, skipped = read_transfer_events(args.events, strict=bool(cfg.strict))
    markets = read_marketplaces(args.marketplaces) if args.marketplaces else frozenset()
    records = classify_events(events, markets)
    write_records(records, _out(args, "records.jsonl"))
    if skipped:
        with open(_out(args, "skipped.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["line", "reason"])
            w.writerows(skipped)
    print(f"classified {len(records)} NFT records from {len(events)} events ({len(skipped)} lines skipped)")


def cmd_measure(args, cfg):
    records = _load_records(args)
    drainers, labels = _drainers_from(args)
    end = args.end if args.end is not None else (records[-1].timestamp + 1 if records else 0)
    affiliated = measure.find_affiliated_users(records, drainers)
    eps = measure.episodes(records, end, strict=bool(cfg.strict))
    measure.write_fate_table(_out(args, "fates.csv"), measure.drained_nft_fates(records, drainers))
    measure.write_comparison_table(_out(args, "holding_time.csv"), [
        (k or "all", measure.holding_time_comparison(eps, drainers, affiliated, k))
        for k in (None, "sell", "gift_out")])
    avg, closest = measure.price_comparison(records, drainers, affiliated)
    measure.write_comparison_table(_out(args, "price.csv"), [("average", avg), ("closest", closest)])
    summary = measure.drainer_summary(records, drainers, end)
    known = frozenset(a for a, lab in labels.items() if lab == AFFILIATED)
    lines = [f"{k}: {v:.6g}" if isinstance(v, float) else f"{k}: {v}" for k, v in summary.items()]
    lines.append(f"affiliated_found: {len(affiliated)}")
    if known:
        lines.append(f"affiliated_labeled: {len(known)} (overlap {len(known & affiliated)})")
    with open(_out(args, "drainer_summary.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))


def cmd_features(args, cfg):
    records = _load_records(args)
    end = records[-1].timestamp + 1 if records else 0
    win = harness.prepare_window(records, end, bool(cfg.strict))
    features.write_feature_csv(_out(args, "user_attributes.csv"), win.users, win.user_raw, features.USER_DIMS)
    ids = [f"{ep.owner}|{ep.token[0]}:{ep.token[1]}|{ep.in_record.timestamp}" for ep in win.episodes]
    features.write_feature_csv(_out(args, "edge_features.csv"), ids, win.edge_raw, features.EDGE_DIMS,
                               id_header="episode")
    print(f"{len(win.users)} users x {win.user_raw.shape[1]} attributes, "
          f"{len(win.episodes)} edges x {win.edge_raw.shape[1]} features")


def cmd_graphs(args, cfg):
    records = _load_records(args)
    end = records[-1].timestamp + 1 if records else 0
    win = harness.prepare_window(records, end, bool(cfg.strict))
    win.nft_graph.check_bipartite()
    graphs.dump_graphs(win.nft_graph, win.user_graph, _out(args))
    print(f"nft-user graph: {len(win.nft_graph.users)} users, {len(win.nft_graph.nfts)} nfts, "
          f"{win.nft_graph.n_edges} edges; user graph: {win.user_graph.n_edges} edges")


def _apply_input_paths(args, cfg):
    for name in ("events", "labels", "marketplaces"):
        if getattr(args, name, None):
            setattr(cfg, name, getattr(args, name))


def cmd_train(args, cfg):
    _apply_input_paths(args, cfg)
    cfg.attack = 0
    result = harness.run_pipeline(cfg, _out(args))
    for run in result.runs:
        print(f"seed {run.seed}: {len(run.train.accounts)} training accounts, "
              f"artifacts in {os.path.join(args.out, f'seed{run.seed}')}")


def cmd_evaluate(args, cfg):
    """Recompute metrics from the per-seed predictions written by ``train``."""
    src = args.predictions or args.out
    paths = sorted(glob.glob(os.path.join(src, "seed*", "predictions.csv")))
    if not paths:
        raise UsageError(f"no seed*/predictions.csv under {src}")
    rows = []
    for path in paths:
        seed = int(os.path.basename(os.path.dirname(path))[4:])
        with open(path, newline="") as fh:
            data = list(csv.DictReader(fh))
        y = np.array([int(r["label"]) for r in data])
        p = np.array([int(r["predicted"]) for r in data])
        rows.append(harness.compute_metrics(p, y, seed))
    with open(_out(args, "eval_metrics.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", *harness.METRIC_FIELDS])
        for m in rows:
            w.writerow([m.seed, f"{m.precision:.6f}", f"{m.recall:.6f}", f"{m.f1:.6f}", m.tp, m.fp, m.fn, m.tn])
    for m in rows:
        print(f"seed {m.seed}: precision {m.precision:.4f} recall {m.recall:.4f} f1 {m.f1:.4f}")
    print(f"mean f1 {np.mean([m.f1 for m in rows]):.4f}")


def _attack_spec(args, cfg, required=True):
    number = args.attack if args.attack is not None else cfg.attack
    if not number:
        if required:
            raise UsageError("--attack {1,2,3,4} is required")
        return None
    level = args.level if args.level is not None else cfg.attack_level
    pay = args.pay_pct if args.pay_pct is not None else cfg.attack_pay_pct
    seed = args.seed if args.seed is not None else 0
    return evasion.AttackSpec.from_number(number, level, pay if number in (3, 4) else None, seed)


def cmd_attack(args, cfg):
    records = _load_records(args)
    drainers, _ = _drainers_from(args)
    spec = _attack_spec(args, cfg)
    result = evasion.apply_attack(records, drainers, spec)
    write_records(result.records, _out(args, "attacked_records.jsonl"))
    evasion.write_audit(_out(args, "attack_audit.csv"), result)
    added = sum(a for a, _ in result.audit.values())
    converted = sum(c for _, c in result.audit.values())
    print(f"attack {spec.kind} level {spec.level:g}: {added} records added, {converted} converted, "
          f"{len(result.no_gift_ins)} drainers without gift-ins")


def cmd_defend(args, cfg):
    _apply_input_paths(args, cfg)
    spec = _attack_spec(args, cfg)
    cfg.attack = args.attack if args.attack is not None else cfg.attack
    cfg.attack_level = spec.level
    if spec.pay_pct is not None:
        cfg.attack_pay_pct = spec.pay_pct
    if args.fraction is not None:
        cfg.defend_fraction = args.fraction
    result = harness.run_pipeline(cfg, _out(args))
    print(harness.render_summary(result), end="")


def cmd_report(args, cfg):
    _apply_input_paths(args, cfg)
    if args.attack:
        _attack_spec(args, cfg)
        cfg.attack = args.attack
        if args.level is not None:
            cfg.attack_level = args.level
        if args.pay_pct is not None:
            cfg.attack_pay_pct = args.pay_pct
    result = harness.run_pipeline(cfg, _out(args))
    print(harness.render_summary(result), end="")


COMMANDS = {
    "synth": (cmd_synth, "generate a synthetic ecosystem with ground-truth labels"),
    "ingest": (cmd_ingest, "parse transfer events and classify NFT records"),
    "measure": (cmd_measure, "drainer behaviour tables (fates, holding time, price)"),
    "features": (cmd_features, "user attributes and ownership-edge features"),
    "graphs": (cmd_graphs, "dump the NFT-user and user-user graphs as CSV"),
    "train": (cmd_train, "train extractors and the SVM per seed and save artifacts"),
    "evaluate": (cmd_evaluate, "recompute metrics from saved predictions"),
    "attack": (cmd_attack, "apply an evasion attack to a record file"),
    "defend": (cmd_defend, "attack evaluation drainers and retrain the SVM on a sample"),
    "report": (cmd_report, "full experiment with CSV and text reports"),
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key=value config file")
    common.add_argument("--seed", type=int, help="seed (overrides the config seed list)")
    common.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--strict", dest="strict", action="store_true", default=None,
                      help="fail on malformed input (default)")
    mode.add_argument("--lenient", dest="strict", action="store_false",
                      help="skip and report malformed input")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = _Parser(prog="nftdrain", description="NFT drainer detection toolkit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    subs = {name: sub.add_parser(name, parents=[common], help=text, description=text)
            for name, (_, text) in COMMANDS.items()}

    for name in ("ingest", "train", "defend", "report"):
        subs[name].add_argument("--events", metavar="PATH", help="transfer events (JSONL)")
        subs[name].add_argument("--marketplaces", metavar="PATH", help="marketplace accounts, one per line")
    for name in ("train", "defend", "report"):
        subs[name].add_argument("--labels", metavar="PATH", help="account,label CSV")
        subs[name].add_argument("--drop", metavar="BLOCKS",
                                help="comma-separated blocks to ablate (e.g. social-context)")
    for name in ("measure", "features", "graphs", "attack"):
        subs[name].add_argument("--records", metavar="PATH", help="classified records (JSONL)")
    for name in ("measure", "attack"):
        subs[name].add_argument("--labels", metavar="PATH", help="account,label CSV")
    subs["measure"].add_argument("--end", type=int, help="collection end timestamp")
    subs["evaluate"].add_argument("--predictions", metavar="DIR",
                                  help="directory with seed*/predictions.csv (default: --out)")
    for name in ("attack", "defend", "report"):
        subs[name].add_argument("--attack", type=int, choices=sorted(evasion.ATTACK_NUMBERS),
                                help="1 mint, 2 timespan, 3 pay-victim, 4 combined")
        subs[name].add_argument("--level", type=float, help="attack level L in percent")
        subs[name].add_argument("--pay-pct", type=float, help="victim payment X in percent of price")
    subs["defend"].add_argument("--fraction", type=float, help="share of attackers used for retraining")
    return parser


def _exit_code(exc):
    if isinstance(exc, harness.StageError):
        cause = exc.cause
        if isinstance(cause, USAGE_ERRORS):
            return EXIT_USAGE
        if exc.stage in TRAIN_STAGES or isinstance(cause, TRAIN_ERRORS):
            return EXIT_TRAIN
        return EXIT_DATA
    if isinstance(exc, (UsageError, *USAGE_ERRORS)):
        return EXIT_USAGE
    if isinstance(exc, TRAIN_ERRORS):
        return EXIT_TRAIN
    return EXIT_DATA


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.command][0](args, cfg)
    except (UsageError, harness.StageError, DataError, OSError, ValueError, KeyError,
            FloatingPointError) as exc:
        code = _exit_code(exc)
        print(f"nftdrain {args.command}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
