import csv
import json

import pytest

from nftdrain.cli import main

SMALL_CFG = """\
seeds = 0
train_ratio = 10
heavy_ratio = 0
eval_ratio = 10
max_epochs = 3
hidden = 8
heads = 2
synth.n_regular = 1500
synth.n_drainers = 30
synth.n_collections = 20
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "small.cfg").write_text(SMALL_CFG)
    assert main(["synth", "--config", str(d / "small.cfg"), "--out", str(d / "syn")]) == 0
    assert main(["ingest", "--events", str(d / "syn/events.jsonl"),
                 "--marketplaces", str(d / "syn/marketplaces.txt"), "--out", str(d / "ing")]) == 0
    return d


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_synth_outputs(workdir):
    for name in ("events.jsonl", "labels.csv", "marketplaces.txt", "synth_config.txt"):
        assert (workdir / "syn" / name).stat().st_size > 0
    assert "n_drainers = 30" in (workdir / "syn/synth_config.txt").read_text()


def test_measure_features_graphs(workdir):
    recs, labels = str(workdir / "ing/records.jsonl"), str(workdir / "syn/labels.csv")
    out = str(workdir / "m")
    assert main(["measure", "--records", recs, "--labels", labels, "--out", out]) == 0
    assert _rows(workdir / "m/fates.csv")[0][0]
    assert "affiliated_found" in (workdir / "m/drainer_summary.txt").read_text()
    assert main(["features", "--records", recs, "--out", out]) == 0
    assert len(_rows(workdir / "m/user_attributes.csv")[0]) == 20
    assert len(_rows(workdir / "m/edge_features.csv")[0]) == 12
    assert main(["graphs", "--records", recs, "--out", out]) == 0


def test_attack_writes_audit(workdir):
    out = workdir / "a"
    rc = main(["attack", "--records", str(workdir / "ing/records.jsonl"), "--labels",
               str(workdir / "syn/labels.csv"), "--attack", "4", "--level", "50", "--pay-pct", "60",
               "--out", str(out)])
    assert rc == 0
    rows = _rows(out / "attack_audit.csv")
    assert rows[0] == ["drainer", "records_added", "records_converted"] and len(rows) == 31


def test_train_then_evaluate(workdir):
    cfg, out = str(workdir / "small.cfg"), str(workdir / "t")
    assert main(["train", "--config", cfg, "--out", out]) == 0
    assert (workdir / "t/seed0/svm.ckpt").exists() and (workdir / "t/metrics.csv").exists()
    assert main(["evaluate", "--predictions", out, "--out", out]) == 0
    ev = _rows(workdir / "t/eval_metrics.csv")
    seed0 = [r for r in _rows(workdir / "t/metrics.csv") if r[0] == "0" and r[1] == "full"][0]
    assert ev[1][1:4] == seed0[2:5]


def test_exit_codes(workdir, tmp_path, capsys):
    assert main(["measure", "--records", str(tmp_path / "missing.jsonl"), "--labels", "x"]) == 2
    assert main(["attack", "--records", str(workdir / "ing/records.jsonl"), "--labels",
                 str(workdir / "syn/labels.csv"), "--attack", "3", "--level", "10", "--pay-pct", "90",
                 "--out", str(tmp_path)]) == 1
    assert main(["measure", "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("norm = sym\n")
    assert main(["train", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "norm" in capsys.readouterr().err


def test_strict_and_lenient_ingest(tmp_path):
    ev = tmp_path / "ev.jsonl"
    ok = {"contract": "0xc", "token_id": "1", "from": "0x0000000000000000000000000000000000000000",
          "to": "0xa", "token_kind": "NFT", "amount": 1, "timestamp": 1, "tx_hash": "0x1", "log_index": 0}
    ev.write_text(json.dumps(ok) + "\n{not json\n")
    assert main(["ingest", "--events", str(ev), "--out", str(tmp_path / "s")]) == 2
    assert main(["ingest", "--events", str(ev), "--lenient", "--out", str(tmp_path / "l")]) == 0
    assert len(_rows(tmp_path / "l/skipped.csv")) == 2
