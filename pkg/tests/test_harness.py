import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import NULL, rec
from nftdrain import harness as H
from nftdrain.config import InvalidConfig
from nftdrain.txdata import GIFT, MINT, SALE


def _population(n_drainers, n_regular, n_heavy=0, heavy_extra=3):
    """Drainers gifted one NFT each; regulars buy then gift on; heavy regulars also mint."""
    out = []
    tok = 0
    for k in range(n_drainers):
        out += [rec(tok, NULL, f"0xv{k}", MINT, 0.0), rec(tok, f"0xv{k}", f"0xd{k}", GIFT, 1.0)]
        tok += 1
    for k in range(n_regular + n_heavy):
        a = f"0xr{k:06d}"
        out += [rec(tok, NULL, "0xsrc", MINT, 0.0), rec(tok, "0xsrc", a, SALE, 1.0, 1.0),
                rec(tok, a, "0xsink", GIFT, 2.0)]
        tok += 1
        if k >= n_regular:
            out += [rec(tok + j, NULL, a, MINT, 3.0 + j) for j in range(heavy_extra)]
            tok += heavy_extra
    return out, [f"0xd{k}" for k in range(n_drainers)]


# ---------------------------------------------------------------- metrics

def test_metrics_hand_confusion():
    p = [1, 1, 1, 1, 0, 0, 0]
    y = [1, 1, 1, 0, 1, 1, 0]
    m = H.compute_metrics(p, y)
    assert (m.tp, m.fp, m.fn, m.tn) == (3, 1, 2, 1)
    assert m.precision == 0.75 and m.recall == 0.6 and m.f1 == pytest.approx(2 / 3)


def test_metrics_edge_cases():
    m = H.compute_metrics([1] * 5 + [0] * 5, [1] * 5 + [0] * 5)
    assert (m.precision, m.recall, m.f1, m.fp, m.tp) == (1.0, 1.0, 1.0, 0, 5)
    m = H.compute_metrics([0] * 6, [1, 0, 1, 0, 0, 0])
    assert (m.recall, m.tp, m.precision, m.f1) == (0.0, 0, 0.0, 0.0)
    with pytest.raises(H.LengthMismatch):
        H.compute_metrics([1, 0], [1])


def _brute_metrics(p, y):
    tp = fp = fn = tn = 0
    for a, b in zip(p, y):
        if a and b:
            tp += 1
        elif a:
            fp += 1
        elif b:
            fn += 1
        else:
            tn += 1
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec_ = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec_ / (prec + rec_) if prec + rec_ else 0.0
    return prec, rec_, f1, tp, fp, fn, tn


def test_metrics_match_brute_force_on_random_vectors():
    r = np.random.default_rng(0)
    for _ in range(1000):
        n = int(r.integers(1, 60))
        p, y = r.random(n) < r.random(), r.random(n) < r.random()
        m = H.compute_metrics(p, y)
        want = _brute_metrics(p.tolist(), y.tolist())
        assert (m.precision, m.recall, m.f1, m.tp, m.fp, m.fn, m.tn) == pytest.approx(want, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=80))
def test_metrics_bounds(pairs):
    m = H.compute_metrics(*zip(*pairs))
    assert 0 <= m.f1 <= 1 and m.tp + m.fp + m.fn + m.tn == len(pairs)
    assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


def test_relative_drop():
    assert H.relative_drop(0.8, 0.2) == pytest.approx(0.75)
    assert np.isnan(H.relative_drop(0.0, 0.0))


# ---------------------------------------------------------------- datasets

def test_training_ratio_counts():
    recs, drainers = _population(10, 800, 150)
    spec = H.DatasetSpec(H.TRAIN, 70, heavy_ratio=10, heavy_threshold=4, seed=0)
    ds = H.build_training_dataset(recs, drainers, spec)
    assert len(ds.drainers) == 10 and len(ds.regulars) == 700 + 100 and ds.n_heavy == 100
    heavy = [a for a in ds.regulars if int(a[4:]) >= 800]
    assert len(heavy) >= 100


def test_training_ratio_at_reported_scale():
    # 645 drainers at 70:1 plus 10:1 heavy gives 51,600 regulars, a net 1:80
    recs, drainers = _population(645, 45_150, 6_450, heavy_extra=2)
    ds = H.build_training_dataset(recs, drainers, H.DatasetSpec(H.TRAIN, 70, 10, heavy_threshold=3))
    assert len(ds.regulars) == 51_600 and len(ds.regulars) // len(ds.drainers) == 80


def test_affiliated_user_excluded():
    recs, drainers = _population(2, 31)
    affiliated = {"0xr000003"}
    recs.append(rec(9999, "0xd0", "0xr000003", GIFT, 3.0))
    susp = H.suspicious_accounts(recs, affiliated, set(drainers))
    # the whole remaining pool is drawn
    ds = H.build_training_dataset(recs, drainers, H.DatasetSpec(H.TRAIN, 15), excluded=susp)
    pool = {f"0xr{k:06d}" for k in range(31)}
    assert set(ds.regulars) == pool - affiliated
    with pytest.raises(H.PoolTooSmall):
        H.build_training_dataset(recs, drainers, H.DatasetSpec(H.TRAIN, 16), excluded=susp)


def test_suspicious_includes_gifters_to_affiliates():
    recs = [rec(1, "0xg", "0xaff", GIFT, 1.0), rec(2, "0xd", "0xaff", GIFT, 1.0)]
    assert H.suspicious_accounts(recs, {"0xaff"}, {"0xd"}) == {"0xaff", "0xg"}


def test_eval_ratio_counts():
    recs, drainers = _population(20, 300)
    ds = H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 1, seed=3))
    assert len(ds.accounts) == 2 * len(drainers)
    ds = H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 10))
    assert len(ds.accounts) == 20 * 11


def test_eval_reported_central_count():
    recs, drainers = _population(546, 5_460)
    ds = H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 10))
    assert len(ds.accounts) == 6_006


def test_same_seed_same_sample():
    recs, drainers = _population(5, 200)
    a = H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 10, seed=4))
    b = H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 10, seed=4))
    c = H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 10, seed=5))
    assert a.accounts == b.accounts and a.accounts != c.accounts


def test_pool_too_small():
    recs, drainers = _population(5, 20)
    with pytest.raises(H.PoolTooSmall):
        H.build_training_dataset(recs, drainers, H.DatasetSpec(H.TRAIN, 70))
    with pytest.raises(H.PoolTooSmall):
        H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 100))


def test_window_filters_drainers():
    recs, drainers = _population(3, 50)
    with pytest.raises(H.PoolTooSmall):
        H.build_eval_dataset(recs, drainers, H.DatasetSpec(H.EVAL, 10, window=(10 * 86400, None)))


def test_bad_dataset_spec():
    with pytest.raises(ValueError):
        H.DatasetSpec("TEST", 10)
    with pytest.raises(ValueError):
        H.DatasetSpec(H.TRAIN, 0)


# ---------------------------------------------------------------- config

def test_pipeline_config_from_mapping():
    cfg = H.pipeline_config_from_mapping({"seeds": "3, 4", "eval_ratio": "10", "svm_gamma": "0.5",
                                          "drop": "social-context", "synth.n_drainers": "12"})
    assert cfg.seed_list == [3, 4] and cfg.gamma == 0.5 and cfg.drop_blocks == frozenset({"sce"})
    assert cfg.synth.n_drainers == 12
    assert "synth.n_drainers = 12" in cfg.to_lines()


@pytest.mark.parametrize("mapping", [{"seeds": ""}, {"seeds": "a"}, {"train_frac": "1.5"},
                                     {"norm": "sym"}, {"attack": "7"}, {"svm_gamma": "-1"},
                                     {"drop": "graph"}, {"eval_ratio": "x"}])
def test_pipeline_config_rejects(mapping):
    with pytest.raises(InvalidConfig):
        H.pipeline_config_from_mapping(mapping)
