import pytest

from nftdrain import measure
from nftdrain.config import InvalidConfig
from nftdrain.synth import (AFFILIATED, DRAINER, REGULAR, VICTIM, SynthConfig, generate_ecosystem,
                            read_labels, read_synth_config, write_synth_config)
from nftdrain.txdata import GIFT, classify_events

SMALL = dict(n_regular=400, n_drainers=12, n_collections=10)


@pytest.fixture(scope="module")
def small():
    cfg = SynthConfig(seed=3, **SMALL)
    events, truth = generate_ecosystem(cfg)
    return cfg, events, truth, classify_events(events, truth.marketplaces)


def test_same_seed_same_events():
    a, _ = generate_ecosystem(SynthConfig(seed=7, **SMALL))
    b, _ = generate_ecosystem(SynthConfig(seed=7, **SMALL))
    c, _ = generate_ecosystem(SynthConfig(seed=8, **SMALL))
    assert a == b and a != c


def test_no_drainers_means_no_victims():
    events, truth = generate_ecosystem(SynthConfig(seed=1, n_regular=300, n_drainers=0, n_collections=8))
    assert set(truth.labels.values()) == {REGULAR}
    assert truth.drain_fates == []
    assert events


def test_labels_cover_planted_roles(small):
    _, _, truth, _ = small
    assert len(truth.accounts(DRAINER)) == 12
    assert truth.accounts(VICTIM) and truth.accounts(AFFILIATED)


def test_affiliated_set_recovered_from_records(small):
    _, _, truth, records = small
    drainers = frozenset(truth.accounts(DRAINER))
    assert measure.find_affiliated_users(records, drainers) == set(truth.accounts(AFFILIATED))


def test_victims_gift_to_drainers(small):
    _, _, truth, records = small
    drainers = set(truth.accounts(DRAINER))
    senders = {r.sender for r in records if r.kind == GIFT and r.receiver in drainers}
    assert set(truth.accounts(VICTIM)) <= senders


def test_labels_roundtrip(tmp_path, small):
    _, _, truth, _ = small
    truth.write_labels(tmp_path / "labels.csv")
    assert read_labels(tmp_path / "labels.csv") == truth.labels
    (tmp_path / "bad.csv").write_text("who,what\n")
    with pytest.raises(InvalidConfig):
        read_labels(tmp_path / "bad.csv")


def test_config_roundtrip(tmp_path):
    cfg = SynthConfig(seed=9, n_regular=123, price_discount_mean=0.5)
    write_synth_config(cfg, tmp_path / "s.txt")
    assert read_synth_config(tmp_path / "s.txt") == cfg


@pytest.mark.parametrize("kwargs", [dict(n_regular=1), dict(n_collections=0), dict(n_drainers=-1),
                                    dict(frac_gift_in_only=1.5), dict(start_ts=10, end_ts=5),
                                    dict(fate_sell=0.9), dict(price_discount_std=-0.1)])
def test_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        generate_ecosystem(SynthConfig(**kwargs))
