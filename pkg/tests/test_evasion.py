import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DAY, NULL, rec
from nftdrain import evasion as E
from nftdrain.measure import active_timespan, gift_in_ratio
from nftdrain.txdata import GIFT, MINT, SALE

D = "0xdrainer"


def _drainer_world(n_gifts=10, price_pairs=(1.5, 2.5)):
    """``n_gifts`` victims each gift one NFT to D, which D later sells; each NFT had two earlier sales."""
    out = []
    for k in range(n_gifts):
        v = f"0xv{k}"
        out += [rec(k, NULL, "0xa", MINT, 0.0),
                rec(k, "0xa", "0xb", SALE, 1.0, price_pairs[0]),
                rec(k, "0xb", v, SALE, 2.0, price_pairs[1]),
                rec(k, v, D, GIFT, 10.0 + k),
                rec(k, D, "0xbuyer", SALE, 10.5 + k, 2.0)]
    out.append(rec(999, "0xr1", "0xr2", GIFT, 5.0, contract="0xother"))
    return out


def _count(records, pred):
    return sum(1 for r in records if pred(r))


def test_mint_rounds_up():
    res = E.apply_attack(_drainer_world(10), [D], E.AttackSpec("MINT", 30))
    mints = [r for r in res.records if r.kind == MINT and r.receiver == D]
    assert len(mints) == 3 and res.audit[D] == [3, 0]
    ts = [r.timestamp for r in res.records if D in (r.sender, r.receiver)]
    assert all(min(ts) < m.timestamp < max(ts) for m in mints)
    assert len({m.token for m in mints}) == 3
    res = E.apply_attack(_drainer_world(7), [D], E.AttackSpec("MINT", 10))
    assert res.audit[D] == [1, 0]


def test_pay_victim_converts_half_at_ten_percent():
    res = E.apply_attack(_drainer_world(4), [D], E.AttackSpec("PAY_VICTIM", 50, pay_pct=10))
    paid = [r for r in res.records if r.kind == SALE and r.receiver == D]
    assert len(paid) == 2 and all(r.price_eth == pytest.approx(0.2) for r in paid)
    assert _count(res.records, lambda r: r.kind == GIFT and r.receiver == D) == 2
    assert res.audit[D] == [0, 2] and len(res.records) == len(_drainer_world(4))


def test_timespan_extends_span():
    base = _drainer_world(5)
    before = active_timespan(D, base)
    for level in (10, 30, 50):
        res = E.apply_attack(base, [D], E.AttackSpec("TIMESPAN", level))
        after = active_timespan(D, res.records)
        assert after == pytest.approx(before * (1 + level / 100), abs=1 / DAY)
        assert res.audit[D] == [1, 0]


def test_feature_deltas():
    base = _drainer_world(10)
    g0 = gift_in_ratio(D, base)
    assert gift_in_ratio(D, E.apply_attack(base, [D], E.AttackSpec("MINT", 30)).records) < g0
    res = E.apply_attack(base, [D], E.AttackSpec("PAY_VICTIM", 30, pay_pct=20))
    assert g0 - gift_in_ratio(D, res.records) == pytest.approx(3 / 10)


def test_combo_stacks_steps():
    res = E.apply_attack(_drainer_world(10), [D], E.AttackSpec("COMBO", 50, pay_pct=60))
    assert res.audit[D] == [5 + 1, 5]


def test_other_accounts_untouched():
    base = _drainer_world(6)
    res = E.apply_attack(base, [D], E.AttackSpec("COMBO", 50, pay_pct=60))
    def others(records):
        return sorted((r for r in records if D not in (r.sender, r.receiver)), key=E._sort_key)
    assert others(base) == others(res.records)


def test_no_gift_ins_skipped():
    base = [rec(1, NULL, D, MINT, 0.0), rec(1, D, "0xz", SALE, 1.0, 1.0)]
    res = E.apply_attack(base, [D], E.AttackSpec("PAY_VICTIM", 50, pay_pct=10))
    assert res.no_gift_ins == [D] and res.records == base


@pytest.mark.parametrize("kwargs", [dict(kind="BOGUS", level=10), dict(kind="MINT", level=0),
                                    dict(kind="PAY_VICTIM", level=10),
                                    dict(kind="PAY_VICTIM", level=10, pay_pct=61)])
def test_invalid_specs(kwargs):
    with pytest.raises(E.InvalidAttack):
        E.AttackSpec(**kwargs)


def test_from_number():
    assert E.AttackSpec.from_number(4, 50, 60).kind == "COMBO"
    with pytest.raises(E.InvalidAttack):
        E.AttackSpec.from_number(5, 50)
    with pytest.raises(E.InvalidAttack):
        E.apply_attack(_drainer_world(1), [], E.AttackSpec("MINT", 10))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.integers(0, 2**32 - 1))
def test_deterministic_and_order_free(seed, shuffle):
    base = _drainer_world(8)
    spec = E.AttackSpec("COMBO", 30, pay_pct=40, seed=seed)
    a = E.apply_attack(base, [D], spec)
    perm = np.random.default_rng(shuffle).permutation(len(base))
    b = E.apply_attack([base[k] for k in perm], [D], spec)
    assert sorted(a.records, key=E._sort_key) == sorted(b.records, key=E._sort_key) and a.audit == b.audit


def test_split_attackers():
    tr, held = E.split_attackers([f"a{k}" for k in range(100)], 0.03, seed=1)
    assert len(tr) == 3 and len(held) == 97 and not set(tr) & set(held)
    assert E.split_attackers([f"a{k}" for k in range(100)], 0.03, seed=1)[0] == tr
    with pytest.raises(E.FractionTooSmall):
        E.split_attackers(["a"] * 10, 0.0)
    with pytest.raises(E.FractionTooSmall):
        E.split_attackers([f"a{k}" for k in range(10)], 0.03)


def test_audit_csv(tmp_path):
    res = E.apply_attack(_drainer_world(4), [D, "0xidle"], E.AttackSpec("MINT", 50))
    E.write_audit(tmp_path / "a.csv", res)
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert lines == ["drainer,records_added,records_converted", "0xdrainer,2,0", "0xidle,0,0"]


def test_defend_retrain_adds_sampled_attackers(rng):
    base_X = np.vstack([rng.normal(size=(30, 3)), rng.normal(size=(10, 3)) + 3])
    base_y = np.array([0] * 30 + [1] * 10)
    attacked = {f"x{k}": rng.normal(size=3) - 3 for k in range(100)}
    model, held = E.defend_retrain(base_X, base_y, attacked, list(attacked), fraction=0.1, gamma=0.5)
    assert len(held) == 90 and model.support_vectors.shape[1] == 3
