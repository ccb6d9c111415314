import itertools

import numpy as np
import pytest

from conftest import NULL, rec
from nftdrain import features as F
from nftdrain import graphs as G
from nftdrain import measure as M
from nftdrain.txdata import BURN, GIFT, MINT, SALE


def _graphs(recs, end=100):
    eps = [e for e in M.episodes(recs, end * 86400) if e.owner != NULL]
    E = F.edge_feature_matrix(eps, F.nft_statistics(eps, recs))
    by_user = M.user_records(recs)
    users = sorted(by_user)
    return G.build_nft_user_graph(eps, E), G.build_user_graph(recs, users, F.user_attribute_matrix(users, by_user))


def test_two_owners_one_nft():
    ng, _ = _graphs([rec(1, NULL, "A", MINT, 0), rec(1, "A", "B", SALE, 1, 1.0)])
    assert ng.n_edges == 2
    assert ng.nft_neighbors(("0xc1", "1")) == {"A", "B"}
    assert ng.user_neighbors("A") == {("0xc1", "1")}


def test_empty_graph():
    ng = G.build_nft_user_graph([], np.zeros((0, 11)))
    assert ng.n_edges == 0 and ng.users == [] and ng.nfts == []


def test_chain_of_five_degree():
    owners = "ABCDE"
    recs = [rec(1, NULL, "A", MINT, 0)] + [rec(1, owners[k], owners[k + 1], GIFT, k + 1) for k in range(4)]
    ng, _ = _graphs(recs)
    assert ng.nft_degree().tolist() == [5]


def test_reacquisition_keeps_parallel_edges():
    recs = [rec(1, NULL, "A", MINT, 0), rec(1, "A", "B", GIFT, 1), rec(1, "B", "A", GIFT, 2)]
    ng, _ = _graphs(recs)
    assert ng.n_edges == 3 and ng.user_degree()[ng.user_index["A"]] == 2


def test_bipartite_check_rejects_bad_endpoint():
    with pytest.raises(ValueError):
        G.NftUserGraph(["a"], [("c", "1")], np.array([1]), np.array([0]), np.zeros((1, 11)))


def test_user_graph_relations_and_multiplicity():
    recs = [rec(1, NULL, "A", MINT, 0), rec(2, NULL, "A", MINT, 0), rec(3, NULL, "A", MINT, 0),
            rec(1, "A", "B", SALE, 1, 1.0), rec(2, "A", "B", SALE, 2, 1.0), rec(3, "A", "B", GIFT, 3),
            rec(3, "B", NULL, BURN, 4)]
    _, ug = _graphs(recs)
    edges = {(ug.users[s], ug.users[d], G.RELATIONS[r]): m for s, d, r, m in
             zip(ug.edge_src, ug.edge_dst, ug.edge_rel, ug.edge_mult)}
    assert edges == {("A", "B", SALE): 2, ("A", "B", GIFT): 1}
    assert ug.edge_mult.sum() == sum(r.kind in (SALE, GIFT) for r in recs)


def _star():
    # C - a1, a2, a3; a1 - b1; a2 - b2; b1 - x (third hop)
    recs, k = [], 0
    for u, v in [("C", "a1"), ("C", "a2"), ("C", "a3"), ("a1", "b1"), ("a2", "b2"), ("b1", "x")]:
        k += 1
        recs += [rec(k, NULL, u, MINT, k), rec(k, u, v, GIFT, k + 0.5)]
    recs.append(rec(99, NULL, "lone", MINT, 1))
    return _graphs(recs)


def _brute_khop(ug, centrals, hops):
    adj = ug.adjacency()
    reach = {ug.user_index[c] for c in centrals}
    for _ in range(hops):
        reach |= {n for k in reach for n in adj[k]}
    return reach


def test_star_two_hop():
    ng, ug = _star()
    sub = G.select_evaluation_subgraph(ng, ug, ["C"], hops=2)
    assert sorted(sub.user_graph.users) == ["C", "a1", "a2", "a3", "b1", "b2"]
    assert sub.central_accounts == ["C"]
    assert "C" not in sub.enrichment_accounts and len(sub.enrichment_accounts) == 5


def test_isolated_central():
    ng, ug = _star()
    sub = G.select_evaluation_subgraph(ng, ug, ["lone"])
    assert sub.user_graph.users == ["lone"] and sub.user_graph.n_edges == 0
    assert sub.nft_graph.n_edges == 1


def test_unknown_account():
    ng, ug = _star()
    with pytest.raises(G.UnknownAccount):
        G.select_evaluation_subgraph(ng, ug, ["ghost"])


@pytest.mark.parametrize("centrals", [["C"], ["b2"], ["a3", "x"], ["lone", "b1"]])
@pytest.mark.parametrize("hops", [0, 1, 2, 3])
def test_subgraph_matches_brute_force(centrals, hops):
    ng, ug = _star()
    sub = G.select_evaluation_subgraph(ng, ug, centrals, hops)
    keep = _brute_khop(ug, centrals, hops)
    assert sorted(sub.user_graph.users) == sorted(ug.users[k] for k in keep)
    want = sorted((ug.users[s], ug.users[d], r) for s, d, r in zip(ug.edge_src, ug.edge_dst, ug.edge_rel)
                  if s in keep and d in keep)
    su = sub.user_graph
    got = sorted((su.users[s], su.users[d], r) for s, d, r in zip(su.edge_src, su.edge_dst, su.edge_rel))
    assert got == want
    kept_users = {ug.users[k] for k in keep}
    want_nft = sorted((ng.users[u], ng.nfts[n]) for u, n in zip(ng.edge_user, ng.edge_nft)
                      if ng.users[u] in kept_users)
    sn = sub.nft_graph
    assert sorted((sn.users[u], sn.nfts[n]) for u, n in zip(sn.edge_user, sn.edge_nft)) == want_nft


def _wide(n_users=1000):
    eu = np.arange(n_users)
    return G.NftUserGraph([f"u{k}" for k in range(n_users)], [("c", "1"), ("c", "2")],
                          eu, np.zeros(n_users, dtype=np.intp), np.zeros((n_users, 11)))


def test_cap_neighbors():
    small = _wide(3)
    assert G.cap_neighbors(small, 5) is small
    capped = G.cap_neighbors(_wide(), 64, seed=3)
    assert capped.nft_degree().tolist() == [64, 0]
    again = G.cap_neighbors(_wide(), 64, seed=3)
    assert np.array_equal(capped.edge_user, again.edge_user)
    with pytest.raises(ValueError):
        G.cap_neighbors(small, 0)


def test_dump_load_roundtrip(tmp_path):
    ng, ug = _star()
    G.dump_graphs(ng, ug, tmp_path)
    ng2, ug2 = G.load_graphs(tmp_path)
    assert ug2.users == ug.users and np.array_equal(ug2.attrs, ug.attrs)
    for a in ("edge_src", "edge_dst", "edge_rel", "edge_mult"):
        assert np.array_equal(getattr(ug2, a), getattr(ug, a))
    pairs = lambda g: sorted((g.users[u], g.nfts[n], tuple(x)) for u, n, x in
                             zip(g.edge_user, g.edge_nft, g.edge_attr))
    assert pairs(ng2) == pairs(ng)


def test_neighbor_sets_are_symmetric():
    _, ug = _star()
    for rel in ug.neighbor_sets():
        for k, nbrs in enumerate(rel):
            for j in nbrs:
                assert k in rel[j]
    assert not any(itertools.chain.from_iterable(ug.neighbor_sets()[0]))
