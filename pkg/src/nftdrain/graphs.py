"""NFT-User bipartite graph, relation-typed User graph, and evaluation subgraphs."""
from __future__ import annotations

import csv
import os
from collections import defaultdict, deque
from dataclasses import dataclass, field

import numpy as np

from nftdrain.features import EDGE_DIMS, USER_DIMS
from nftdrain.txdata import GIFT, NULL_ACCOUNT, SALE

RELATIONS = (SALE, GIFT)


class UnknownAccount(KeyError):
    pass


@dataclass
class NftUserGraph:
    """Users and NFTs joined by one attributed edge per ownership episode.

    Parallel edges are kept when a user owns the same NFT more than once.
    """

    users: list
    nfts: list
    edge_user: np.ndarray
    edge_nft: np.ndarray
    edge_attr: np.ndarray
    user_index: dict = field(default_factory=dict)
    nft_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.user_index:
            self.user_index = {u: k for k, u in enumerate(self.users)}
        if not self.nft_index:
            self.nft_index = {n: k for k, n in enumerate(self.nfts)}
        self.check_bipartite()

    @property
    def n_edges(self):
        return len(self.edge_user)

    def check_bipartite(self):
        if len(self.edge_user) != len(self.edge_nft) or len(self.edge_user) != len(self.edge_attr):
            raise ValueError("edge arrays differ in length")
        if len(self.edge_user) and (self.edge_user.min() < 0 or self.edge_user.max() >= len(self.users)
                                    or self.edge_nft.min() < 0 or self.edge_nft.max() >= len(self.nfts)):
            raise ValueError("edge endpoint outside its node set")

    def nft_neighbors(self, nft):
        """Users who traded ``nft``."""
        k = self.nft_index[nft]
        return {self.users[u] for u in self.edge_user[self.edge_nft == k]}

    def user_neighbors(self, user):
        """NFTs ``user`` traded."""
        k = self.user_index[user]
        return {self.nfts[n] for n in self.edge_nft[self.edge_user == k]}

    def nft_degree(self):
        return np.bincount(self.edge_nft, minlength=len(self.nfts))

    def user_degree(self):
        return np.bincount(self.edge_user, minlength=len(self.users))


@dataclass
class UserGraph:
    """Users with 19-dim attributes and directed (sender, relation, receiver) edges.

    Repeated edges are collapsed and counted in ``edge_mult``.
    """

    users: list
    attrs: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_rel: np.ndarray   # index into RELATIONS
    edge_mult: np.ndarray
    user_index: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.user_index:
            self.user_index = {u: k for k, u in enumerate(self.users)}
        if self.attrs.shape != (len(self.users), len(USER_DIMS)):
            raise ValueError(f"user attributes must be {len(self.users)}x{len(USER_DIMS)}")

    @property
    def n_edges(self):
        return len(self.edge_src)

    def neighbor_sets(self):
        """Per relation, per node: sorted distinct neighbors (both directions)."""
        nbrs = [[set() for _ in self.users] for _ in RELATIONS]
        for s, d, r in zip(self.edge_src.tolist(), self.edge_dst.tolist(), self.edge_rel.tolist()):
            nbrs[r][s].add(d)
            nbrs[r][d].add(s)
        return [[sorted(x) for x in rel] for rel in nbrs]

    def adjacency(self):
        """Undirected adjacency lists over all relations."""
        adj = [set() for _ in self.users]
        for s, d in zip(self.edge_src.tolist(), self.edge_dst.tolist()):
            adj[s].add(d)
            adj[d].add(s)
        return adj


@dataclass
class Subgraph:
    nft_graph: NftUserGraph
    user_graph: UserGraph
    central: np.ndarray   # bool per user_graph node

    @property
    def central_accounts(self):
        return [u for u, c in zip(self.user_graph.users, self.central) if c]

    @property
    def enrichment_accounts(self):
        return [u for u, c in zip(self.user_graph.users, self.central) if not c]


def build_nft_user_graph(episode_list, edge_features):
    """One edge per ownership episode; ``edge_features`` rows align with ``episode_list``."""
    users, nfts = {}, {}
    eu, en = [], []
    for ep in episode_list:
        eu.append(users.setdefault(ep.owner, len(users)))
        en.append(nfts.setdefault(ep.token, len(nfts)))
    attr = np.asarray(edge_features, dtype=np.float64).reshape(len(eu), len(EDGE_DIMS))
    return NftUserGraph(list(users), list(nfts), np.asarray(eu, dtype=np.intp),
                        np.asarray(en, dtype=np.intp), attr, users, nfts)


def build_user_graph(records, users, attrs, null_account=NULL_ACCOUNT):
    """SALE and GIFT records become typed user-user edges; self-loops are dropped."""
    index = {u: k for k, u in enumerate(users)}
    mult = defaultdict(int)
    for rec in records:
        if rec.kind not in RELATIONS:
            continue
        if rec.sender == rec.receiver or null_account in (rec.sender, rec.receiver):
            continue
        mult[(index[rec.sender], index[rec.receiver], RELATIONS.index(rec.kind))] += 1
    keys = sorted(mult)
    arr = np.asarray(keys, dtype=np.intp).reshape(len(keys), 3)
    return UserGraph(list(users), np.asarray(attrs, dtype=np.float64), arr[:, 0].copy(),
                     arr[:, 1].copy(), arr[:, 2].copy(),
                     np.asarray([mult[k] for k in keys], dtype=np.intp), index)


def khop_users(user_graph, centrals, hops=2):
    adj = user_graph.adjacency()
    dist = {}
    queue = deque()
    for c in centrals:
        k = user_graph.user_index.get(c)
        if k is None:
            raise UnknownAccount(c)
        if k not in dist:
            dist[k] = 0
            queue.append(k)
    while queue:
        k = queue.popleft()
        if dist[k] == hops:
            continue
        for nb in sorted(adj[k]):
            if nb not in dist:
                dist[nb] = dist[k] + 1
                queue.append(nb)
    return sorted(dist)


def restrict_user_graph(user_graph, keep):
    keep = np.asarray(keep, dtype=np.intp)
    remap = np.full(len(user_graph.users), -1, dtype=np.intp)
    remap[keep] = np.arange(len(keep))
    m = (remap[user_graph.edge_src] >= 0) & (remap[user_graph.edge_dst] >= 0)
    return UserGraph([user_graph.users[k] for k in keep], user_graph.attrs[keep],
                     remap[user_graph.edge_src[m]], remap[user_graph.edge_dst[m]],
                     user_graph.edge_rel[m].copy(), user_graph.edge_mult[m].copy())


def restrict_nft_graph(nft_graph, accounts):
    """Keep edges of ``accounts`` and the NFTs they touch."""
    ukeep = sorted(nft_graph.user_index[a] for a in accounts if a in nft_graph.user_index)
    umap = np.full(len(nft_graph.users), -1, dtype=np.intp)
    umap[ukeep] = np.arange(len(ukeep))
    m = umap[nft_graph.edge_user] >= 0
    nkeep = np.unique(nft_graph.edge_nft[m])
    nmap = np.full(len(nft_graph.nfts), -1, dtype=np.intp)
    nmap[nkeep] = np.arange(len(nkeep))
    return NftUserGraph([nft_graph.users[k] for k in ukeep], [nft_graph.nfts[k] for k in nkeep],
                        umap[nft_graph.edge_user[m]], nmap[nft_graph.edge_nft[m]],
                        nft_graph.edge_attr[m].copy())


def select_evaluation_subgraph(nft_graph, user_graph, central_accounts, hops=2):
    """Central accounts plus their ``hops``-hop User-graph neighbourhood and touched NFTs."""
    keep = khop_users(user_graph, central_accounts, hops)
    ug = restrict_user_graph(user_graph, keep)
    centrals = set(central_accounts)
    flags = np.array([u in centrals for u in ug.users], dtype=bool)
    ng = restrict_nft_graph(nft_graph, ug.users)
    return Subgraph(ng, ug, flags)


def cap_neighbors(nft_graph, max_degree=64, seed=0):
    """Subsample edges of NFT nodes whose degree exceeds ``max_degree``."""
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    deg = nft_graph.nft_degree()
    if not (deg > max_degree).any():
        return nft_graph
    rng = np.random.default_rng(seed)
    keep = np.ones(nft_graph.n_edges, dtype=bool)
    order = np.argsort(nft_graph.edge_nft, kind="stable")
    starts = np.concatenate([[0], np.cumsum(deg)])
    for n in np.flatnonzero(deg > max_degree):
        idx = order[starts[n]:starts[n + 1]]
        chosen = rng.choice(len(idx), size=max_degree, replace=False)
        drop = np.ones(len(idx), dtype=bool)
        drop[chosen] = False
        keep[idx[drop]] = False
    return NftUserGraph(list(nft_graph.users), list(nft_graph.nfts), nft_graph.edge_user[keep],
                        nft_graph.edge_nft[keep], nft_graph.edge_attr[keep],
                        dict(nft_graph.user_index), dict(nft_graph.nft_index))


def _token_str(token):
    return f"{token[0]}:{token[1]}"


def dump_graphs(nft_graph, user_graph, out_dir):
    """Write edge lists, node-id tables and user attributes as CSV."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "node_ids.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node_type", "node_id", "key"])
        for k, u in enumerate(user_graph.users):
            w.writerow(["user", k, u])
        for k, n in enumerate(nft_graph.nfts):
            w.writerow(["nft", k, _token_str(n)])
    uid = user_graph.user_index
    with open(os.path.join(out_dir, "nft_user_edges.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", "nft_id", *EDGE_DIMS])
        for u, n, row in zip(nft_graph.edge_user.tolist(), nft_graph.edge_nft.tolist(), nft_graph.edge_attr):
            w.writerow([uid[nft_graph.users[u]], n, *(repr(float(x)) for x in row)])
    with open(os.path.join(out_dir, "user_edges.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src_id", "dst_id", "relation", "multiplicity"])
        for s, d, r, m in zip(user_graph.edge_src.tolist(), user_graph.edge_dst.tolist(),
                              user_graph.edge_rel.tolist(), user_graph.edge_mult.tolist()):
            w.writerow([s, d, RELATIONS[r], m])
    with open(os.path.join(out_dir, "user_attributes.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["user_id", *USER_DIMS])
        for k, row in enumerate(user_graph.attrs):
            w.writerow([k, *(repr(float(x)) for x in row)])


def load_graphs(in_dir):
    users, nfts = [], []
    with open(os.path.join(in_dir, "node_ids.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            if row["node_type"] == "user":
                users.append(row["key"])
            else:
                contract, _, token_id = row["key"].rpartition(":")
                nfts.append((contract, token_id))
    with open(os.path.join(in_dir, "user_attributes.csv"), newline="") as fh:
        r = csv.reader(fh)
        next(r)
        attrs = np.asarray([[float(x) for x in row[1:]] for row in r]).reshape(len(users), len(USER_DIMS))
    eu, en, ea = [], [], []
    with open(os.path.join(in_dir, "nft_user_edges.csv"), newline="") as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            eu.append(int(row[0]))
            en.append(int(row[1]))
            ea.append([float(x) for x in row[2:]])
    src, dst, rel, mult = [], [], [], []
    with open(os.path.join(in_dir, "user_edges.csv"), newline="") as fh:
        for row in csv.DictReader(fh):
            src.append(int(row["src_id"]))
            dst.append(int(row["dst_id"]))
            rel.append(RELATIONS.index(row["relation"]))
            mult.append(int(row["multiplicity"]))
    ng = NftUserGraph(list(users), nfts, np.asarray(eu, dtype=np.intp), np.asarray(en, dtype=np.intp),
                      np.asarray(ea, dtype=np.float64).reshape(len(eu), len(EDGE_DIMS)))
    ug = UserGraph(users, attrs, np.asarray(src, dtype=np.intp), np.asarray(dst, dtype=np.intp),
                   np.asarray(rel, dtype=np.intp), np.asarray(mult, dtype=np.intp))
    return ng, ug
