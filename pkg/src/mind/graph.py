"""Undirected graphs with mask-based node removal and exact dismantling curves.

The adjacency structure (CSR arrays plus a flat edge list) is frozen at
construction time.  Removing a node only flips its entry in the active mask,
so an episode snapshot is a mask copy plus a shared reference to the
structure.  All connectivity queries ignore inactive endpoints.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractError, ParseError

log = logging.getLogger(__name__)


class Graph:
    """Simple undirected graph over dense ids 0..n_total-1 with an active mask."""

    __slots__ = ("n_total", "indptr", "indices", "edge_src", "edge_dst",
                 "active", "degrees", "m_active")

    def __init__(self, n_total: int, edges: np.ndarray):
        """Build from an (m, 2) array of unique undirected pairs, no self-loops."""
        if n_total < 1:
            raise ContractError("graph needs at least one node")
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size:
            if edges.min() < 0 or edges.max() >= n_total:
                raise ContractError("edge endpoint out of range")
            if (edges[:, 0] == edges[:, 1]).any():
                raise ContractError("self-loop in edge array")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        if edges.size and len(np.unique(lo * n_total + hi)) != len(edges):
            raise ContractError("duplicate edge in edge array")
        self.n_total = int(n_total)
        self.edge_src = lo
        self.edge_dst = hi
        # symmetric CSR
        both_src = np.concatenate([lo, hi])
        both_dst = np.concatenate([hi, lo])
        counts = np.bincount(both_src, minlength=n_total)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        order = np.argsort(both_src, kind="stable")
        self.indices = both_dst[order].astype(np.int64)
        self.active = np.ones(n_total, dtype=bool)
        self.degrees = counts.astype(np.int64)
        self.m_active = int(len(lo))

    # -- construction helpers -------------------------------------------------

    def with_mask(self, mask: np.ndarray) -> "Graph":
        """New Graph sharing this structure, with the given active mask."""
        g = Graph.__new__(Graph)
        g.n_total = self.n_total
        g.indptr = self.indptr
        g.indices = self.indices
        g.edge_src = self.edge_src
        g.edge_dst = self.edge_dst
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n_total,):
            raise ContractError("mask shape mismatch")
        g.active = mask.copy()
        keep = mask[self.edge_src] & mask[self.edge_dst]
        g.m_active = int(keep.sum())
        deg = np.bincount(self.edge_src[keep], minlength=self.n_total)
        deg += np.bincount(self.edge_dst[keep], minlength=self.n_total)
        g.degrees = deg.astype(np.int64)
        return g

    def copy(self) -> "Graph":
        return self.with_mask(self.active)

    # -- queries ---------------------------------------------------------------

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    def active_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def neighbors(self, v: int) -> np.ndarray:
        """All stored neighbors of v, active or not."""
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def active_neighbors(self, v: int) -> np.ndarray:
        nb = self.neighbors(v)
        return nb[self.active[nb]]

    def active_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Undirected active edge endpoints (src < dst)."""
        keep = self.active[self.edge_src] & self.active[self.edge_dst]
        return self.edge_src[keep], self.edge_dst[keep]

    # -- mutation ----------------------------------------------------------------

    def remove_node(self, v: int) -> None:
        """Deactivate v and its incident edges."""
        v = int(v)
        if v < 0 or v >= self.n_total:
            raise ContractError(f"node {v} out of range")
        if not self.active[v]:
            raise ContractError(f"node {v} already removed")
        nb = self.active_neighbors(v)
        self.active[v] = False
        self.degrees[nb] -= 1
        self.degrees[v] = 0
        self.m_active -= len(nb)


def remove_node(g: Graph, v: int) -> Graph:
    """Functional spelling of Graph.remove_node; mutates and returns g."""
    g.remove_node(v)
    return g


class UnionFind:
    """Disjoint sets over 0..n-1 with union by size; tracks the largest set."""

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.size = np.ones(n, dtype=np.int64)
        self.max_size = 1 if n > 0 else 0

    def find(self, a: int) -> int:
        p = self.parent
        while p[a] != a:
            p[a] = p[p[a]]  # path halving
            a = p[a]
        return int(a)

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self.size[ra] > self.max_size:
            self.max_size = int(self.size[ra])


def connected_components(g: Graph) -> np.ndarray:
    """Component label per node (-1 for inactive)."""
    labels = np.full(g.n_total, -1, dtype=np.int64)
    nxt = 0
    for start in g.active_nodes():
        if labels[start] >= 0:
            continue
        labels[start] = nxt
        stack = [int(start)]
        while stack:
            v = stack.pop()
            for u in g.active_neighbors(v):
                if labels[u] < 0:
                    labels[u] = nxt
                    stack.append(int(u))
        nxt += 1
    return labels


def largest_component_size(g: Graph) -> int:
    labels = connected_components(g)
    act = labels[labels >= 0]
    if act.size == 0:
        return 0
    return int(np.bincount(act).max())


def lcc_fraction(g: Graph, n0: int) -> float:
    """Largest-component size among active nodes over the original count n0."""
    if n0 < 1:
        raise ContractError("n0 must be >= 1")
    return largest_component_size(g) / n0


def is_connected(g: Graph) -> bool:
    n = g.n_active
    return n > 0 and largest_component_size(g) == n


@dataclass
class DismantlingCurve:
    """Removal sequence with per-step LCC fractions and the thresholded AUC."""

    removal_order: np.ndarray
    lcc_fractions: np.ndarray
    auc: float
    terminated_at: int  # first index with fraction < threshold, or last index

    def __len__(self) -> int:
        return len(self.removal_order)


def auc_for_order(g: Graph, order: Sequence[int], threshold: float = 0.0) -> DismantlingCurve:
    """Exact LCC curve for a removal order, by reverse insertion into union-find.

    ``order`` must be a duplicate-free sequence of currently active node ids.
    Fractions are relative to the active node count when called.  The AUC sums
    fractions up to and including the first step whose fraction drops below
    ``threshold``; later steps are recorded but excluded from the AUC.
    """
    order = np.asarray(order, dtype=np.int64)
    n0 = g.n_active
    if n0 == 0:
        raise ContractError("no active nodes")
    if order.size == 0:
        return DismantlingCurve(order, np.zeros(0), 0.0, -1)
    if len(np.unique(order)) != len(order):
        raise ContractError("duplicate node in removal order")
    if not g.active[order].all():
        raise ContractError("removal order contains inactive node")

    uf = UnionFind(g.n_total)
    present = g.active.copy()
    present[order] = False
    # survivors first
    uf.max_size = 0
    survivors = np.flatnonzero(present)
    if survivors.size:
        uf.max_size = 1
        for v in survivors:
            for u in g.neighbors(v):
                if present[u]:
                    uf.union(int(v), int(u))
    fractions = np.zeros(len(order), dtype=np.float64)
    fractions[-1] = uf.max_size / n0
    for t in range(len(order) - 1, 0, -1):
        v = int(order[t])
        present[v] = True
        if uf.max_size == 0:
            uf.max_size = 1
        for u in g.neighbors(v):
            if present[u]:
                uf.union(v, int(u))
        fractions[t - 1] = uf.max_size / n0

    below = np.flatnonzero(fractions < threshold)
    terminated_at = int(below[0]) if below.size else len(order) - 1
    auc = float(fractions[:terminated_at + 1].sum())
    return DismantlingCurve(order, fractions, auc, terminated_at)


class Assortativity(NamedTuple):
    value: float
    zero_variance: bool


def _stub_pearson(x: np.ndarray, y: np.ndarray) -> Assortativity:
    """Pearson correlation over both orientations of each edge's endpoint values."""
    xs = np.concatenate([x, y]).astype(np.float64)
    ys = np.concatenate([y, x]).astype(np.float64)
    mx = xs.mean()
    var = (xs * xs).mean() - mx * mx
    if var <= 1e-15:
        return Assortativity(0.0, True)
    cov = (xs * ys).mean() - mx * mx
    return Assortativity(float(cov / var), False)


def degree_assortativity(g: Graph) -> Assortativity:
    """Pearson correlation of endpoint degrees over directed stub pairs.

    Regular graphs have zero stub variance; the coefficient is reported as 0
    with ``zero_variance`` set instead of NaN.
    """
    src, dst = g.active_edges()
    if src.size == 0:
        raise ContractError("assortativity needs at least one active edge")
    return _stub_pearson(g.degrees[src], g.degrees[dst])


def label_assortativity(g: Graph, labels: np.ndarray) -> Assortativity:
    """Same estimator as degree_assortativity but over caller-provided labels."""
    labels = np.asarray(labels)
    if labels.shape != (g.n_total,):
        raise ContractError("labels must cover every node id")
    src, dst = g.active_edges()
    if src.size == 0:
        raise ContractError("assortativity needs at least one active edge")
    return _stub_pearson(labels[src], labels[dst])


def modularity(g: Graph, membership: np.ndarray) -> float:
    """Newman modularity of a node partition over the active subgraph."""
    src, dst = g.active_edges()
    m = src.size
    if m == 0:
        return 0.0
    membership = np.asarray(membership)
    intra = (membership[src] == membership[dst]).sum()
    ncomm = membership.max() + 1
    deg_sum = np.zeros(ncomm, dtype=np.float64)
    np.add.at(deg_sum, membership[src], 1.0)
    np.add.at(deg_sum, membership[dst], 1.0)
    return float(intra / m - ((deg_sum / (2.0 * m)) ** 2).sum())


def greedy_modularity_partition(g: Graph) -> np.ndarray:
    """Agglomerative modularity maximization; merge best connected pair while gain > 0."""
    src, dst = g.active_edges()
    m = src.size
    if m == 0:
        return np.zeros(g.n_total, dtype=np.int64)
    nodes = g.active_nodes()
    comm = {int(v): i for i, v in enumerate(nodes)}
    # community -> {neighbor community: edge count}, community degree sums
    links: dict[int, dict[int, float]] = {i: {} for i in range(len(nodes))}
    deg = np.zeros(len(nodes), dtype=np.float64)
    for a, b in zip(src, dst):
        ca, cb = comm[int(a)], comm[int(b)]
        links[ca][cb] = links[ca].get(cb, 0.0) + 1.0
        links[cb][ca] = links[cb].get(ca, 0.0) + 1.0
        deg[ca] += 1.0
        deg[cb] += 1.0
    alive = set(links)
    two_m = 2.0 * m
    while len(alive) > 1:
        best = None
        for c in sorted(alive):
            for d, e_cd in links[c].items():
                if d <= c:
                    continue
                gain = e_cd / m - 2.0 * deg[c] * deg[d] / (two_m * two_m)
                if best is None or gain > best[0] + 1e-15:
                    best = (gain, c, d)
        if best is None or best[0] <= 1e-12:
            break
        _, c, d = best
        # merge d into c
        for e, w in links[d].items():
            if e == c:
                continue
            links[c][e] = links[c].get(e, 0.0) + w
            links[e][c] = links[e].get(c, 0.0) + w
            links[e].pop(d, None)
        links[c].pop(d, None)
        deg[c] += deg[d]
        del links[d]
        alive.discard(d)
        for v, cv in comm.items():
            if cv == d:
                comm[v] = c
    membership = np.zeros(g.n_total, dtype=np.int64)
    remap = {c: i for i, c in enumerate(sorted(set(comm.values())))}
    for v, c in comm.items():
        membership[v] = remap[c]
    return membership


def modularity_report(g: Graph) -> float:
    """Modularity of the greedy agglomerative partition (dataset statistics only)."""
    return modularity(g, greedy_modularity_partition(g))


# -- edge-list and curve file formats ---------------------------------------------


def load_edge_list(path: str) -> Graph:
    """Read whitespace-separated integer pairs, one edge per line.

    Lines starting with '#' are ignored.  Node ids are compacted to 0..n-1 in
    first-appearance order; self-loops and duplicate edges are dropped with a
    logged warning count.
    """
    id_map: dict[int, int] = {}
    edges = []
    seen = set()
    dropped = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path}:{lineno}: expected two node ids, got {line!r}")
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-integer node id in {line!r}") from None
            for x in (a, b):
                if x not in id_map:
                    id_map[x] = len(id_map)
            ia, ib = id_map[a], id_map[b]
            if ia == ib:
                dropped += 1
                continue
            key = (ia, ib) if ia < ib else (ib, ia)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            edges.append(key)
    if not id_map:
        raise ParseError(f"{path}: no edges or nodes found")
    if dropped:
        log.warning("%s: dropped %d self-loop/duplicate edge(s)", path, dropped)
    return Graph(len(id_map), np.array(edges, dtype=np.int64).reshape(-1, 2))


def save_edge_list(g: Graph, path: str) -> None:
    src, dst = g.active_edges()
    with open(path, "w") as fh:
        for a, b in zip(src, dst):
            fh.write(f"{a} {b}\n")


def write_curve(curve: DismantlingCurve, path: str) -> None:
    """CSV with header step,node,lcc_fraction and a trailing '# auc=' line."""
    with open(path, "w") as fh:
        fh.write("step,node,lcc_fraction\n")
        for t, (v, f) in enumerate(zip(curve.removal_order, curve.lcc_fractions)):
            fh.write(f"{t},{v},{f:.10g}\n")
        fh.write(f"# auc={curve.auc:.10g}\n")


def read_curve(path: str) -> DismantlingCurve:
    order = []
    fractions = []
    auc = None
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "step,node,lcc_fraction":
            raise ParseError(f"{path}:1: expected curve header, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# auc="):
                    auc = float(line.split("=", 1)[1])
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected step,node,lcc_fraction")
            order.append(int(parts[1]))
            fractions.append(float(parts[2]))
    fr = np.asarray(fractions)
    if auc is None:
        auc = float(fr.sum())
    term = len(order) - 1
    return DismantlingCurve(np.asarray(order, dtype=np.int64), fr, auc, term)
