"""Synthetic training graphs and degree-preserving rewiring.

Generators: linear preferential attachment (LPA), copying model, Erdos-Renyi,
and Watts-Strogatz (validation only).  Structural diversification rewires a
generated graph toward a sampled label-assortativity target with double-edge
swaps that preserve every node's degree and never disconnect the graph.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ContractError
from .graph import Graph, Assortativity, degree_assortativity, is_connected, label_assortativity

WEIGHT_EPS = 1e-6  # floor for non-positive LPA attachment weights (gamma < 3)

TARGET_MAGNITUDES = (0.05, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5)
PAPER_M_SETS = ((1, 6, 8, 10), (2, 3, 4, 5))  # first set drawn w.p. 1/3


@dataclass
class GenSpec:
    model: Literal["lpa", "copy", "er", "ws"]
    n: int
    m: int
    gamma: float = 3.0
    seed: int | None = None

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass
class RewireSpec:
    label_mode: Literal["random", "degree"]
    target: float
    tolerance: float = 0.02
    max_attempts: int | None = None  # None -> 100 * |E|


def _clique_edges(k: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(k) for j in range(i + 1, k)]


def gen_lpa(spec: GenSpec, rng: np.random.Generator | None = None) -> Graph:
    """Growth by linear preferential attachment with weight d_i + m*(gamma-3).

    Starts from an (m+1)-clique; each new node attaches to m distinct existing
    nodes sampled without replacement.  Non-positive weights (gamma < 3) are
    floored at a small epsilon.
    """
    n, m, gamma = spec.n, spec.m, spec.gamma
    if m < 1 or not (2.0 <= gamma <= 4.0) or n <= m + 1:
        raise ContractError(f"bad LPA parameters n={n} m={m} gamma={gamma}")
    rng = rng or spec.rng()
    edges = _clique_edges(m + 1)
    deg = np.zeros(n, dtype=np.float64)
    deg[: m + 1] = m
    for v in range(m + 1, n):
        w = np.maximum(deg[:v] + m * (gamma - 3.0), WEIGHT_EPS)
        targets = rng.choice(v, size=m, replace=False, p=w / w.sum())
        for t in targets:
            edges.append((int(t), v))
            deg[t] += 1
        deg[v] = m
    return Graph(n, np.array(edges))


def gen_copying(spec: GenSpec, rng: np.random.Generator | None = None) -> Graph:
    """Copying-model growth: each new edge picks a uniform node w.p. alpha,
    else a uniform neighbor of a uniform node; duplicate targets are re-drawn."""
    n, m, gamma = spec.n, spec.m, spec.gamma
    if m < 1 or not (2.0 <= gamma <= 4.0) or n <= m + 1:
        raise ContractError(f"bad copying parameters n={n} m={m} gamma={gamma}")
    alpha = (2.0 - gamma) / (1.0 - gamma)  # 0 at gamma=2, 1/2 at gamma=3, 2/3 at gamma=4
    rng = rng or spec.rng()
    edges = _clique_edges(m + 1)
    adj: list[list[int]] = [[j for j in range(m + 1) if j != i] for i in range(m + 1)]
    adj += [[] for _ in range(n - m - 1)]
    for v in range(m + 1, n):
        targets: set[int] = set()
        while len(targets) < m:
            if rng.random() < alpha:
                t = int(rng.integers(0, v))
            else:
                u = int(rng.integers(0, v))
                t = int(adj[u][rng.integers(0, len(adj[u]))])
            targets.add(t)
        for t in targets:
            edges.append((t, v))
            adj[t].append(v)
            adj[v].append(t)
    return Graph(n, np.array(edges))


def er_probability(n: int, m: int) -> float:
    return (2.0 * n - (m + 1)) * m / (n * (n - 1.0))


def gen_er(spec: GenSpec, rng: np.random.Generator | None = None) -> Graph:
    """Erdos-Renyi with edge probability matched to the growth models' edge
    count; only the largest connected component is retained (re-compacted)."""
    n, m = spec.n, spec.m
    p = er_probability(n, m)
    if not (0.0 < p <= 1.0):
        raise ContractError(f"ER probability {p} outside (0, 1] for n={n} m={m}")
    rng = rng or spec.rng()
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    src, dst = iu[keep], ju[keep]
    g = Graph(n, np.stack([src, dst], axis=1))
    return extract_largest_component(g)


def extract_largest_component(g: Graph) -> Graph:
    from .graph import connected_components

    labels = connected_components(g)
    act = labels[labels >= 0]
    if act.size == 0:
        return Graph(1, np.zeros((0, 2), dtype=np.int64))
    big = int(np.bincount(act).argmax())
    keep = labels == big
    remap = -np.ones(g.n_total, dtype=np.int64)
    remap[keep] = np.arange(keep.sum())
    src, dst = g.active_edges()
    sel = keep[src] & keep[dst]
    return Graph(int(keep.sum()), np.stack([remap[src[sel]], remap[dst[sel]]], axis=1))


def gen_ws(n: int, k: int, beta: float, seed=None) -> Graph:
    """Watts-Strogatz small world: ring lattice, each edge rewired w.p. beta."""
    if k % 2 != 0 or k <= 0 or k >= n:
        raise ContractError(f"WS needs even 0 < k < n, got n={n} k={k}")
    if not (0.0 <= beta <= 1.0):
        raise ContractError(f"beta must be in [0,1], got {beta}")
    rng = np.random.default_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    adj: list[set[int]] = [set() for _ in range(n)]
    for j in range(1, k // 2 + 1):
        for i in range(n):
            adj[i].add((i + j) % n)
            adj[(i + j) % n].add(i)
    for j in range(1, k // 2 + 1):
        for i in range(n):
            if rng.random() >= beta:
                continue
            old = (i + j) % n
            if len(adj[i]) >= n - 1:
                continue  # already attached everywhere
            while True:
                t = int(rng.integers(0, n))
                if t != i and t not in adj[i]:
                    break
            adj[i].discard(old)
            adj[old].discard(i)
            adj[i].add(t)
            adj[t].add(i)
    edges = [(i, j) for i in range(n) for j in adj[i] if i < j]
    return Graph(n, np.array(edges))


# -- degree-preserving rewiring ----------------------------------------------------


def assign_labels(g: Graph, mode: str, rng: np.random.Generator) -> np.ndarray:
    """random: a uniform permutation of 0..n-1; degree: degree rank with ties
    given consecutive integers (lowest id first)."""
    n = g.n_total
    if mode == "random":
        return rng.permutation(n).astype(np.int64)
    if mode == "degree":
        order = np.lexsort((np.arange(n), g.degrees))
        labels = np.empty(n, dtype=np.int64)
        labels[order] = np.arange(n)
        return labels
    raise ContractError(f"unknown label mode {mode!r}")


def _bfs_connected(adj: list[set[int]], n: int, start: int) -> bool:
    seen = bytearray(n)
    seen[start] = 1
    queue = deque([start])
    count = 1
    while queue:
        v = queue.popleft()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = 1
                count += 1
                queue.append(u)
    return count == n


def rewire_to_target(g: Graph, spec: RewireSpec, rng: np.random.Generator,
                     labels: np.ndarray | None = None) -> tuple[Graph, float]:
    """Double-edge swaps toward a label-assortativity target.

    A proposed swap {(i,l),(j,k)} -> {(i,k),(j,l)} is rejected when either new
    edge exists, when it moves the coefficient away from the target, or when
    it would disconnect the graph.  Degrees are preserved exactly.  Returns the
    rewired graph and the achieved coefficient.
    """
    if g.n_active != g.n_total:
        raise ContractError("rewiring expects a fully active graph")
    if not is_connected(g):
        raise ContractError("rewiring requires a connected graph")
    if labels is None:
        labels = assign_labels(g, spec.label_mode, rng)
    src, dst = g.active_edges()
    m = len(src)
    if m < 2:
        return g.copy(), label_assortativity(g, labels).value
    max_attempts = spec.max_attempts if spec.max_attempts is not None else 100 * m

    adj: list[set[int]] = [set() for _ in range(g.n_total)]
    ea = src.copy()
    eb = dst.copy()
    for a, b in zip(ea, eb):
        adj[a].add(int(b))
        adj[b].add(int(a))

    lab = labels.astype(np.float64)
    # stub sums; degree-preserving swaps change only the cross term
    sx = float((lab[ea] + lab[eb]).sum())
    sxx = float((lab[ea] ** 2 + lab[eb] ** 2).sum())
    sxy = float(2.0 * (lab[ea] * lab[eb]).sum())
    stubs = 2.0 * m
    mu = sx / stubs
    var = sxx / stubs - mu * mu
    if var <= 1e-15:
        return g.copy(), 0.0

    def coeff() -> float:
        return (sxy / stubs - mu * mu) / var

    r = coeff()
    tol = spec.tolerance
    for _ in range(max_attempts):
        if abs(r - spec.target) <= tol:
            break
        e1 = int(rng.integers(0, m))
        e2 = int(rng.integers(0, m))
        if e1 == e2:
            continue
        i, l = (int(ea[e1]), int(eb[e1])) if rng.random() < 0.5 else (int(eb[e1]), int(ea[e1]))
        j, k = (int(ea[e2]), int(eb[e2])) if rng.random() < 0.5 else (int(eb[e2]), int(ea[e2]))
        if len({i, j, k, l}) < 4:
            continue
        delta = (labels[i] - labels[j]) * (labels[k] - labels[l])
        if delta == 0 or (delta > 0) != (r < spec.target):
            continue
        if k in adj[i] or l in adj[j]:
            continue
        adj[i].discard(l); adj[l].discard(i)
        adj[j].discard(k); adj[k].discard(j)
        adj[i].add(k); adj[k].add(i)
        adj[j].add(l); adj[l].add(j)
        if not _bfs_connected(adj, g.n_total, i):
            adj[i].discard(k); adj[k].discard(i)
            adj[j].discard(l); adj[l].discard(j)
            adj[i].add(l); adj[l].add(i)
            adj[j].add(k); adj[k].add(j)
            continue
        ea[e1], eb[e1] = i, k
        ea[e2], eb[e2] = j, l
        sxy += 2.0 * float(delta)
        r = coeff()
    out = Graph(g.n_total, np.stack([ea, eb], axis=1))
    return out, r


# -- the full sampling pipeline ------------------------------------------------------


@dataclass
class SampleRecord:
    model: str
    n: int
    m: int
    gamma: float
    label_mode: str = ""
    target: float = 0.0
    achieved: float = 0.0
    rewired: bool = False


def sample_training_graph(
    rng: np.random.Generator,
    n_range: tuple[int, int] = (100, 200),
    m_choices: tuple[int, ...] | None = None,
    rewire: bool = True,
    tolerance: float = 0.02,
) -> tuple[Graph, SampleRecord]:
    """One structurally diversified connected training graph plus its recipe.

    Model is uniform over {LPA, copying, ER}; n uniform in n_range; m comes
    from {1,6,8,10} w.p. 1/3 else {2,3,4,5} (or uniformly from m_choices);
    gamma uniform in [2,4].  With a coin flip the rewiring labels nodes
    randomly (modularity control) or by degree (assortativity control), and
    the signed target magnitude is drawn from the Appendix set.
    """
    while True:
        model = ("lpa", "copy", "er")[int(rng.integers(0, 3))]
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        if m_choices is not None:
            m = int(m_choices[int(rng.integers(0, len(m_choices)))])
        else:
            mset = PAPER_M_SETS[0] if rng.random() < 1.0 / 3.0 else PAPER_M_SETS[1]
            m = int(mset[int(rng.integers(0, len(mset)))])
        gamma = float(rng.uniform(2.0, 4.0))
        if n <= m + 1:
            continue
        spec = GenSpec(model=model, n=n, m=m, gamma=gamma)
        if model == "lpa":
            g = gen_lpa(spec, rng)
        elif model == "copy":
            g = gen_copying(spec, rng)
        else:
            g = gen_er(spec, rng)
        if g.n_active < max(10, n_range[0] // 3) or g.m_active < 2:
            continue  # degenerate ER draw
        record = SampleRecord(model=model, n=g.n_total, m=m, gamma=gamma)
        if rewire:
            mode = "random" if rng.random() < 0.5 else "degree"
            magnitude = TARGET_MAGNITUDES[int(rng.integers(0, len(TARGET_MAGNITUDES)))]
            target = magnitude if rng.random() < 0.5 else -magnitude
            g, achieved = rewire_to_target(
                g, RewireSpec(label_mode=mode, target=target, tolerance=tolerance), rng)
            record.label_mode = mode
            record.target = target
            record.achieved = achieved
            record.rewired = True
        return g, record


def generate_corpus(
    count: int,
    seed: int,
    n_range: tuple[int, int] = (100, 200),
    m_choices: tuple[int, ...] | None = None,
    rewire: bool = True,
) -> tuple[list[Graph], list[SampleRecord]]:
    """Deterministic corpus: graph i depends only on (seed, i)."""
    if count < 1:
        raise ContractError("corpus count must be >= 1")
    children = np.random.SeedSequence(seed).spawn(count)
    graphs, records = [], []
    for child in children:
        g, rec = sample_training_graph(
            np.random.default_rng(child), n_range=n_range,
            m_choices=m_choices, rewire=rewire)
        graphs.append(g)
        records.append(rec)
    return graphs, records


def make_validation_graphs(
    seed: int,
    count: int = 20,
    n_range: tuple[int, int] = (100, 200),
    m_choices: tuple[int, ...] = (1, 2, 3),
) -> list[Graph]:
    """Fixed validation set: roughly equal parts LPA, ER, and Watts-Strogatz."""
    children = np.random.SeedSequence(seed).spawn(count)
    graphs = []
    for idx, child in enumerate(children):
        rng = np.random.default_rng(child)
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        kind = ("lpa", "er", "ws")[idx % 3]
        if kind == "ws":
            graphs.append(gen_ws(n, k=4, beta=0.1, seed=rng))
            continue
        m = int(m_choices[int(rng.integers(0, len(m_choices)))])
        spec = GenSpec(model=kind, n=n, m=m, gamma=float(rng.uniform(2.0, 4.0)))
        g = gen_lpa(spec, rng) if kind == "lpa" else gen_er(spec, rng)
        if g.n_active < 5:
            g = gen_lpa(GenSpec(model="lpa", n=n, m=1, gamma=3.0), rng)
        graphs.append(g)
    return graphs
