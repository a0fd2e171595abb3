"""Inference-time dismantling: policy rollouts, classic baselines, reports.

The trained policy removes nodes greedily (or by sampling), re-encoding after
each removal batch; adaptive degree recomputes degrees after every removal;
PageRank and betweenness are static rankings.  Every method yields a
DismantlingCurve whose fractions and AUC come from the exact reverse
union-find evaluator.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .agent import AgentParams, _dec_arrays, _policy_scores_np
from .errors import ContractError
from .graph import DismantlingCurve, Graph, auc_for_order, largest_component_size

BIG_GRAPH_CUTOFF = 10_000  # above this, default to fractional removal batches


@dataclass
class RolloutConfig:
    threshold: float = 0.1
    batch_frac: float | None = None  # None: single-node if |V| <= cutoff, else 1%
    mode: str = "argmax"             # or "sample"
    seed: int | None = None

    def validate(self) -> None:
        if not (0.0 < self.threshold <= 1.0):
            raise ContractError("threshold must be in (0, 1]")
        if self.batch_frac is not None and not (0.0 < self.batch_frac <= 0.1):
            raise ContractError("batch_frac must be in (0, 0.1]")
        if self.mode not in ("argmax", "sample"):
            raise ContractError(f"unknown rollout mode {self.mode!r}")


def rollout(g: Graph, params: AgentParams, cfg: RolloutConfig | None = None) -> DismantlingCurve:
    """Dismantle with the trained policy until the LCC crosses the threshold.

    Each forward pass removes one node on small graphs, or batch_frac of the
    remaining nodes on large ones (re-encoding per batch keeps million-node
    inference tractable).  The curve records every individual removal; steps
    past the threshold crossing inside the final batch are trimmed by the
    exact evaluator.
    """
    cfg = cfg or RolloutConfig()
    cfg.validate()
    if g.n_active == 0:
        raise ContractError("empty graph")
    rng = np.random.default_rng(cfg.seed)
    work = g.copy()
    n0 = work.n_active
    frac = cfg.batch_frac
    if frac is None and n0 > BIG_GRAPH_CUTOFF:
        frac = 0.01
    order: list[int] = []
    enc_bank = params.pi_encoder_bank()
    dec = _dec_arrays(params.dec["pi"])
    # strict inequality: at threshold 1.0 the intact graph already satisfies
    # the stopping condition and the curve is empty
    while work.n_active > 0 and largest_component_size(work) > cfg.threshold * n0:
        ids, logits = _policy_scores_np(work, enc_bank, dec, params.cfg.encoder)
        k = 1 if frac is None else max(1, int(np.ceil(frac * work.n_active)))
        k = min(k, work.n_active)
        if cfg.mode == "sample":
            lp = logits - logits.max()
            p = np.exp(lp)
            p /= p.sum()
            chosen = rng.choice(ids, size=k, replace=False, p=p)
        else:
            top = np.lexsort((ids, -logits))[:k]  # ties fall to the lowest id
            chosen = ids[top]
        for v in chosen:
            work.remove_node(int(v))
            order.append(int(v))
    return auc_for_order(g, order, cfg.threshold)


def _full_degree_order(g: Graph) -> list[int]:
    """Adaptive max-degree removal order over the whole graph.

    Lazy max-heap keyed by (-degree, id): every degree decrement pushes a
    fresh entry, stale ones are skipped on pop, so the total work is
    O((|V|+|E|) log |V|).
    """
    work = g.copy()
    deg = work.degrees.copy()
    heap = [(-int(deg[v]), int(v)) for v in work.active_nodes()]
    heapq.heapify(heap)
    order = []
    while heap:
        negd, v = heapq.heappop(heap)
        if not work.active[v] or -negd != deg[v]:
            continue
        nb = work.active_neighbors(v)
        work.remove_node(v)
        order.append(v)
        for u in nb:
            deg[u] -= 1
            heapq.heappush(heap, (-int(deg[u]), int(u)))
    return order


def baseline_adaptive_degree(g: Graph, threshold: float = 0.1) -> DismantlingCurve:
    """Remove the highest-degree active node, recomputing degrees every step."""
    return auc_for_order(g, _full_degree_order(g), threshold)


def pagerank_scores(g: Graph, damping: float = 0.85, tol: float = 1e-10,
                    max_iters: int = 200) -> np.ndarray:
    """Power-iteration PageRank over the active subgraph (both edge directions)."""
    ids = g.active_nodes()
    n = ids.size
    if n == 0:
        raise ContractError("empty graph")
    local = np.full(g.n_total, -1, dtype=np.int64)
    local[ids] = np.arange(n)
    src, dst = g.active_edges()
    a, b = local[src], local[dst]
    deg = g.degrees[ids].astype(np.float64)
    dangling = deg == 0
    score = np.full(n, 1.0 / n)
    for _ in range(max_iters):
        out = np.where(dangling, 0.0, score / np.maximum(deg, 1.0))
        nxt = np.bincount(a, weights=out[b], minlength=n)
        nxt += np.bincount(b, weights=out[a], minlength=n)
        nxt = (1.0 - damping) / n + damping * (nxt + score[dangling].sum() / n)
        delta = np.abs(nxt - score).sum()
        score = nxt
        if delta < tol:
            break
    return score


def baseline_pagerank(g: Graph, threshold: float = 0.1,
                      damping: float = 0.85) -> DismantlingCurve:
    """Static ranking by PageRank score, removed in descending order."""
    ids = g.active_nodes()
    score = pagerank_scores(g, damping)
    order = ids[np.lexsort((ids, -score))]
    return auc_for_order(g, order, threshold)


def betweenness_scores(g: Graph) -> np.ndarray:
    """Brandes' exact betweenness on the active subgraph (unweighted)."""
    ids = g.active_nodes()
    n = ids.size
    if n > 100_000:
        raise ContractError("betweenness guard: graph too large for exact Brandes")
    local = np.full(g.n_total, -1, dtype=np.int64)
    local[ids] = np.arange(n)
    neigh = [local[g.active_neighbors(int(v))] for v in ids]
    bc = np.zeros(n)
    for s in range(n):
        stack = []
        preds: list[list[int]] = [[] for _ in range(n)]
        sigma = np.zeros(n)
        sigma[s] = 1.0
        dist = np.full(n, -1, dtype=np.int64)
        dist[s] = 0
        queue = [s]
        qi = 0
        while qi < len(queue):
            v = queue[qi]
            qi += 1
            stack.append(v)
            for w in neigh[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(int(w))
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = np.zeros(n)
        for w in reversed(stack):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / 2.0  # undirected: each pair counted twice


def baseline_betweenness(g: Graph, threshold: float = 0.1) -> DismantlingCurve:
    """Static ranking by exact betweenness centrality, descending."""
    ids = g.active_nodes()
    bc = betweenness_scores(g)
    order = ids[np.lexsort((ids, -bc))]
    return auc_for_order(g, order, threshold)


def baseline_random(g: Graph, threshold: float = 0.1, seed: int | None = None) -> DismantlingCurve:
    """Uniform-random removal order (the no-skill reference)."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(g.active_nodes())
    return auc_for_order(g, order, threshold)


def relative_auc(aucs: dict[str, float], reference: str) -> dict[str, float]:
    """Each method's AUC as a percentage of the reference method's AUC."""
    if reference not in aucs:
        raise ContractError(f"reference method {reference!r} missing")
    ref = aucs[reference]
    if ref <= 0:
        raise ContractError("reference AUC must be positive")
    return {k: 100.0 * v / ref for k, v in aucs.items()}
