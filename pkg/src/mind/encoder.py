"""Attention message-passing encoder with all-ones initialization.

Each node carries H per-head embeddings, updated per layer by

    e_i^h <- alpha_i^h W_sigma^h e_i^h + sum_{j in N(i)} alpha_ij^h W_nu^h e_j^h

where the coefficients come from head-specific sigmoid MLPs over the
concatenation of all heads (no softmax normalization over the neighborhood,
which keeps the aggregation injective over neighbor multisets and lets the
heads learn to normalize message magnitudes).  The final node representation
is the profile of embeddings across every layer.  A synthetic omni-node per
graph receives one-way messages from all nodes and summarizes global state;
it is treated as an extra row with incoming edges from every node of its
graph, so one fused kernel pass covers both node and omni updates.

Arrays are node-major with a trailing stacked-network axis S, so several
independent networks (twin Q encoders plus the policy encoder) evaluate in
one pass.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .graph import Graph, is_connected
from . import diffcore as dc
from .diffcore import Tensor


@dataclass
class EncoderConfig:
    heads: int = 4
    feat: int = 4
    layers: int = 6
    attn_hidden: int = 32
    omni_mean: bool = True  # normalize the omni-node's neighbor sum by |V_t|

    @property
    def cat_dim(self) -> int:
        return self.heads * self.feat

    @property
    def profile_dim(self) -> int:
        return self.layers * self.heads * self.feat


def encoder_param_shapes(cfg: EncoderConfig, stacked: int = 1) -> dict[str, tuple]:
    """Shape table for one encoder bank (leading axis = stacked networks)."""
    s, h, f, hid = stacked, cfg.heads, cfg.feat, cfg.attn_hidden
    shapes = {}
    for k in range(cfg.layers):
        p = f"enc/k{k}"
        shapes[f"{p}/w_sigma"] = (s, h, f, f)
        shapes[f"{p}/w_nu"] = (s, h, f, f)
        for kind in ("sigma", "nu"):
            shapes[f"{p}/att_{kind}_w1"] = (s, h * f, h * hid)
            shapes[f"{p}/att_{kind}_b1"] = (s, h, hid)
            shapes[f"{p}/att_{kind}_w2"] = (s, h, hid)
            shapes[f"{p}/att_{kind}_b2"] = (s, h)
    return shapes


def init_encoder_bank(cfg: EncoderConfig, rng: np.random.Generator,
                      stacked: int = 1, dtype=np.float32,
                      w_nu_gain: float = 0.5) -> dict[str, Tensor]:
    """Fresh encoder parameters.  The neighbor-weight gain is kept below the
    self-weight gain so layer-6 magnitudes stay moderate at initialization
    (the attention MLPs learn the normalization from there)."""
    h, f, hid = cfg.heads, cfg.feat, cfg.attn_hidden
    bank: dict[str, Tensor] = {}
    for name, shape in encoder_param_shapes(cfg, stacked).items():
        if name.endswith("/w_sigma"):
            arr = dc.xavier_uniform(rng, f, f, shape=shape, dtype=dtype)
        elif name.endswith("/w_nu"):
            arr = dc.xavier_uniform(rng, f, f, shape=shape, dtype=dtype, gain=w_nu_gain)
        elif name.endswith("_w1"):
            arr = dc.xavier_uniform(rng, h * f, hid, shape=shape, dtype=dtype)
        elif name.endswith("_w2"):
            arr = dc.xavier_uniform(rng, hid, 1, shape=shape, dtype=dtype)
        else:
            arr = np.zeros(shape, dtype=dtype)
        bank[name] = dc.param(arr)
    return bank


@dataclass
class EncoderParams:
    cfg: EncoderConfig
    bank: dict[str, Tensor]

    @classmethod
    def create(cls, cfg: EncoderConfig | None = None, seed: int | None = None,
               dtype=np.float32) -> "EncoderParams":
        cfg = cfg or EncoderConfig()
        return cls(cfg, init_encoder_bank(cfg, np.random.default_rng(seed), 1, dtype))


# -- graph batching ---------------------------------------------------------------


@dataclass
class GraphBatch:
    """Disjoint union of active subgraphs plus one omni row per graph.

    Rows 0..n_nodes-1 are real nodes grouped by graph; rows n_nodes..n_nodes+
    n_graphs-1 are omni-nodes.  edge arrays hold both orientations of every
    active edge plus one node->omni edge per node, sorted by destination row.
    """

    n_nodes: int
    n_graphs: int
    node_graph: np.ndarray          # graph index per real node (ascending)
    node_ptr: np.ndarray            # (B+1,) node segment offsets
    counts: np.ndarray              # active node count per graph
    edge_src: np.ndarray
    edge_dst: np.ndarray
    node_ids: list[np.ndarray] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return self.n_nodes + self.n_graphs


def batch_graphs(items: list) -> GraphBatch:
    """Build the disjoint union of the given graphs (or (graph, mask) pairs)."""
    locals_list = []
    offset = 0
    counts = []
    ids_per_graph = []
    for item in items:
        g, mask = item if isinstance(item, tuple) else (item, item.active)
        ids = np.flatnonzero(mask)
        if ids.size == 0:
            raise ContractError("cannot encode an empty graph")
        local = np.full(g.n_total, -1, dtype=np.int64)
        local[ids] = np.arange(ids.size) + offset
        keep = mask[g.edge_src] & mask[g.edge_dst]
        a = local[g.edge_src[keep]]
        b = local[g.edge_dst[keep]]
        locals_list.append((a, b))
        ids_per_graph.append(ids)
        counts.append(ids.size)
        offset += ids.size
    counts = np.asarray(counts, dtype=np.int64)
    node_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    n_nodes = int(node_ptr[-1])
    n_graphs = len(counts)
    node_graph = np.repeat(np.arange(n_graphs, dtype=np.int64), counts)
    all_nodes = np.arange(n_nodes, dtype=np.int64)
    src = np.concatenate([x for a, b in locals_list for x in (a, b)] + [all_nodes])
    dst = np.concatenate([x for a, b in locals_list for x in (b, a)] + [node_graph + n_nodes])
    order = np.argsort(dst, kind="stable")  # receiver-major improves kernel locality
    return GraphBatch(
        n_nodes=n_nodes,
        n_graphs=n_graphs,
        node_graph=node_graph,
        node_ptr=node_ptr,
        counts=counts,
        edge_src=src[order],
        edge_dst=dst[order],
        node_ids=ids_per_graph,
    )


def batch_from_local_edges(edge_arrays: list[np.ndarray], counts: np.ndarray) -> GraphBatch:
    """GraphBatch from precomputed per-graph local edge pairs (replay path)."""
    counts = np.asarray(counts, dtype=np.int64)
    node_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    n_nodes = int(node_ptr[-1])
    n_graphs = len(counts)
    node_graph = np.repeat(np.arange(n_graphs, dtype=np.int64), counts)
    srcs, dsts = [], []
    for i, edges in enumerate(edge_arrays):
        if edges.size:
            a = edges[0].astype(np.int64) + node_ptr[i]
            b = edges[1].astype(np.int64) + node_ptr[i]
            srcs += [a, b]
            dsts += [b, a]
    all_nodes = np.arange(n_nodes, dtype=np.int64)
    src = np.concatenate(srcs + [all_nodes]) if srcs else all_nodes.copy()
    dst = np.concatenate(dsts + [node_graph + n_nodes]) if dsts else node_graph + n_nodes
    order = np.argsort(dst, kind="stable")
    return GraphBatch(n_nodes=n_nodes, n_graphs=n_graphs, node_graph=node_graph,
                      node_ptr=node_ptr, counts=counts,
                      edge_src=src[order], edge_dst=dst[order])


# -- forward pass --------------------------------------------------------------------


def _layer_forward(bank: dict[str, Tensor], prefix: str, cfg: EncoderConfig,
                   batch: GraphBatch, e: Tensor, row_scale: Tensor | None) -> Tensor:
    """One synchronous update of all rows (real nodes and omni rows)."""
    rows, s_n = e.data.shape[0], e.data.shape[1]
    h, f, hid = cfg.heads, cfg.feat, cfg.attn_hidden
    sp = dc.head_linear(e, bank[f"{prefix}/w_sigma"])     # (R,S,H,F)
    vp = dc.head_linear(e, bank[f"{prefix}/w_nu"])
    cat_s = dc.reshape(sp, (rows, s_n, h * f))
    cat_v = dc.reshape(vp, (rows, s_n, h * f))

    h_sig = dc.per_net_matmul(cat_s, bank[f"{prefix}/att_sigma_w1"])
    alpha_self = dc.attn_scores(h_sig, bank[f"{prefix}/att_sigma_b1"],
                                bank[f"{prefix}/att_sigma_w2"],
                                bank[f"{prefix}/att_sigma_b2"], h, hid)

    ha = dc.per_net_matmul(cat_s, bank[f"{prefix}/att_nu_w1"])   # receiver side
    hb = dc.per_net_matmul(cat_v, bank[f"{prefix}/att_nu_w1"])   # sender side
    agg = dc.edge_attn_messages(ha, hb, bank[f"{prefix}/att_nu_b1"],
                                bank[f"{prefix}/att_nu_w2"], bank[f"{prefix}/att_nu_b2"],
                                vp, batch.edge_src, batch.edge_dst, h, f)
    if row_scale is not None:
        agg = dc.mul(agg, row_scale)
    return dc.add(dc.mul(dc.reshape(alpha_self, (rows, s_n, h, 1)), sp), agg)


def encode_batch(bank: dict[str, Tensor], cfg: EncoderConfig, batch: GraphBatch,
                 collect_layers: bool = False):
    """Full K-layer pass over a stacked bank and a graph batch.

    Returns (Z, Zo): node profiles (N,S,K*H*F) and omni profiles (B,S,K*H*F).
    With collect_layers=True also returns each layer's (R,S,H,F) embeddings.
    """
    s_n = bank["enc/k0/w_sigma"].data.shape[0]
    dtype = bank["enc/k0/w_sigma"].dtype
    h, f = cfg.heads, cfg.feat
    rows = batch.n_rows
    e = dc.constant(np.ones((rows, s_n, h, f), dtype=dtype))
    row_scale = None
    if cfg.omni_mean:
        scale = np.ones((rows, 1, 1, 1), dtype=dtype)
        scale[batch.n_nodes:, 0, 0, 0] = 1.0 / batch.counts.astype(dtype)
        row_scale = dc.constant(scale)
    profiles, layer_states = [], []
    for k in range(cfg.layers):
        e = _layer_forward(bank, f"enc/k{k}", cfg, batch, e, row_scale)
        profiles.append(dc.reshape(e, (rows, s_n, h * f)))
        if collect_layers:
            layer_states.append(e)
    z_all = dc.concat(profiles, axis=-1)                   # (R,S,P)
    z = dc.narrow(z_all, 0, 0, batch.n_nodes)
    zo = dc.narrow(z_all, 0, batch.n_nodes, batch.n_graphs)
    if collect_layers:
        return z, zo, layer_states
    return z, zo


@dataclass
class EncodeResult:
    node_ids: np.ndarray      # original node ids, aligned with profile rows
    profiles: np.ndarray      # (n_active, K*H*F)
    omni_profile: np.ndarray  # (K*H*F,)


def encode(g: Graph, params: EncoderParams) -> EncodeResult:
    """Profiles for every active node plus the omni-node profile (no grad)."""
    if g.n_active == 0:
        raise ContractError("cannot encode an empty graph")
    batch = batch_graphs([g])
    with dc.no_grad():
        z, zo = encode_batch(params.bank, params.cfg, batch)
    return EncodeResult(batch.node_ids[0], z.data[:, 0], zo.data[0, 0])


def init_heads(g: Graph, cfg: EncoderConfig | None = None) -> tuple[np.ndarray, np.ndarray]:
    """All-ones initial embeddings: (n_active, H, F) plus the omni (H, F)."""
    cfg = cfg or EncoderConfig()
    return (np.ones((g.n_active, cfg.heads, cfg.feat), dtype=np.float32),
            np.ones((cfg.heads, cfg.feat), dtype=np.float32))


def attention_coeffs(params: EncoderParams, layer: int, e_i: np.ndarray,
                     e_j: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Self and pairwise attention coefficients for one node pair at a layer.

    e_i, e_j: per-head embeddings (H, F).  Returns (alpha_i, alpha_ij), one
    value per head, all strictly inside (0, 1).
    """
    cfg = params.cfg
    h, f, hid = cfg.heads, cfg.feat, cfg.attn_hidden
    p = f"enc/k{layer}"
    bank = {k: t.data[0] for k, t in params.bank.items()}

    def mlp(cat, kind):
        hidden = (cat @ bank[f"{p}/att_{kind}_w1"]).reshape(h, hid)
        hidden = np.maximum(hidden + bank[f"{p}/att_{kind}_b1"], 0)
        logits = (hidden * bank[f"{p}/att_{kind}_w2"]).sum(-1) + bank[f"{p}/att_{kind}_b2"]
        return 1.0 / (1.0 + np.exp(-logits))

    cat_s_i = np.einsum("hf,hfg->hg", e_i, bank[f"{p}/w_sigma"]).reshape(h * f)
    cat_v_j = np.einsum("hf,hfg->hg", e_j, bank[f"{p}/w_nu"]).reshape(h * f)
    return mlp(cat_s_i, "sigma"), mlp(cat_s_i + cat_v_j, "nu")


def message_pass_layer(g: Graph, embeddings: np.ndarray, omni: np.ndarray,
                       layer: int, params: EncoderParams) -> tuple[np.ndarray, np.ndarray]:
    """One synchronous layer update for a single graph (probing/tests).

    embeddings: (n_active, H, F) aligned with g.active_nodes(); omni: (H, F).
    """
    if layer >= params.cfg.layers:
        raise ContractError("layer index beyond configured depth")
    batch = batch_graphs([g])
    dtype = params.bank["enc/k0/w_sigma"].dtype
    state = np.concatenate([embeddings, omni[None]], axis=0)[:, None].astype(dtype)
    e = dc.constant(state)
    row_scale = None
    if params.cfg.omni_mean:
        scale = np.ones((batch.n_rows, 1, 1, 1), dtype=dtype)
        scale[batch.n_nodes:, 0, 0, 0] = 1.0 / batch.counts.astype(dtype)
        row_scale = dc.constant(scale)
    with dc.no_grad():
        e2 = _layer_forward(params.bank, f"enc/k{layer}", params.cfg, batch, e, row_scale)
    return e2.data[:batch.n_nodes, 0], e2.data[batch.n_nodes, 0]


# -- softmax-normalized reference comparator (tests/ablations only) -------------------


def init_reference_params(cfg: EncoderConfig, rng: np.random.Generator) -> dict:
    """GATv2-style parameters: per layer and head, score = a . leakyrelu(Wl e_i + Wr e_j)."""
    f = cfg.feat
    params = {}
    for k in range(cfg.layers):
        for h in range(cfg.heads):
            params[f"k{k}/h{h}/wl"] = dc.xavier_uniform(rng, f, f, dtype=np.float64)
            params[f"k{k}/h{h}/wr"] = dc.xavier_uniform(rng, f, f, dtype=np.float64)
            params[f"k{k}/h{h}/a"] = rng.normal(size=f)
    return params


def softmax_attention_reference(g: Graph, cfg: EncoderConfig, params: dict) -> list[np.ndarray]:
    """Softmax-normalized attention pipeline from the same all-ones start.

    Returns the (n, H, F) embeddings after every layer.  With a constant
    initialization the softmax weights over {i} u N(i) are uniform and every
    node's update collapses to the same vector, so between-node variance
    stays at zero; the comparator demonstrates why the unnormalized
    coefficients matter.
    """
    ids = g.active_nodes()
    n = ids.size
    local = {int(v): i for i, v in enumerate(ids)}
    neigh = [[local[int(u)] for u in g.active_neighbors(int(v))] for v in ids]
    e = np.ones((n, cfg.heads, cfg.feat))
    states = []
    for k in range(cfg.layers):
        nxt = np.zeros_like(e)
        for h in range(cfg.heads):
            wl = params[f"k{k}/h{h}/wl"]
            wr = params[f"k{k}/h{h}/wr"]
            a = params[f"k{k}/h{h}/a"]
            left = e[:, h] @ wl
            right = e[:, h] @ wr
            for i in range(n):
                hood = [i] + neigh[i]
                pre = left[i] + right[hood]
                scores = np.where(pre > 0, pre, 0.2 * pre) @ a
                scores -= scores.max()
                w = np.exp(scores)
                w /= w.sum()
                nxt[i, h] = w @ right[hood]
        e = nxt
        states.append(e.copy())
    return states


# -- spectral estimation -------------------------------------------------------------


def _is_bipartite(g: Graph) -> bool:
    color = np.full(g.n_total, -1, dtype=np.int8)
    for start in g.active_nodes():
        if color[start] >= 0:
            continue
        color[start] = 0
        stack = [int(start)]
        while stack:
            v = stack.pop()
            for u in g.active_neighbors(v):
                if color[u] < 0:
                    color[u] = 1 - color[v]
                    stack.append(int(u))
                elif color[u] == color[v]:
                    return False
    return True


FIEDLER_JITTER_SEED = 0x51DE


def fiedler_estimate(g: Graph, iters: int = 500) -> np.ndarray:
    """Fiedler-direction estimate by iterating T = (I + D^-1/2 A D^-1/2)/2.

    Starts from all-ones plus a fixed seeded jitter, rescales periodically
    (scaling leaves the direction unchanged), and finally removes the
    projection onto the principal eigenvector D^1/2 1.  The jitter breaks
    graph symmetries: on reflection-symmetric graphs such as paths the exact
    all-ones vector has zero Fiedler projection, which no amount of iteration
    can recover.  Returns the residual per active node, aligned with
    g.active_nodes().  Raises on disconnected input; warns on bipartite
    graphs and on degenerate (vanishing) residuals.
    """
    if g.n_active == 0:
        raise ContractError("empty graph")
    if not is_connected(g):
        raise ContractError("fiedler_estimate requires a connected graph")
    if _is_bipartite(g) and g.n_active > 1:
        warnings.warn("bipartite graph: T has an eigenvalue at 0; estimate may be noisy")
    ids = g.active_nodes()
    n = ids.size
    local = np.full(g.n_total, -1, dtype=np.int64)
    local[ids] = np.arange(n)
    src, dst = g.active_edges()
    a = local[src]
    b = local[dst]
    deg = g.degrees[ids].astype(np.float64)
    dinv = 1.0 / np.sqrt(np.maximum(deg, 1.0))
    jitter = np.random.default_rng(FIEDLER_JITTER_SEED).uniform(-0.5, 0.5, size=n)
    x = np.ones(n, dtype=np.float64) + jitter
    for t in range(iters):
        z = x * dinv
        y = np.bincount(a, weights=z[b], minlength=n)
        y += np.bincount(b, weights=z[a], minlength=n)
        x = 0.5 * (x + y * dinv)
        if t % 16 == 15:
            x /= np.linalg.norm(x)
    nx = np.linalg.norm(x)
    if nx > 0:
        x /= nx
    u1 = np.sqrt(np.maximum(deg, 1.0))
    u1 /= np.linalg.norm(u1)
    residual = x - (u1 @ x) * u1
    if np.linalg.norm(residual) < 1e-13:  # at the accumulated-rounding floor
        warnings.warn("residual nearly zero: the Fiedler component of the start "
                      "vector decayed to nothing; estimate is degenerate")
    return residual


def normalized_laplacian(g: Graph) -> np.ndarray:
    """Dense normalized Laplacian of the active subgraph (test oracle input)."""
    ids = g.active_nodes()
    n = ids.size
    local = np.full(g.n_total, -1, dtype=np.int64)
    local[ids] = np.arange(n)
    src, dst = g.active_edges()
    A = np.zeros((n, n))
    A[local[src], local[dst]] = 1.0
    A[local[dst], local[src]] = 1.0
    deg = A.sum(axis=1)
    dinv = 1.0 / np.sqrt(np.maximum(deg, 1e-12))
    return np.eye(n) - (dinv[:, None] * A) * dinv[None, :]
