"""Tape ops built on the fused kernels plus per-network strided matmuls.

Array layout is node-major: rows first, then the stacked-network axis S, so
row gathers move contiguous memory and per-graph working sets stay cache
resident.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from . import kernels
from .tape import Tensor, _accum, _record, as_tensor


def per_net_matmul(x, w) -> Tensor:
    """(R,S,a) @ (S,a,b) -> (R,S,b): one GEMM per stacked network."""
    x, w = as_tensor(x), as_tensor(w)
    rows, s_n, a = x.data.shape
    if w.data.shape[:2] != (s_n, a):
        raise ContractError(f"per_net_matmul shape mismatch {x.data.shape} @ {w.data.shape}")
    b = w.data.shape[2]
    out = np.empty((rows, s_n, b), dtype=x.data.dtype)
    for s in range(s_n):
        out[:, s, :] = x.data[:, s, :] @ w.data[s]

    def bwd(g):
        if x.requires_grad:
            gx = np.empty_like(x.data)
            for s in range(s_n):
                gx[:, s, :] = g[:, s, :] @ w.data[s].T
            _accum(x, gx)
        if w.requires_grad:
            gw = np.empty_like(w.data)
            for s in range(s_n):
                gw[s] = x.data[:, s, :].T @ g[:, s, :]
            _accum(w, gw)

    return _record(out, (x, w), bwd)


def head_linear(x, w) -> Tensor:
    """(R,S,H,F) x (S,H,F,G) -> (R,S,H,G): tiny per-(net,head) GEMMs."""
    x, w = as_tensor(x), as_tensor(w)
    rows, s_n, h_n, f = x.data.shape
    if w.data.shape[:3] != (s_n, h_n, f):
        raise ContractError(f"head_linear shape mismatch {x.data.shape} x {w.data.shape}")
    g_dim = w.data.shape[3]
    out = np.empty((rows, s_n, h_n, g_dim), dtype=x.data.dtype)
    for s in range(s_n):
        for h in range(h_n):
            np.matmul(x.data[:, s, h, :], w.data[s, h], out=out[:, s, h, :])

    def bwd(g):
        if x.requires_grad:
            gx = np.empty_like(x.data)
            for s in range(s_n):
                for h in range(h_n):
                    np.matmul(g[:, s, h, :], w.data[s, h].T, out=gx[:, s, h, :])
            _accum(x, gx)
        if w.requires_grad:
            gw = np.empty_like(w.data)
            for s in range(s_n):
                for h in range(h_n):
                    np.matmul(x.data[:, s, h, :].T, g[:, s, h, :], out=gw[s, h])
            _accum(w, gw)

    return _record(out, (x, w), bwd)


def attn_scores(h1, b1, w2, b2, heads: int, hidden: int) -> Tensor:
    """Fused per-head sigmoid MLP: (R,S,H*hid) projections -> (R,S,H) coefficients."""
    h1, b1, w2, b2 = as_tensor(h1), as_tensor(b1), as_tensor(w2), as_tensor(b2)
    rows, s_n, _ = h1.data.shape
    alpha = np.empty((rows, s_n, heads), dtype=h1.data.dtype)
    kernels.attn_scores_fwd(h1.data, b1.data, w2.data, b2.data, alpha)

    def bwd(g):
        g = np.ascontiguousarray(g)
        gh1 = np.empty_like(h1.data)
        gb1 = np.zeros_like(b1.data)
        gw2 = np.zeros_like(w2.data)
        gb2 = np.zeros_like(b2.data)
        kernels.attn_scores_bwd(g, alpha, h1.data, b1.data, w2.data,
                                gh1, gb1, gw2, gb2)
        _accum(h1, gh1)
        _accum(b1, gb1)
        _accum(w2, gw2)
        _accum(b2, gb2)

    return _record(alpha, (h1, b1, w2, b2), bwd)


def edge_attn_messages(ha, hb, b1, w2, b2, vp, src: np.ndarray, dst: np.ndarray,
                       heads: int, feat: int) -> Tensor:
    """Fused pairwise attention and message aggregation over directed edges.

    ha/hb: (R,S,H*hid) receiver/sender first-layer projections; vp: (R,S,H,F)
    sender values.  Returns agg (R,S,H,F): sum over incoming edges of
    sigmoid-coefficient times vp[src].
    """
    ha, hb, b1, w2, b2, vp = map(as_tensor, (ha, hb, b1, w2, b2, vp))
    rows, s_n, _ = ha.data.shape
    agg = np.zeros((rows, s_n, heads, feat), dtype=ha.data.dtype)
    alphas = np.empty((len(src), s_n, heads), dtype=ha.data.dtype)
    if len(src):
        kernels.edge_attn_fwd(ha.data, hb.data, b1.data, w2.data, b2.data,
                              vp.data, src, dst, agg, alphas)

    def bwd(g):
        if not len(src):
            return
        g = np.ascontiguousarray(g)
        gha = np.zeros(ha.data.shape, ha.data.dtype)
        ghb = np.zeros(hb.data.shape, hb.data.dtype)
        gb1 = np.zeros_like(b1.data)
        gw2 = np.zeros_like(w2.data)
        gb2 = np.zeros_like(b2.data)
        gvp = np.zeros(vp.data.shape, vp.data.dtype)
        kernels.edge_attn_bwd(g, alphas, ha.data, hb.data, b1.data, w2.data,
                              vp.data, src, dst, gha, ghb, gb1, gw2, gb2, gvp)
        _accum(ha, gha)
        _accum(hb, ghb)
        _accum(b1, gb1)
        _accum(w2, gw2)
        _accum(b2, gb2)
        _accum(vp, gvp)

    return _record(agg, (ha, hb, b1, w2, b2, vp), bwd)
