"""Reverse-mode autodiff over dense numpy arrays on a dynamic Wengert tape.

A Tape records operations in execution order; backward walks the list in
reverse once and is then consumed (graphs change size every step, so tapes
are rebuilt per forward pass).  Parameters are persistent leaf Tensors whose
``grad`` accumulates during backward.  Training runs in float32; gradient
check suites build float64 leaves.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError

_ACTIVE_TAPE: "Tape | None" = None
_GRAD_ENABLED: bool = True


class Tape:
    """Execution-ordered op list; enter to make it the recording target."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.consumed = False
        self._outer = None

    def add(self, t: "Tensor") -> None:
        t.tape_id = len(self.nodes)
        self.nodes.append(t)

    def __enter__(self) -> "Tape":
        global _ACTIVE_TAPE
        self._outer = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc) -> None:
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._outer


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """Dense array plus optional gradient and tape bookkeeping."""

    __slots__ = ("data", "grad", "requires_grad", "tape_id", "_tape", "_parents", "_bwd")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.tape_id = -1
        self._tape = None
        self._parents = ()
        self._bwd = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"


def param(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=True)


def constant(data) -> Tensor:
    return Tensor(np.asarray(data), requires_grad=False)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else constant(x)


def _accum(t: Tensor, g: np.ndarray) -> None:
    # grads are never mutated in place, so sharing/view aliasing is safe
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _record(data: np.ndarray, parents: tuple, bwd) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and _ACTIVE_TAPE is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._bwd = bwd
        out._tape = _ACTIVE_TAPE
        _ACTIVE_TAPE.add(out)
    return out


def backward(loss: Tensor) -> None:
    """Populate gradients of everything reachable from a scalar loss.

    The tape is consumed; a second backward without a fresh forward raises.
    """
    if loss.data.size != 1:
        raise ContractError("backward requires a scalar loss")
    tape = loss._tape
    if tape is None or not loss.requires_grad:
        raise ContractError("loss is not on an active tape (re-run the forward pass)")
    if tape.consumed:
        raise ContractError("tape already consumed; re-run the forward pass")
    loss.grad = np.ones_like(loss.data)
    for node in reversed(tape.nodes[: loss.tape_id + 1]):
        if node.grad is not None and node._bwd is not None:
            node._bwd(node.grad)
            node.grad = None  # tape nodes are never leaves; free eagerly
    tape.consumed = True
    for node in tape.nodes:
        node._parents = ()
        node._bwd = None
        node._tape = None
    tape.nodes.clear()


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient over axes that were broadcast in the forward op."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, s) in enumerate(zip(g.shape, shape)) if s == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- arithmetic -----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    return _record(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    return _record(out, (a, b), bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    return _record(out, (a, b), bwd)


def scale(a, c: float) -> Tensor:
    a = as_tensor(a)
    c = a.data.dtype.type(c)
    out = a.data * c

    def bwd(g):
        _accum(a, g * c)

    return _record(out, (a,), bwd)


def neg(a) -> Tensor:
    return scale(a, -1.0)


def matmul(a, b) -> Tensor:
    """2D @ 2D or batched with identical leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != b.data.ndim or (a.data.ndim > 2 and a.data.shape[:-2] != b.data.shape[:-2]):
        raise ContractError(f"matmul rank/batch mismatch {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ContractError(f"matmul inner dim mismatch {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def bwd(g):
        _accum(a, g @ b.data.swapaxes(-1, -2))
        _accum(b, a.data.swapaxes(-1, -2) @ g)

    return _record(out, (a, b), bwd)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    inv = np.argsort(axes)
    out = a.data.transpose(axes)

    def bwd(g):
        _accum(a, g.transpose(inv))

    return _record(out, (a,), bwd)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    old = a.data.shape
    out = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(old))

    return _record(out, (a,), bwd)


def concat(parts, axis: int = -1) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.data.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for p, piece in zip(parts, np.split(g, splits, axis=axis)):
            _accum(p, piece)

    return _record(out, tuple(parts), bwd)


def narrow(a, axis: int, start: int, length: int) -> Tensor:
    """Contiguous slice along one axis; backward zero-pads."""
    a = as_tensor(a)
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)
    out = a.data[sl]

    def bwd(g):
        full = np.zeros(a.data.shape, a.data.dtype)
        full[sl] = g
        _accum(a, full)

    return _record(out, (a,), bwd)


def select(a, index: int, axis: int = 0) -> Tensor:
    """Single-index selection along an axis (drops the axis)."""
    a = as_tensor(a)
    sl = [slice(None)] * a.data.ndim
    sl[axis] = index
    sl = tuple(sl)
    out = a.data[sl]

    def bwd(g):
        full = np.zeros(a.data.shape, a.data.dtype)
        full[sl] = g
        _accum(a, full)

    return _record(out, (a,), bwd)


# -- nonlinearities ---------------------------------------------------------------


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    out = np.where(mask, a.data, 0)

    def bwd(g):
        _accum(a, g * mask)

    return _record(out, (a,), bwd)


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = 1.0 / (1.0 + np.exp(-a.data))

    def bwd(g):
        _accum(a, g * out * (1.0 - out))

    return _record(out, (a,), bwd)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def bwd(g):
        _accum(a, g * out)

    return _record(out, (a,), bwd)


def log(a) -> Tensor:
    a = as_tensor(a)
    out = np.log(a.data)

    def bwd(g):
        _accum(a, g / a.data)

    return _record(out, (a,), bwd)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=axis, keepdims=keepdims)
    shape = a.data.shape

    def bwd(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, shape).astype(a.data.dtype, copy=True))
            return
        gg = g
        if not keepdims:
            gg = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(gg, shape).astype(a.data.dtype, copy=True))

    return _record(out, (a,), bwd)


def mean_all(a) -> Tensor:
    a = as_tensor(a)
    return scale(reduce_sum(a), 1.0 / a.data.size)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    mx = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - mx
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def bwd(g):
        _accum(a, g - soft * g.sum(axis=axis, keepdims=True))

    return _record(out, (a,), bwd)


# -- gather / segment machinery ------------------------------------------------------


@dataclass
class ScatterPlan:
    """Precomputed index plan mapping a flat axis of length len(idx) into
    out_size slots.  Built once per batched graph and reused every layer."""

    idx: np.ndarray
    out_size: int
    order: np.ndarray
    starts: np.ndarray
    targets: np.ndarray


def make_plan(idx: np.ndarray, out_size: int) -> ScatterPlan:
    idx = np.asarray(idx, dtype=np.int64)
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    targets, starts = np.unique(sorted_idx, return_index=True)
    return ScatterPlan(idx=idx, out_size=int(out_size), order=order,
                       starts=starts, targets=targets)


def scatter_add_np(x: np.ndarray, plan: ScatterPlan, axis: int) -> np.ndarray:
    """Sum rows of x (along axis, length len(idx)) into out_size slots."""
    xs = np.take(x, plan.order, axis=axis)
    if len(plan.starts):
        sums = np.add.reduceat(xs, plan.starts, axis=axis)
    else:
        sums = None
    shape = list(x.shape)
    shape[axis] = plan.out_size
    out = np.zeros(shape, dtype=x.dtype)
    if sums is not None:
        sl = [slice(None)] * x.ndim
        sl[axis] = plan.targets
        out[tuple(sl)] = sums
    return out


def gather(a, idx, axis: int = 0, plan: ScatterPlan | None = None) -> Tensor:
    """Row gather along an axis; backward scatter-adds (fast when plan given)."""
    a = as_tensor(a)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.take(a.data, idx, axis=axis)

    def bwd(g):
        if not a.requires_grad:
            return
        if plan is not None:
            _accum(a, scatter_add_np(g, plan, axis))
        else:
            full = np.zeros(a.data.shape, a.data.dtype)
            sl = [slice(None)] * a.data.ndim
            sl[axis] = idx
            np.add.at(full, tuple(sl), g)
            _accum(a, full)

    return _record(out, (a,), bwd)


def segment_sum(a, plan: ScatterPlan, axis: int = 0) -> Tensor:
    """Sum slices of a (length len(plan.idx) along axis) into plan.out_size slots."""
    a = as_tensor(a)
    out = scatter_add_np(a.data, plan, axis)

    def bwd(g):
        _accum(a, np.take(g, plan.idx, axis=axis))

    return _record(out, (a,), bwd)


def segment_log_softmax(a, starts: np.ndarray, counts: np.ndarray) -> Tensor:
    """Log-softmax over contiguous segments of a 1-D score vector."""
    a = as_tensor(a)
    x = a.data
    if x.ndim != 1:
        raise ContractError("segment_log_softmax expects a flat score vector")
    mx = np.maximum.reduceat(x, starts)
    xc = x - np.repeat(mx, counts)
    ex = np.exp(xc)
    sums = np.add.reduceat(ex, starts)
    out = xc - np.repeat(np.log(sums), counts)
    soft = ex / np.repeat(sums, counts)

    def bwd(g):
        seg_g = np.add.reduceat(g, starts)
        _accum(a, g - soft * np.repeat(seg_g, counts))

    return _record(out, (a,), bwd)
