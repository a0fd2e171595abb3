"""Minimal dense numeric core: tape autodiff, MLPs, Adam, Jacobi eigensolver."""

from .tape import (  # noqa: F401
    ScatterPlan,
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    concat,
    constant,
    exp,
    gather,
    log,
    log_softmax,
    make_plan,
    matmul,
    mean_all,
    mul,
    narrow,
    neg,
    no_grad,
    param,
    reduce_sum,
    relu,
    reshape,
    scale,
    scatter_add_np,
    segment_log_softmax,
    segment_sum,
    select,
    sigmoid,
    sub,
    transpose,
)
from .fastops import attn_scores, edge_attn_messages, head_linear, per_net_matmul  # noqa: F401
from .nn import MLP, AdamState, adam_step, xavier_uniform, zero_grads  # noqa: F401
from .eigh import symmetric_eigh  # noqa: F401
from .checkpoint import load_checkpoint, save_checkpoint, validate_shapes  # noqa: F401
