"""Minimal float64 tensor arithmetic with reverse-mode differentiation."""

from .ops import (
    NEG_INF,
    add,
    affine,
    attention,
    causal_mask,
    concat,
    cross_entropy,
    gather_rows,
    gelu,
    layer_norm,
    log_softmax,
    logaddexp,
    logsumexp,
    matmul,
    mean_all,
    mean_pool,
    mul,
    relu,
    reshape,
    scale,
    slice_cols,
    softmax,
    softmax_cross_entropy,
    stack_scalars,
    sum_all,
    swapaxes,
    take,
    transpose,
)
from .optim import SGD, Adam, OptimConfig, make_optimizer, optimizer_step, zero_grads
from .tensor import Graph, OpRecord, Tensor, active_graph

__all__ = [
    "NEG_INF",
    "SGD",
    "Adam",
    "Graph",
    "OpRecord",
    "OptimConfig",
    "Tensor",
    "active_graph",
    "add",
    "affine",
    "attention",
    "causal_mask",
    "concat",
    "cross_entropy",
    "gather_rows",
    "gelu",
    "layer_norm",
    "log_softmax",
    "logaddexp",
    "logsumexp",
    "make_optimizer",
    "matmul",
    "mean_all",
    "mean_pool",
    "mul",
    "optimizer_step",
    "relu",
    "reshape",
    "scale",
    "slice_cols",
    "softmax",
    "softmax_cross_entropy",
    "stack_scalars",
    "sum_all",
    "swapaxes",
    "take",
    "transpose",
    "zero_grads",
]
