"""Differentiable operations over Tensor.

The op set is the minimal closure needed by the two token-generation
networks: matmul, add, mul, affine, relu/gelu, layer normalization,
embedding gather, softmax/log-softmax, log-sum-exp (reduction and binary
forms), concatenation, mean-pool, reshaping/gather plumbing, and scaled
dot-product attention built from the above.  All math is float64.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf

from ..errors import ContractError, DimensionError
from .tensor import Tensor, as_tensor, check_matmul_shapes, record

# Large-negative stand-in for log(0); avoids inf arithmetic in gradients.
NEG_INF = -1.0e30


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce gradient g down to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data + b.data)

    def grad_fn(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return record("add", (a, b), out, grad_fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.data * b.data)

    def grad_fn(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return record("mul", (a, b), out, grad_fn)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.data * c)
    return record("scale", (a,), out, lambda g: (g * c,))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; also accepts stacked matrices with equal batch dims."""
    check_matmul_shapes(a.data, b.data)
    out = Tensor(np.matmul(a.data, b.data))

    def grad_fn(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return ga, gb

    return record("matmul", (a, b), out, grad_fn)


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got {a.shape}")
    out = Tensor(a.data.T)
    return record("transpose", (a,), out, lambda g: (g.T,))


def swapaxes(a: Tensor, axis1: int, axis2: int) -> Tensor:
    out = Tensor(np.swapaxes(a.data, axis1, axis2))
    return record("swapaxes", (a,), out, lambda g: (np.swapaxes(g, axis1, axis2),))


def reshape(a: Tensor, shape) -> Tensor:
    src = a.data.shape
    out = Tensor(a.data.reshape(shape))
    return record("reshape", (a,), out, lambda g: (g.reshape(src),))


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ContractError("concat of zero tensors")
    out = Tensor(np.concatenate([t.data for t in ts], axis=axis))
    sizes = [t.data.shape[axis] for t in ts]
    bounds = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record("concat", tuple(ts), out, grad_fn)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b, composed from matmul and add."""
    return add(matmul(x, w), b)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0.0))
    mask = x.data > 0.0
    return record("relu", (x,), out, lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-error-linear unit: x * Phi(x)."""
    cdf = 0.5 * (1.0 + erf(x.data / np.sqrt(2.0)))
    out = Tensor(x.data * cdf)
    pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(2.0 * np.pi)
    return record("gelu", (x,), out, lambda g: (g * (cdf + x.data * pdf),))


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then gain+bias."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(gain.data * xhat + bias.data)

    def grad_fn(g):
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        gx = inv * (dxhat - m1 - xhat * m2)
        ggain = _unbroadcast(g * xhat, gain.data.shape)
        gbias = _unbroadcast(g, bias.data.shape)
        return gx, ggain, gbias

    return record("layer_norm", (x, gain, bias), out, grad_fn)


def gather_rows(table: Tensor, indices) -> Tensor:
    """Axis-0 gather; the embedding lookup and the generic row picker."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise IndexError(f"gather index out of range for axis of {table.data.shape[0]}")
    out = Tensor(table.data[idx])

    def grad_fn(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        return (gt,)

    return record("gather_rows", (table,), out, grad_fn)


def take(x: Tensor, flat_indices) -> Tensor:
    """Gather elements of the flattened tensor; returns a vector."""
    idx = np.asarray(flat_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.data.size):
        raise IndexError(f"flat index out of range for size {x.data.size}")
    out = Tensor(x.data.reshape(-1)[idx])

    def grad_fn(g):
        gx = np.zeros(x.data.size, dtype=np.float64)
        np.add.at(gx, idx, g)
        return (gx.reshape(x.data.shape),)

    return record("take", (x,), out, grad_fn)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    if x.ndim != 2:
        raise DimensionError(f"slice_cols expects a matrix, got {x.shape}")
    out = Tensor(x.data[:, start:stop])

    def grad_fn(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return record("slice_cols", (x,), out, grad_fn)


def softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(y)

    def grad_fn(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        return (y * (g - dot),)

    return record("softmax", (x,), out, grad_fn)


def log_softmax(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    y = z - lse
    out = Tensor(y)

    def grad_fn(g):
        return (g - np.exp(y) * g.sum(axis=-1, keepdims=True),)

    return record("log_softmax", (x,), out, grad_fn)


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    m = x.data.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x.data - m)
    s = e.sum(axis=axis, keepdims=True)
    y = np.log(s) + m
    out_data = y if keepdims else np.squeeze(y, axis=axis)
    out = Tensor(out_data)
    weights = e / s

    def grad_fn(g):
        ge = g if keepdims else np.expand_dims(g, axis=axis)
        return (ge * weights,)

    return record("logsumexp", (x,), out, grad_fn)


def logaddexp(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise log(exp(a) + exp(b)); the lattice recursion primitive."""
    a, b = as_tensor(a), as_tensor(b)
    y = np.logaddexp(a.data, b.data)
    out = Tensor(y)

    def grad_fn(g):
        wa = np.exp(a.data - y)
        wb = np.exp(b.data - y)
        return _unbroadcast(g * wa, a.data.shape), _unbroadcast(g * wb, b.data.shape)

    return record("logaddexp", (a, b), out, grad_fn)


def mean_pool(x: Tensor) -> Tensor:
    """Mean over rows: [n, d] -> [1, d].  Length- and order-invariant."""
    if x.ndim != 2:
        raise DimensionError(f"mean_pool expects a matrix, got {x.shape}")
    n = x.data.shape[0]
    out = Tensor(x.data.mean(axis=0, keepdims=True))

    def grad_fn(g):
        return (np.broadcast_to(g / n, x.data.shape).copy(),)

    return record("mean_pool", (x,), out, grad_fn)


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.asarray(x.data.sum()))
    return record("sum_all", (x,), out, lambda g: (np.broadcast_to(g, x.data.shape).copy(),))


def mean_all(x: Tensor) -> Tensor:
    n = x.data.size
    out = Tensor(np.asarray(x.data.mean()))
    return record(
        "mean_all", (x,), out, lambda g: (np.broadcast_to(g / n, x.data.shape).copy(),)
    )


def stack_scalars(scalars) -> Tensor:
    """Concatenate scalar tensors into a vector (for batch reductions)."""
    return concat([reshape(s, (1,)) for s in scalars], axis=0)


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Per-row negative log softmax probability of the target ids.

    logits: [n, V]; targets: n integer ids.  Returns an [n] vector.
    """
    if logits.ndim != 2:
        raise DimensionError(f"cross_entropy expects [n, V] logits, got {logits.shape}")
    idx = np.asarray(targets, dtype=np.int64)
    n, v = logits.data.shape
    if idx.shape != (n,):
        raise DimensionError(f"expected {n} targets, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= v):
        raise IndexError(f"target id out of range for vocabulary of {v}")
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    rows = np.arange(n)
    out = Tensor(-logp[rows, idx])

    def grad_fn(g):
        grad = np.exp(logp)
        grad[rows, idx] -= 1.0
        return (grad * g[:, None],)

    return record("cross_entropy", (logits,), out, grad_fn)


def softmax_cross_entropy(logits: Tensor, target: int) -> Tensor:
    """Scalar -log softmax(logits)[target] for a single logit vector."""
    if logits.ndim != 1:
        raise DimensionError(f"expected a logit vector, got {logits.shape}")
    nll = cross_entropy(reshape(logits, (1, logits.data.size)), [int(target)])
    return reshape(nll, ())


def attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over stacked heads.

    q, k, v: [heads, n, dh] (or [n, dh] for a single head).  mask, when
    given, is an additive constant (0 or NEG_INF) broadcast onto the
    [.., n_q, n_k] score matrix.
    """
    dh = q.data.shape[-1]
    scores = scale(matmul(q, swapaxes(k, -1, -2)), 1.0 / np.sqrt(dh))
    if mask is not None:
        scores = add(scores, Tensor(mask))
    return matmul(softmax(scores), v)


def causal_mask(n: int) -> np.ndarray:
    """Additive [n, n] mask forbidding attention to later positions."""
    m = np.zeros((n, n))
    m[np.triu_indices(n, k=1)] = NEG_INF
    return m
