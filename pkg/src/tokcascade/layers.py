"""Reusable network building blocks on top of the numerics engine."""
from __future__ import annotations

import numpy as np

from .numerics import (
    Tensor,
    add,
    affine,
    attention,
    gelu,
    layer_norm,
    matmul,
    reshape,
    swapaxes,
)


class Module:
    """Base with recursive named-parameter discovery and state dicts."""

    def param_items(self):
        for key, value in vars(self).items():
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield key, value
            elif isinstance(value, Module):
                for sub, tensor in value.param_items():
                    yield f"{key}.{sub}", tensor
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        for sub, tensor in item.param_items():
                            yield f"{key}.{i}.{sub}", tensor

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.param_items()]

    def named_parameters(self) -> dict[str, Tensor]:
        return dict(self.param_items())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.param_items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.named_parameters()
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise KeyError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, t in own.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise ValueError(
                    f"shape mismatch for {name}: {arr.shape} != {t.data.shape}"
                )
            t.data[...] = arr


def param(rng: np.random.Generator, shape, scale: float) -> Tensor:
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


class Affine(Module):
    def __init__(self, rng, d_in: int, d_out: int):
        self.w = param(rng, (d_in, d_out), 1.0 / np.sqrt(d_in))
        self.b = Tensor(np.zeros(d_out), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return affine(x, self.w, self.b)


class LayerNorm(Module):
    def __init__(self, dim: int):
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias)


class Embedding(Module):
    def __init__(self, rng, vocab: int, dim: int, scale: float = 0.5):
        self.table = param(rng, (vocab, dim), scale)

    def __call__(self, ids) -> Tensor:
        from .numerics import gather_rows

        return gather_rows(self.table, ids)


class MultiHeadAttention(Module):
    """Projections without bias; heads handled via stacked matmuls."""

    def __init__(self, rng, dim: int, heads: int):
        if dim % heads:
            raise ValueError(f"dim {dim} not divisible by {heads} heads")
        self.heads = heads
        self.dim = dim
        self.wq = param(rng, (dim, dim), 1.0 / np.sqrt(dim))
        self.wk = param(rng, (dim, dim), 1.0 / np.sqrt(dim))
        self.wv = param(rng, (dim, dim), 1.0 / np.sqrt(dim))
        self.wo = param(rng, (dim, dim), 1.0 / np.sqrt(dim))

    def split_heads(self, x: Tensor) -> Tensor:
        n = x.data.shape[0]
        return swapaxes(reshape(x, (n, self.heads, self.dim // self.heads)), 0, 1)

    def project_kv(self, context: Tensor) -> tuple[Tensor, Tensor]:
        return (
            self.split_heads(matmul(context, self.wk)),
            self.split_heads(matmul(context, self.wv)),
        )

    def __call__(
        self,
        x: Tensor,
        context: Tensor | None = None,
        kv: tuple[Tensor, Tensor] | None = None,
        mask: np.ndarray | None = None,
    ) -> Tensor:
        n = x.data.shape[0]
        q = self.split_heads(matmul(x, self.wq))
        if kv is None:
            kv = self.project_kv(x if context is None else context)
        out = attention(q, kv[0], kv[1], mask=mask)
        merged = reshape(swapaxes(out, 0, 1), (n, self.dim))
        return matmul(merged, self.wo)


class FeedForward(Module):
    def __init__(self, rng, dim: int, hidden: int | None = None):
        hidden = hidden or 2 * dim
        self.up = Affine(rng, dim, hidden)
        self.down = Affine(rng, hidden, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.down(gelu(self.up(x)))


class TransformerBlock(Module):
    """Pre-norm self-attention + feed-forward with residuals."""

    def __init__(self, rng, dim: int, heads: int):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadAttention(rng, dim, heads)
        self.ln2 = LayerNorm(dim)
        self.ff = FeedForward(rng, dim)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        x = add(x, self.attn(self.ln1(x), mask=mask))
        return add(x, self.ff(self.ln2(x)))


def sinusoidal_positions(n: int, dim: int) -> np.ndarray:
    """Classic fixed sin/cos position table, shape [n, dim]."""
    pos = np.arange(n)[:, None]
    i = np.arange(dim // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((n, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return table
