"""Grouped masked language model over the acoustic token grid.

The generator is a stack of bidirectional blocks (self-attention, cross
attention to the prompt, depthwise convolution, feed-forward).  The prompt
runs through its own smaller stack once; its per-layer key/value
projections can be cached and reused across decoding iterations.  Four
output heads, one per (group, depth) slot, emit logits over the acoustic
vocabulary.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..layers import (
    Affine,
    Embedding,
    FeedForward,
    LayerNorm,
    Module,
    MultiHeadAttention,
    param,
    sinusoidal_positions,
)
from ..numerics import (
    Tensor,
    add,
    concat,
    cross_entropy,
    gather_rows,
    mean_all,
    mul,
)
from .masking import MaskPattern


@dataclass
class AcousticPrompt:
    """Prompt utterance as tokens: semantic ids plus the [T, 2, 2] grid."""

    semantic: list[int]
    acoustic: np.ndarray

    def __post_init__(self):
        self.acoustic = np.asarray(self.acoustic, dtype=np.int64)
        if len(self.semantic) == 0:
            raise InputError("empty acoustic prompt")
        if self.acoustic.shape != (len(self.semantic), 2, 2):
            raise InputError(
                f"prompt grid {self.acoustic.shape} does not match {len(self.semantic)} tokens"
            )


@dataclass
class PromptCache:
    """Per generator layer, the cross-attention key/value tensors."""

    layers: list[tuple[Tensor, Tensor]]
    length: int


class DepthwiseConv(Module):
    """Per-channel 1-D convolution along time, zero padded."""

    def __init__(self, rng, dim: int, kernel: int):
        self.kernel = kernel
        self.dim = dim
        self.w = param(rng, (kernel, dim), 1.0 / np.sqrt(kernel))
        self.b = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        n = x.data.shape[0]
        half = self.kernel // 2
        zeros = Tensor(np.zeros((half, self.dim)))
        padded = concat([zeros, x, zeros], axis=0)
        acc = None
        for offset in range(self.kernel):
            shifted = gather_rows(padded, np.arange(offset, offset + n))
            term = mul(shifted, gather_rows(self.w, [offset]))
            acc = term if acc is None else add(acc, term)
        return add(acc, self.b)


class GeneratorBlock(Module):
    """Bidirectional conformer-style block, optionally with cross-attention."""

    def __init__(self, rng, dim: int, heads: int, kernel: int, cross: bool):
        self.ln_self = LayerNorm(dim)
        self.self_attn = MultiHeadAttention(rng, dim, heads)
        self.cross_attn = MultiHeadAttention(rng, dim, heads) if cross else None
        self.ln_cross = LayerNorm(dim) if cross else None
        self.ln_conv = LayerNorm(dim)
        self.conv = DepthwiseConv(rng, dim, kernel)
        self.ln_ff = LayerNorm(dim)
        self.ff = FeedForward(rng, dim)

    def __call__(self, x: Tensor, cross_kv: tuple[Tensor, Tensor] | None = None) -> Tensor:
        x = add(x, self.self_attn(self.ln_self(x)))
        if self.cross_attn is not None:
            if cross_kv is None:
                raise InputError("generator block requires prompt key/values")
            x = add(x, self.cross_attn(self.ln_cross(x), kv=cross_kv))
        x = add(x, self.conv(self.ln_conv(x)))
        return add(x, self.ff(self.ln_ff(x)))


class GroupedMaskedLM(Module):
    def __init__(
        self,
        semantic_vocab: int,
        acoustic_vocab: int,
        dim: int = 128,
        heads: int = 4,
        blocks: int = 4,
        prompt_blocks: int = 2,
        conv_kernel: int = 7,
        max_len: int = 512,
        seed: int = 0,
    ):
        rng = np.random.default_rng(seed)
        self.semantic_vocab = semantic_vocab
        self.acoustic_vocab = acoustic_vocab
        self.dim = dim
        self.positions = sinusoidal_positions(max_len, dim)

        self.sem_emb = Embedding(rng, semantic_vocab, dim, scale=0.3)
        # one embedder and one mask vector per (group, depth) slot, slot = 2i + j
        self.slot_emb = [Embedding(rng, acoustic_vocab, dim, scale=0.3) for _ in range(4)]
        self.mask_emb = param(rng, (4, dim), 0.3)

        self.prompt_stack = [
            GeneratorBlock(rng, dim, heads, conv_kernel, cross=False)
            for _ in range(prompt_blocks)
        ]
        self.gen_stack = [
            GeneratorBlock(rng, dim, heads, conv_kernel, cross=True)
            for _ in range(blocks)
        ]
        self.final_ln = LayerNorm(dim)
        self.heads_out = [Affine(rng, dim, acoustic_vocab) for _ in range(4)]

    # -- embeddings ----------------------------------------------------------

    def _embed_grid_slot(self, grid: np.ndarray, slot: int, masked: np.ndarray) -> Tensor:
        """Embedding rows for one (group, depth) slot with masked rows
        replaced by that slot's learned mask vector."""
        i, j = divmod(slot, 2)
        ids = grid[:, i, j].copy()
        ids[masked] = 0  # any valid id; the row is zeroed out below
        rows = self.slot_emb[slot](ids)
        keep = (~masked).astype(np.float64)[:, None]
        fill = masked.astype(np.float64)[:, None]
        masked_rows = mul(gather_rows(self.mask_emb, np.full(len(ids), slot)), Tensor(fill))
        return add(mul(rows, Tensor(keep)), masked_rows)

    def embed_target(self, semantic, grid: np.ndarray, mask: MaskPattern) -> Tensor:
        sem = np.asarray(semantic, dtype=np.int64)
        x = self.sem_emb(sem)
        for slot in range(4):
            j = slot % 2
            x = add(x, self._embed_grid_slot(grid, slot, mask.level(j)))
        return add(x, Tensor(self.positions[: sem.size]))

    def embed_prompt(self, prompt: AcousticPrompt) -> Tensor:
        sem = np.asarray(prompt.semantic, dtype=np.int64)
        x = self.sem_emb(sem)
        none = np.zeros(sem.size, dtype=bool)
        for slot in range(4):
            x = add(x, self._embed_grid_slot(prompt.acoustic, slot, none))
        return add(x, Tensor(self.positions[: sem.size]))

    # -- prompt network ------------------------------------------------------

    def prompt_states(self, prompt: AcousticPrompt) -> Tensor:
        x = self.embed_prompt(prompt)
        for block in self.prompt_stack:
            x = block(x)
        return x

    def encode_prompt(self, prompt: AcousticPrompt) -> PromptCache:
        """Run the prompt stack once and project per-layer keys/values."""
        states = self.prompt_states(prompt)
        layers = [blk.cross_attn.project_kv(states) for blk in self.gen_stack]
        return PromptCache(layers=layers, length=len(prompt.semantic))

    # -- generator -----------------------------------------------------------

    def forward(
        self,
        semantic,
        grid: np.ndarray,
        mask: MaskPattern,
        prompt: AcousticPrompt | PromptCache,
    ) -> list[Tensor]:
        """Logits per (group, depth) slot, each [T, acoustic_vocab].

        Passing an AcousticPrompt recomputes the prompt network in full;
        passing a PromptCache reuses the cached key/value projections.
        """
        sem = np.asarray(semantic, dtype=np.int64)
        if sem.size == 0:
            raise InputError("empty semantic input")
        if grid.shape != (sem.size, 2, 2):
            raise InputError(f"grid {grid.shape} does not match {sem.size} positions")
        if mask.length != sem.size:
            raise InputError("mask length does not match input")
        if isinstance(prompt, PromptCache):
            kv_layers = prompt.layers
        else:
            states = self.prompt_states(prompt)
            kv_layers = [blk.cross_attn.project_kv(states) for blk in self.gen_stack]

        x = self.embed_target(sem, grid, mask)
        for block, kv in zip(self.gen_stack, kv_layers):
            x = block(x, cross_kv=kv)
        x = self.final_ln(x)
        return [head(x) for head in self.heads_out]


def masked_token_loss(
    logits: list[Tensor], grid: np.ndarray, mask: MaskPattern
) -> tuple[Tensor, bool]:
    """Mean negative log-likelihood over the masked cells only.

    Returns (loss, empty) where empty flags a mask with nothing selected;
    the loss is then exactly zero.
    """
    parts = []
    for slot in range(4):
        i, j = divmod(slot, 2)
        rows = np.flatnonzero(mask.level(j))
        if rows.size == 0:
            continue
        selected = gather_rows(logits[slot], rows)
        parts.append(cross_entropy(selected, grid[rows, i, j]))
    if not parts:
        return Tensor(0.0), True
    return mean_all(concat(parts)), False
