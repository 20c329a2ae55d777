"""Text-to-semantic transducer network.

Four submodules: a self-attention text encoder, a reference encoder that
pools the semantic prompt into one conditioning vector, an autoregressive
prediction network over emitted tokens, and a joint network that fuses one
text state with one prediction state into logits over the semantic
vocabulary plus the blank symbol (blank is the last index).

Two wiring variants exist for benchmarking:

  * compact: one feed-forward block in the joint, reference vector added to
    every prediction-network input embedding;
  * baseline: three feed-forward blocks in the joint, reference vector
    injected into the joint combine instead of the prediction network.

The reference encoder embeds adjacent token *pairs* and mean-pools them.
Pooling stays length-invariant (a constant prompt gives the same vector at
any length), while the pair table exposes run structure, which is the only
place speaking-rate information lives in a token prompt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InputError
from ..layers import (
    Affine,
    Embedding,
    FeedForward,
    Module,
    TransformerBlock,
    sinusoidal_positions,
)
from ..numerics import (
    Tensor,
    add,
    causal_mask,
    concat,
    gather_rows,
    gelu,
    mean_pool,
)


@dataclass(frozen=True)
class TransducerVariant:
    name: str
    ff_blocks: int
    ref_in_prediction: bool


COMPACT = TransducerVariant(name="compact", ff_blocks=1, ref_in_prediction=True)
BASELINE = TransducerVariant(name="baseline", ff_blocks=3, ref_in_prediction=False)


class JointNetwork(Module):
    def __init__(self, rng, dim: int, out_size: int, ff_blocks: int, use_ref: bool):
        self.use_ref = use_ref
        self.from_text = Affine(rng, dim, dim)
        self.from_pred = Affine(rng, dim, dim)
        self.from_ref = Affine(rng, dim, dim) if use_ref else None
        self.blocks = [FeedForward(rng, dim) for _ in range(ff_blocks)]
        self.out = Affine(rng, dim, out_size)

    def __call__(self, h: Tensor, g: Tensor, ref_term: Tensor | None) -> Tensor:
        z = add(self.from_text(h), self.from_pred(g))
        if self.use_ref:
            z = add(z, ref_term)
        z = gelu(z)
        for block in self.blocks:
            z = add(z, block(z))
        return self.out(z)


class TransducerModel(Module):
    def __init__(
        self,
        text_vocab: int,
        semantic_vocab: int,
        dim: int = 64,
        heads: int = 2,
        text_blocks: int = 2,
        pred_blocks: int = 2,
        variant: TransducerVariant = COMPACT,
        max_len: int = 512,
        seed: int = 0,
    ):
        rng = np.random.default_rng(seed)
        self.text_vocab = text_vocab
        self.semantic_vocab = semantic_vocab
        self.blank_id = semantic_vocab
        self.dim = dim
        self.variant = variant
        self.positions = sinusoidal_positions(max_len, dim)

        self.text_emb = Embedding(rng, text_vocab, dim)
        self.text_stack = [TransformerBlock(rng, dim, heads) for _ in range(text_blocks)]

        self.pair_emb = Embedding(rng, semantic_vocab * semantic_vocab, dim, scale=0.2)
        self.ref_proj = Affine(rng, dim, dim)

        self.token_emb = Embedding(rng, semantic_vocab, dim)
        self.start_emb = Tensor(rng.normal(0.0, 0.5, size=(1, dim)), requires_grad=True)
        self.pred_stack = [TransformerBlock(rng, dim, heads) for _ in range(pred_blocks)]

        self.joint = JointNetwork(
            rng, dim, semantic_vocab + 1, variant.ff_blocks, use_ref=not variant.ref_in_prediction
        )

    # -- encoders -----------------------------------------------------------

    def encode_text(self, text_ids) -> Tensor:
        ids = np.asarray(text_ids, dtype=np.int64)
        if ids.size == 0:
            raise InputError("empty text")
        x = add(self.text_emb(ids), Tensor(self.positions[: ids.size]))
        for block in self.text_stack:
            x = block(x)
        return x

    def encode_reference(self, prompt_tokens) -> Tensor:
        toks = np.asarray(prompt_tokens, dtype=np.int64)
        if toks.size == 0:
            raise InputError("empty semantic prompt")
        prev = np.concatenate([toks[:1], toks[:-1]])
        pair_ids = prev * self.semantic_vocab + toks
        return self.ref_proj(mean_pool(self.pair_emb(pair_ids)))

    # -- prediction network -------------------------------------------------

    def prediction_states(self, tokens, ref: Tensor) -> Tensor:
        """States for all prefixes: row u conditions on tokens[:u]."""
        toks = np.asarray(tokens, dtype=np.int64)
        if toks.size:
            rows = concat([self.start_emb, self.token_emb(toks)], axis=0)
        else:
            rows = self.start_emb
        if self.variant.ref_in_prediction:
            rows = add(rows, ref)
        n = toks.size + 1
        x = add(rows, Tensor(self.positions[:n]))
        mask = causal_mask(n)
        for block in self.pred_stack:
            x = block(x, mask=mask)
        return x

    def prediction_step(self, prefix, ref: Tensor) -> Tensor:
        """State after consuming the whole prefix (one row)."""
        states = self.prediction_states(prefix, ref)
        return gather_rows(states, [len(list(prefix))])

    # -- joint network ------------------------------------------------------

    def ref_term(self, ref: Tensor) -> Tensor | None:
        """Precompute the joint-side reference projection (baseline only)."""
        if self.joint.use_ref:
            return self.joint.from_ref(ref)
        return None

    def joint_logits(self, h: Tensor, g: Tensor, ref: Tensor | None = None,
                     ref_term: Tensor | None = None) -> Tensor:
        """Logits over semantic_vocab + 1; blank occupies the last slot."""
        if self.joint.use_ref and ref_term is None:
            if ref is None:
                raise InputError("this variant requires the reference embedding")
            ref_term = self.joint.from_ref(ref)
        return self.joint(h, g, ref_term)

    def joint_flops(self) -> int:
        """Static multiply count of one joint evaluation at batch 1."""
        d = self.dim
        combine = 2 * d * d + (d * d if self.joint.use_ref else 0)
        blocks = len(self.joint.blocks) * (2 * d * (2 * d))
        out = d * (self.semantic_vocab + 1)
        return 2 * (combine + blocks + out)
