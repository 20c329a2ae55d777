"""Desk-scale training loop for the transducer stage."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..numerics import Adam, Graph, mean_all, stack_scalars, zero_grads
from ..toyworld import ToySpec, Utterance, generate_utterance, random_text, text_to_ids
from .lattice import transducer_loss
from .model import COMPACT, TransducerModel, TransducerVariant


@dataclass
class TransducerTrainConfig:
    epochs: int = 30
    batch_size: int = 16
    lr: float = 2e-3
    seed: int = 0
    dim: int = 64
    heads: int = 2
    text_blocks: int = 2
    pred_blocks: int = 2
    time_budget_s: float = 600.0  # hard stop; desk scale trains well inside it


def sample_prompt(spec: ToySpec, rate: int, pitch: int, rng: np.random.Generator) -> list[int]:
    """Semantic prompt from a fresh utterance sharing (rate, pitch)."""
    text = random_text(spec, rng, 3, 8)
    speaker = int(rng.integers(spec.speakers))
    return generate_utterance(spec, text, rate, pitch, speaker).semantic


def train_transducer(
    spec: ToySpec,
    utterances: list[Utterance],
    cfg: TransducerTrainConfig,
    variant: TransducerVariant = COMPACT,
    log_every: int = 0,
) -> TransducerModel:
    model = TransducerModel(
        text_vocab=spec.phonemes,
        semantic_vocab=spec.semantic_vocab,
        dim=cfg.dim,
        heads=cfg.heads,
        text_blocks=cfg.text_blocks,
        pred_blocks=cfg.pred_blocks,
        variant=variant,
        seed=cfg.seed,
    )
    params = model.parameters()
    opt = Adam(cfg.lr)
    rng = np.random.default_rng(cfg.seed + 1)
    started = time.perf_counter()

    text_cache = {u.uid: text_to_ids(spec, u.text) for u in utterances}
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(utterances))
        epoch_loss = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = [utterances[i] for i in order[lo : lo + cfg.batch_size]]
            zero_grads(params)
            with Graph() as graph:
                losses = [
                    transducer_loss(
                        model,
                        text_cache[u.uid],
                        u.semantic,
                        sample_prompt(spec, u.rate, u.pitch, rng),
                    )
                    for u in batch
                ]
                loss = mean_all(stack_scalars(losses))
            graph.backward(loss, params=params)
            opt.step(params)
            epoch_loss += loss.item() * len(batch)
        if log_every and (epoch + 1) % log_every == 0:
            mean = epoch_loss / len(utterances)
            print(f"transducer epoch {epoch + 1}: loss/utt {mean:.4f}")
        if time.perf_counter() - started > cfg.time_budget_s:
            break
    return model
