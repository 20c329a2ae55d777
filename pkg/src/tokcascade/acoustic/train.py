"""Desk-scale training loop for the acoustic stage.

Each step draws a batch of utterances, splits off the leading 25-50% of
every utterance as its prompt, and trains on the remainder.  Per item one
level is chosen: with probability `coarse_prob` the coarse level is masked
at an arccos-uniform ratio (matching the cosine inference schedule) with
the fine level fully masked, mirroring the coarse decoding phase;
otherwise the coarse level stays fully visible and only the fine level is
masked, mirroring the final fine pass.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..numerics import Adam, Graph, mean_all, stack_scalars, zero_grads
from ..toyworld import ToySpec, Utterance
from .masking import MaskPattern, sample_group_mask
from .model import AcousticPrompt, GroupedMaskedLM, masked_token_loss


@dataclass
class AcousticTrainConfig:
    steps: int = 2500
    batch_size: int = 16
    lr: float = 1.5e-3
    seed: int = 0
    dim: int = 128
    heads: int = 4
    blocks: int = 4
    prompt_blocks: int = 2
    conv_kernel: int = 7
    coarse_prob: float = 0.7
    prompt_frac: tuple[float, float] = (0.25, 0.5)
    max_target_len: int = 24
    time_budget_s: float = 900.0


def split_prompt(
    u: Utterance, rng: np.random.Generator, frac: tuple[float, float], max_target: int
) -> tuple[AcousticPrompt, list[int], np.ndarray]:
    """Leading slice as prompt, remainder (length capped) as target."""
    total = len(u.semantic)
    cut = int(round(total * rng.uniform(*frac)))
    cut = min(max(cut, 1), total - 1)
    stop = min(total, cut + max_target)
    prompt = AcousticPrompt(u.semantic[:cut], u.acoustic[:cut])
    return prompt, u.semantic[cut:stop], u.acoustic[cut:stop]


def sample_training_mask(
    length: int, rng: np.random.Generator, coarse_prob: float
) -> MaskPattern:
    fine_full = MaskPattern.full(length, "fine")
    if rng.random() < coarse_prob:
        ratio = max(float(np.cos(np.pi * rng.random() / 2.0)), 1.0 / length)
        coarse = sample_group_mask(length, ratio, "coarse", seed=int(rng.integers(2**31)))
        return coarse.union(fine_full)
    return fine_full


def train_acoustic(
    spec: ToySpec,
    utterances: list[Utterance],
    cfg: AcousticTrainConfig,
    log_every: int = 0,
) -> GroupedMaskedLM:
    model = GroupedMaskedLM(
        semantic_vocab=spec.semantic_vocab,
        acoustic_vocab=spec.acoustic_vocab,
        dim=cfg.dim,
        heads=cfg.heads,
        blocks=cfg.blocks,
        prompt_blocks=cfg.prompt_blocks,
        conv_kernel=cfg.conv_kernel,
        seed=cfg.seed,
    )
    params = model.parameters()
    opt = Adam(cfg.lr)
    rng = np.random.default_rng(cfg.seed + 1)
    started = time.perf_counter()
    window = 0.0

    for step in range(cfg.steps):
        batch = [utterances[i] for i in rng.integers(0, len(utterances), cfg.batch_size)]
        zero_grads(params)
        with Graph() as graph:
            losses = []
            for u in batch:
                prompt, sem, grid = split_prompt(u, rng, cfg.prompt_frac, cfg.max_target_len)
                mask = sample_training_mask(len(sem), rng, cfg.coarse_prob)
                logits = model.forward(sem, grid, mask, prompt)
                loss, empty = masked_token_loss(logits, grid, mask)
                if not empty:
                    losses.append(loss)
            total = mean_all(stack_scalars(losses))
        graph.backward(total, params=params)
        opt.step(params)
        window += total.item()
        if log_every and (step + 1) % log_every == 0:
            print(f"acoustic step {step + 1}: loss {window / log_every:.4f}")
            window = 0.0
        if time.perf_counter() - started > cfg.time_budget_s:
            break
    return model
