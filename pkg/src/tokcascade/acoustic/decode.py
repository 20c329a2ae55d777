"""Iterative parallel decoding of the acoustic grid.

Coarse tokens for both groups are filled in over a fixed number of
confidence-ordered iterations (the cosine schedule says how many positions
stay masked after each one); fine tokens for both groups are then predicted
in a single final pass.  Total forward passes: coarse iterations + 1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, InputError
from .masking import MaskPattern, schedule_keep_count
from .model import AcousticPrompt, GroupedMaskedLM, PromptCache


@dataclass
class DecodeConfig:
    coarse_iterations: int = 16
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.coarse_iterations < 1:
            raise ConfigError("need at least one coarse iteration")


@dataclass
class DecodeTrace:
    """Per-iteration bookkeeping for structural checks."""

    forward_passes: int = 0
    masked_before: list[int] = field(default_factory=list)
    masked_after: list[int] = field(default_factory=list)
    # per iteration, the masked-position flags each group's coarse slots saw
    group_masks: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    committed_overwritten: bool = False


def _softmax(z: np.ndarray) -> np.ndarray:
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF categorical draw per row; deterministic given rng state."""
    u = rng.random(probs.shape[0])
    cdf = probs.cumsum(axis=-1)
    return (u[:, None] > cdf).sum(axis=-1).clip(max=probs.shape[1] - 1)


def iterative_parallel_decode(
    model: GroupedMaskedLM,
    semantic,
    prompt: AcousticPrompt,
    cfg: DecodeConfig,
    use_cache: bool = True,
    trace: DecodeTrace | None = None,
) -> np.ndarray:
    """Fill the [T, 2, 2] grid from semantic tokens and an acoustic prompt.

    Commitment is joint across groups: a position's two coarse tokens are
    sampled together and their mean probability is the confidence.  The
    sampling temperature anneals linearly to an argmax at the final coarse
    iteration; the fine pass is a plain argmax.  Committed tokens are never
    rewritten.
    """
    sem = np.asarray(semantic, dtype=np.int64)
    if sem.size == 0:
        raise InputError("empty semantic input")
    t_len = sem.size
    n_iter = cfg.coarse_iterations
    rng = np.random.default_rng(cfg.seed)
    source: AcousticPrompt | PromptCache = (
        model.encode_prompt(prompt) if use_cache else prompt
    )

    grid = np.zeros((t_len, 2, 2), dtype=np.int64)
    coarse_masked = np.ones(t_len, dtype=bool)
    committed = np.full((t_len, 2), -1, dtype=np.int64)

    for n in range(1, n_iter + 1):
        mask = MaskPattern(coarse_masked.copy(), np.ones(t_len, bool))
        if trace is not None:
            trace.masked_before.append(int(coarse_masked.sum()))
            # observable per-group open positions; must stay identical
            trace.group_masks.append((committed[:, 0] < 0, committed[:, 1] < 0))
        logits = model.forward(sem, grid, mask, source)
        if trace is not None:
            trace.forward_passes += 1

        open_pos = np.flatnonzero(coarse_masked)
        if open_pos.size:
            if n == n_iter:
                temp = 0.0
            else:
                temp = cfg.temperature * (1.0 - (n - 1) / max(n_iter - 1, 1))
            picks = np.empty((open_pos.size, 2), dtype=np.int64)
            confidence = np.zeros(open_pos.size)
            for group in range(2):
                slot = 2 * group  # coarse depth of this group
                raw = logits[slot].data[open_pos]
                probs = _softmax(raw)
                if temp <= 1e-9:
                    chosen = raw.argmax(axis=-1)
                else:
                    chosen = _sample_rows(_softmax(raw / temp), rng)
                picks[:, group] = chosen
                confidence += probs[np.arange(open_pos.size), chosen]
            confidence /= 2.0

            keep = schedule_keep_count(n, n_iter, t_len)
            keep = min(keep, open_pos.size - 1) if open_pos.size > 1 else 0
            commit_count = open_pos.size - keep
            order = np.argsort(-confidence, kind="stable")
            chosen_rows = order[:commit_count]
            pos = open_pos[chosen_rows]
            grid[pos, 0, 0] = picks[chosen_rows, 0]
            grid[pos, 1, 0] = picks[chosen_rows, 1]
            committed[pos, 0] = picks[chosen_rows, 0]
            committed[pos, 1] = picks[chosen_rows, 1]
            coarse_masked[pos] = False

        if trace is not None:
            trace.masked_after.append(int(coarse_masked.sum()))
            done = committed[:, 0] >= 0
            if not (
                np.array_equal(grid[done, 0, 0], committed[done, 0])
                and np.array_equal(grid[done, 1, 0], committed[done, 1])
            ):
                trace.committed_overwritten = True

    # final pass: all fine tokens at once, coarse fully visible
    mask = MaskPattern(np.zeros(t_len, bool), np.ones(t_len, bool))
    logits = model.forward(sem, grid, mask, source)
    if trace is not None:
        trace.forward_passes += 1
    for group in range(2):
        slot = 2 * group + 1
        grid[:, group, 1] = logits[slot].data.argmax(axis=-1)
    return grid
