"""Monotonic alignment lattice: marginal likelihood and its oracles.

States are (t, u): text frame t in 0..N-1 currently active, u tokens
emitted so far.  From (t, u) an emit step consumes token u (moving to
(t, u+1)) and a blank step advances to frame t+1; the utterance ends with
the blank taken at the final frame in state (N-1, T).  Every complete path
therefore has T emits and N blanks, C(N-1+T, T) paths in total.

The dynamic program runs over anti-diagonals and is built entirely from
differentiable ops (gather / add / logaddexp), so the loss backpropagates
through the generic reverse sweep with no bespoke kernel.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from ..errors import SizeError
from ..numerics import (
    NEG_INF,
    Tensor,
    add,
    concat,
    gather_rows,
    log_softmax,
    logaddexp,
    reshape,
    scale,
    take,
)
from .model import TransducerModel

ENUMERATION_LIMIT = 12  # max N + T the path oracle will enumerate


@dataclass(frozen=True)
class AlignmentPath:
    """Sequence of steps; an int emits that token, None is a blank."""

    steps: tuple

    def blanks(self) -> int:
        return sum(1 for s in self.steps if s is None)


def remove_blanks(path: AlignmentPath) -> list[int]:
    """Emitted tokens in order; the inverse image of this map defines the
    marginalization set of the loss."""
    return [s for s in path.steps if s is not None]


def path_from_frames(frames, n_frames: int, tokens) -> AlignmentPath:
    """Build the step sequence for an assignment of tokens to frames."""
    steps: list = []
    by_frame: dict[int, list[int]] = {}
    for u, f in enumerate(frames):
        by_frame.setdefault(f, []).append(tokens[u])
    for t in range(n_frames):
        steps.extend(by_frame.get(t, []))
        steps.append(None)
    return AlignmentPath(steps=tuple(steps))


def _node_log_probs(
    model: TransducerModel, text_ids, tokens, prompt
) -> tuple[np.ndarray | Tensor, int, int]:
    """Log-softmax joint outputs for every lattice node, flat over (t, u)."""
    toks = np.asarray(tokens, dtype=np.int64)
    if toks.size and (toks.min() < 0 or toks.max() >= model.semantic_vocab):
        raise IndexError("semantic token id out of range")
    h = model.encode_text(text_ids)
    ref = model.encode_reference(prompt)
    g = model.prediction_states(toks, ref)
    n = h.data.shape[0]
    t_count = toks.size
    h_idx = np.repeat(np.arange(n), t_count + 1)
    g_idx = np.tile(np.arange(t_count + 1), n)
    logits = model.joint_logits(
        gather_rows(h, h_idx), gather_rows(g, g_idx), ref=ref
    )
    return log_softmax(logits), n, t_count


def transducer_loss(model: TransducerModel, text_ids, tokens, prompt) -> Tensor:
    """Negative log marginal probability of the token sequence.

    Forward recursion over anti-diagonals:
        alpha(t, u) = logaddexp(alpha(t-1, u) + blank(t-1, u),
                                alpha(t, u-1) + emit(t, u-1))
    with alpha(0, 0) = 0 and loss = -(alpha(N-1, T) + blank(N-1, T)).
    """
    logp, n, t_count = _node_log_probs(model, text_ids, tokens, prompt)
    toks = np.asarray(tokens, dtype=np.int64)
    vocab = model.semantic_vocab + 1
    cols = t_count + 1

    def flat(t, u):
        return t * cols + u

    # blank log-prob at every node; emit log-prob of token u at (t, u)
    node = np.arange(n * cols)
    blank_flat = node * vocab + model.blank_id
    lp_blank = take(logp, blank_flat)
    if t_count:
        t_grid = np.repeat(np.arange(n), t_count)
        u_grid = np.tile(np.arange(t_count), n)
        emit_flat = (t_grid * cols + u_grid) * vocab + toks[u_grid]
        lp_emit = take(logp, emit_flat)  # flat over (t, u) with u < T
    else:
        lp_emit = None

    pad = Tensor([NEG_INF])
    alpha = Tensor([0.0])  # diagonal 0 holds only (0, 0)
    for d in range(n - 1 + t_count):
        a = max(0, d - t_count)
        b = min(n - 1, d)
        a2 = max(0, d + 1 - t_count)
        b2 = min(n - 1, d + 1)

        # blank arrivals into (t, d+1-t) come from (t-1, d-t+1); valid t-1 in [a, b]
        blo, bhi = max(a2, 1), b2
        if blo <= bhi:
            ts = np.arange(blo, bhi + 1)
            src = take(alpha, ts - 1 - a)
            lp = take(lp_blank, flat(ts - 1, d + 1 - ts))
            blank_branch = add(src, lp)
            if blo > a2:  # head cell t = 0 has no blank predecessor
                blank_branch = concat([pad, blank_branch])
        else:
            blank_branch = None

        # emit arrivals into (t, d+1-t) come from (t, d-t); valid t in [a, b]
        elo, ehi = a2, min(b2, b)
        if elo <= ehi and t_count:
            ts = np.arange(elo, ehi + 1)
            src = take(alpha, ts - a)
            lp = take(lp_emit, ts * t_count + (d - ts))
            emit_branch = add(src, lp)
            if ehi < b2:  # tail cell u = 0 has no emit predecessor
                emit_branch = concat([emit_branch, pad])
        else:
            emit_branch = None

        width = b2 - a2 + 1
        if blank_branch is None:
            blank_branch = Tensor(np.full(width, NEG_INF))
        if emit_branch is None:
            emit_branch = Tensor(np.full(width, NEG_INF))
        alpha = logaddexp(blank_branch, emit_branch)

    final = add(alpha, take(lp_blank, [flat(n - 1, t_count)]))
    return scale(reshape(final, ()), -1.0)


def brute_force_loss(
    model: TransducerModel,
    text_ids,
    tokens,
    prompt,
    max_symbols_per_frame: int | None = None,
) -> float:
    """Loss by explicit enumeration of every monotonic path.

    With a per-frame emission cap the probability model forces a blank
    (probability one) once a frame has emitted `cap` tokens, which makes
    the total mass over all reachable sequences exactly one.
    """
    toks = list(int(v) for v in tokens)
    n = len(np.asarray(text_ids))
    t_count = len(toks)
    if n + t_count > ENUMERATION_LIMIT:
        raise SizeError(f"instance too large to enumerate: N+T = {n + t_count}")
    logp, _, _ = _node_log_probs(model, text_ids, toks, prompt)
    lp = logp.data.reshape(n, t_count + 1, model.semantic_vocab + 1)
    cap = max_symbols_per_frame

    path_logs = []
    for frames in combinations_with_replacement(range(n), t_count):
        counts = np.bincount(frames, minlength=n)
        if cap is not None and counts.max(initial=0) > cap:
            continue
        total = 0.0
        emitted = 0
        for t in range(n):
            for _ in range(counts[t]):
                total += lp[t, emitted, toks[emitted]]
                emitted += 1
            if cap is not None and counts[t] == cap:
                total += 0.0  # forced blank, probability one
            else:
                total += lp[t, emitted, model.blank_id]
        path_logs.append(total)
    if not path_logs:
        return float("inf")
    m = max(path_logs)
    return float(-(m + np.log(np.exp(np.asarray(path_logs) - m).sum())))


def enumerate_alignment_paths(n_frames: int, tokens) -> list[AlignmentPath]:
    """All monotonic paths whose blank removal equals `tokens`."""
    toks = list(tokens)
    if n_frames + len(toks) > ENUMERATION_LIMIT:
        raise SizeError("instance too large to enumerate")
    return [
        path_from_frames(frames, n_frames, toks)
        for frames in combinations_with_replacement(range(n_frames), len(toks))
    ]


def path_count(n_frames: int, n_tokens: int) -> int:
    return comb(n_frames - 1 + n_tokens, n_tokens)


def uniform_logit_loss(n_frames: int, n_tokens: int, vocab_with_blank: int) -> float:
    """Closed form when every node distribution is uniform."""
    return (n_frames + n_tokens) * np.log(vocab_with_blank) - np.log(
        path_count(n_frames, n_tokens)
    )
