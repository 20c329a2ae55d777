"""Greedy lattice decoding for the transducer."""
from __future__ import annotations

import numpy as np

from ..errors import InputError
from ..numerics import Tensor, gather_rows
from .model import TransducerModel


def greedy_decode(
    model: TransducerModel,
    text_ids,
    prompt,
    max_symbols_per_frame: int = 8,
) -> list[int]:
    """Argmax walk over the lattice.

    Blank advances the text frame; an emitted token is appended and the
    prediction state recomputed.  Once a frame has emitted the cap, the
    blank is forced, so decoding always terminates after N blank steps and
    never outputs the blank id.
    """
    ids = np.asarray(text_ids, dtype=np.int64)
    if ids.size == 0:
        raise InputError("empty text")
    if max_symbols_per_frame < 1:
        raise InputError("emission cap must be at least 1")

    h_all = model.encode_text(ids)
    ref = model.encode_reference(prompt)
    ref_term = model.ref_term(ref)
    tokens: list[int] = []
    g = model.prediction_step(tokens, ref)

    t = 0
    run = 0
    n = ids.size
    while t < n:
        if run >= max_symbols_per_frame:
            t += 1
            run = 0
            continue
        h = gather_rows(h_all, [t])
        logits = model.joint_logits(h, g, ref_term=ref_term).data[0]
        choice = int(logits.argmax())
        if choice == model.blank_id:
            t += 1
            run = 0
        else:
            tokens.append(choice)
            run += 1
            g = model.prediction_step(tokens, ref)
    return tokens
