"""End-to-end plumbing: checkpoint round-trips, prompt pairing, synthesis,
and the evaluation routines used by both the CLI and the acceptance suite.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .acoustic import (
    AcousticPrompt,
    AcousticTrainConfig,
    DecodeConfig,
    GroupedMaskedLM,
    iterative_parallel_decode,
)
from .checkpoint import load_checkpoint, pack_states, save_checkpoint, unpack_states
from .errors import CheckpointFormatError, InputError
from .evalbench import speaker_accuracy, token_error_rate
from .toyworld import (
    ToySpec,
    Utterance,
    generate_utterance,
    invert_semantic,
    random_text,
    text_to_ids,
)
from .transducer import (
    BASELINE,
    COMPACT,
    TransducerModel,
    TransducerTrainConfig,
    TransducerVariant,
    greedy_decode,
    transducer_loss,
)

VARIANTS = {v.name: v for v in (COMPACT, BASELINE)}


def build_transducer(
    spec: ToySpec, cfg: TransducerTrainConfig, variant: TransducerVariant
) -> TransducerModel:
    return TransducerModel(
        text_vocab=spec.phonemes,
        semantic_vocab=spec.semantic_vocab,
        dim=cfg.dim,
        heads=cfg.heads,
        text_blocks=cfg.text_blocks,
        pred_blocks=cfg.pred_blocks,
        variant=variant,
        seed=cfg.seed,
    )


def build_acoustic(spec: ToySpec, cfg: AcousticTrainConfig) -> GroupedMaskedLM:
    return GroupedMaskedLM(
        semantic_vocab=spec.semantic_vocab,
        acoustic_vocab=spec.acoustic_vocab,
        dim=cfg.dim,
        heads=cfg.heads,
        blocks=cfg.blocks,
        prompt_blocks=cfg.prompt_blocks,
        conv_kernel=cfg.conv_kernel,
        seed=cfg.seed,
    )


def save_transducer_checkpoint(path: str | Path, model: TransducerModel) -> None:
    meta = {"variant_ff_blocks": np.asarray(float(model.variant.ff_blocks)),
            "variant_ref_in_prediction": np.asarray(float(model.variant.ref_in_prediction))}
    save_checkpoint(path, pack_states(transducer=model.state_dict(), meta=meta))


def load_transducer_checkpoint(
    path: str | Path, spec: ToySpec, cfg: TransducerTrainConfig
) -> TransducerModel:
    groups = unpack_states(load_checkpoint(path))
    if "transducer" not in groups:
        raise CheckpointFormatError("checkpoint holds no transducer tensors")
    meta = groups.get("meta", {})
    ff_blocks = int(meta.get("variant_ff_blocks", np.asarray(1.0)))
    ref_in_pred = bool(float(meta.get("variant_ref_in_prediction", np.asarray(1.0))))
    variant = next(
        (v for v in VARIANTS.values()
         if v.ff_blocks == ff_blocks and v.ref_in_prediction == ref_in_pred),
        TransducerVariant("custom", ff_blocks, ref_in_pred),
    )
    model = build_transducer(spec, cfg, variant)
    model.load_state_dict(groups["transducer"])
    return model


def save_acoustic_checkpoint(path: str | Path, model: GroupedMaskedLM) -> None:
    save_checkpoint(path, pack_states(acoustic=model.state_dict()))


def load_acoustic_checkpoint(
    path: str | Path, spec: ToySpec, cfg: AcousticTrainConfig
) -> GroupedMaskedLM:
    groups = unpack_states(load_checkpoint(path))
    if "acoustic" not in groups:
        raise CheckpointFormatError("checkpoint holds no acoustic tensors")
    model = build_acoustic(spec, cfg)
    model.load_state_dict(groups["acoustic"])
    return model


# ---------------------------------------------------------------------------
# prompts


def prompt_partner(spec: ToySpec, utterances: list[Utterance]) -> dict[str, Utterance]:
    """Map each utterance to another one sharing its (rate, pitch, speaker).

    Within a combination group the partner is the cyclically next utterance;
    a singleton group gets a freshly generated same-combination utterance.
    """
    by_combo: dict[tuple[int, int, int], list[Utterance]] = {}
    for u in utterances:
        by_combo.setdefault((u.rate, u.pitch, u.speaker), []).append(u)
    partners: dict[str, Utterance] = {}
    for combo, group in by_combo.items():
        for i, u in enumerate(group):
            if len(group) > 1:
                partners[u.uid] = group[(i + 1) % len(group)]
            else:
                rng = np.random.default_rng(u.seed + 1)
                text = random_text(spec, rng, 3, 8)
                partners[u.uid] = generate_utterance(
                    spec, text, *combo, seed=u.seed + 1
                )
    return partners


def different_speaker_prompt(
    u: Utterance, utterances: list[Utterance]
) -> Utterance:
    """Deterministically pick a prompt utterance with another speaker."""
    start = next(i for i, cand in enumerate(utterances) if cand.uid == u.uid)
    for offset in range(1, len(utterances) + 1):
        cand = utterances[(start + offset) % len(utterances)]
        if cand.speaker != u.speaker:
            return cand
    raise InputError("corpus has a single speaker; cannot build a cross prompt")


def acoustic_prompt_of(u: Utterance) -> AcousticPrompt:
    return AcousticPrompt(semantic=u.semantic, acoustic=u.acoustic)


# ---------------------------------------------------------------------------
# synthesis


@dataclass
class SynthesisResult:
    text: str
    semantic: list[int]
    acoustic: np.ndarray
    forward_passes: int


def synthesize(
    spec: ToySpec,
    transducer: TransducerModel,
    acoustic_model: GroupedMaskedLM,
    text: str,
    semantic_prompt: list[int],
    acoustic_prompt: AcousticPrompt,
    decode_cfg: DecodeConfig,
    max_symbols_per_frame: int = 8,
) -> SynthesisResult:
    """Text plus two prompts to a fully populated acoustic grid."""
    from .acoustic import DecodeTrace

    ids = text_to_ids(spec, text)
    semantic = greedy_decode(transducer, ids, semantic_prompt, max_symbols_per_frame)
    if not semantic:
        # degenerate decode from an untrained model; grid has zero frames
        return SynthesisResult(text, [], np.zeros((0, 2, 2), np.int64), 0)
    trace = DecodeTrace()
    grid = iterative_parallel_decode(
        acoustic_model, semantic, acoustic_prompt, decode_cfg, trace=trace
    )
    return SynthesisResult(text, semantic, grid, trace.forward_passes)


# ---------------------------------------------------------------------------
# evaluations


def evaluate_intelligibility(
    spec: ToySpec,
    model: TransducerModel,
    utterances: list[Utterance],
    max_symbols_per_frame: int = 8,
) -> dict:
    """Decode each utterance with a same-(rate, pitch) prompt and score the
    recovered text/rate/pitch against the truth."""
    partners = prompt_partner(spec, utterances)
    ters, rate_hits, pitch_hits = [], 0, 0
    for u in utterances:
        decoded = greedy_decode(
            model, text_to_ids(spec, u.text), partners[u.uid].semantic,
            max_symbols_per_frame,
        )
        text, rate, pitch = invert_semantic(spec, decoded)
        ters.append(token_error_rate(text, u.text))
        rate_hits += int(rate == u.rate)
        pitch_hits += int(pitch == u.pitch)
    n = len(utterances)
    return {
        "ter": float(np.mean(ters)),
        "rate_accuracy": rate_hits / n,
        "pitch_accuracy": pitch_hits / n,
        "utterances": n,
    }


def evaluate_nll(
    spec: ToySpec, model: TransducerModel, utterances: list[Utterance]
) -> float:
    partners = prompt_partner(spec, utterances)
    losses = [
        transducer_loss(
            model, text_to_ids(spec, u.text), u.semantic, partners[u.uid].semantic
        ).item()
        for u in utterances
    ]
    return float(np.mean(losses))


def evaluate_speaker_match(
    spec: ToySpec,
    model: GroupedMaskedLM,
    utterances: list[Utterance],
    decode_cfg: DecodeConfig,
) -> float:
    """Decode ground-truth semantics with a same-speaker prompt utterance
    and check the oracle classifier recovers the prompt speaker."""
    partners = prompt_partner(spec, utterances)
    sems, grids, speakers = [], [], []
    for i, u in enumerate(utterances):
        cfg = DecodeConfig(
            coarse_iterations=decode_cfg.coarse_iterations,
            temperature=decode_cfg.temperature,
            seed=decode_cfg.seed + i,
        )
        grid = iterative_parallel_decode(
            model, u.semantic, acoustic_prompt_of(partners[u.uid]), cfg
        )
        sems.append(u.semantic)
        grids.append(grid)
        speakers.append(partners[u.uid].speaker)
    return speaker_accuracy(spec, sems, grids, speakers)


def evaluate_disentanglement(
    spec: ToySpec,
    transducer: TransducerModel,
    acoustic_model: GroupedMaskedLM,
    utterances: list[Utterance],
    decode_cfg: DecodeConfig,
    max_symbols_per_frame: int = 8,
    length_tolerance: float = 0.10,
) -> dict:
    """Separate prompts: rate/pitch from one utterance, speaker from another.

    Checks that the generated grid carries the acoustic prompt's speaker
    while the generated length follows the semantic prompt's rate.
    """
    partners = prompt_partner(spec, utterances)
    speaker_hits, length_hits = 0, 0
    for i, u in enumerate(utterances):
        sem_prompt = partners[u.uid]          # same (rate, pitch) as u
        ac_source = different_speaker_prompt(u, utterances)
        cfg = DecodeConfig(
            coarse_iterations=decode_cfg.coarse_iterations,
            temperature=decode_cfg.temperature,
            seed=decode_cfg.seed + i,
        )
        result = synthesize(
            spec, transducer, acoustic_model, u.text,
            sem_prompt.semantic, acoustic_prompt_of(ac_source), cfg,
            max_symbols_per_frame,
        )
        want_len = u.rate * len(u.text)
        if result.semantic and abs(len(result.semantic) - want_len) <= length_tolerance * want_len:
            length_hits += 1
        if result.semantic:
            got = classify_from(spec, result)
            speaker_hits += int(got == ac_source.speaker)
    n = len(utterances)
    return {
        "speaker_match": speaker_hits / n,
        "length_match": length_hits / n,
        "utterances": n,
    }


def classify_from(spec: ToySpec, result: SynthesisResult) -> int | None:
    from .toyworld import classify_speaker

    return classify_speaker(spec, result.semantic, result.acoustic)
