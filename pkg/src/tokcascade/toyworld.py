"""Synthetic token corpus with exact inverse oracles.

Utterances are generated by closed-form maps so every downstream metric has
a ground-truth answer: semantic tokens encode (phoneme, pitch) repeated
`rate` times, coarse acoustic tokens add a speaker offset per group, and
fine acoustic tokens add position terms.  The eval split holds out whole
(rate, pitch, speaker) combinations, giving a zero-shot analog.

Token maps (all arithmetic mod the acoustic vocabulary, 64 by default):

    semantic  s_t     = pitch_classes * phoneme + pitch, repeated rate times
    coarse    y[t,0,0] = s_t + stride * speaker
              y[t,1,0] = s_t + stride * speaker + 17
    fine      y[t,0,1] = s_t + t
              y[t,1,1] = s_t + 2 t            (t zero-based)

Texts never contain two identical adjacent phonemes; otherwise run-collapse
inversion could not be exact.
"""
from __future__ import annotations

import json
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

GROUP1_COARSE_OFFSET = 17  # fixed group-1 shift; coprime-ish with the vocab

SAMPLE_RATE = 16000
FRAME_SAMPLES = 320  # 20 ms at 16 kHz
BASE_FREQ_HZ = 100.0
FREQ_STEP_HZ = 5.0
WAVE_AMPLITUDE = 0.25


@dataclass(frozen=True)
class ToySpec:
    phonemes: int = 16
    pitch_classes: int = 4
    rates: tuple[int, ...] = (1, 2, 3)
    speakers: int = 8
    acoustic_vocab: int = 64
    frame_rate: int = 50  # tokens per second

    @property
    def semantic_vocab(self) -> int:
        return self.phonemes * self.pitch_classes

    @property
    def speaker_stride(self) -> int:
        return self.acoustic_vocab // self.speakers

    @property
    def alphabet(self) -> str:
        return "abcdefghijklmnopqrstuvwxyz"[: self.phonemes]


@dataclass(eq=False)
class Utterance:
    uid: str
    text: str
    rate: int
    pitch: int
    speaker: int
    semantic: list[int]
    acoustic: np.ndarray  # int64 [T, 2, 2] -> [position, group, depth]
    seed: int


@dataclass
class Corpus:
    spec: ToySpec
    train: list[Utterance]
    eval: list[Utterance]
    held_out: list[tuple[int, int, int]] = field(default_factory=list)
    seed: int = 0


def text_to_ids(spec: ToySpec, text: str) -> list[int]:
    ids = []
    for ch in text:
        idx = spec.alphabet.find(ch)
        if idx < 0:
            raise InputError(f"phoneme {ch!r} outside alphabet of {spec.phonemes}")
        ids.append(idx)
    return ids


def ids_to_text(spec: ToySpec, ids) -> str:
    return "".join(spec.alphabet[i] for i in ids)


def generate_utterance(
    spec: ToySpec, text: str, rate: int, pitch: int, speaker: int, seed: int = 0,
    uid: str = "",
) -> Utterance:
    """Apply the corpus maps to one text; raises on invalid inputs."""
    if not text:
        raise InputError("empty text")
    if rate not in spec.rates:
        raise InputError(f"rate {rate} not in {spec.rates}")
    if not 0 <= pitch < spec.pitch_classes:
        raise InputError(f"pitch {pitch} out of range")
    if not 0 <= speaker < spec.speakers:
        raise InputError(f"speaker {speaker} out of range")
    ids = text_to_ids(spec, text)
    for a, b in zip(ids, ids[1:]):
        if a == b:
            raise InputError("adjacent repeated phonemes are not valid toy text")

    semantic = []
    for c in ids:
        semantic.extend([spec.pitch_classes * c + pitch] * rate)

    k = spec.acoustic_vocab
    t = np.arange(len(semantic), dtype=np.int64)
    s = np.asarray(semantic, dtype=np.int64)
    grid = np.empty((len(semantic), 2, 2), dtype=np.int64)
    grid[:, 0, 0] = (s + spec.speaker_stride * speaker) % k
    grid[:, 1, 0] = (s + spec.speaker_stride * speaker + GROUP1_COARSE_OFFSET) % k
    grid[:, 0, 1] = (s + t) % k
    grid[:, 1, 1] = (s + 2 * t) % k
    return Utterance(
        uid=uid or f"u{seed}",
        text=text,
        rate=rate,
        pitch=pitch,
        speaker=speaker,
        semantic=semantic,
        acoustic=grid,
        seed=seed,
    )


def invert_semantic(spec: ToySpec, semantic) -> tuple[str, int | None, int | None]:
    """Recover (text, rate, pitch) from a semantic sequence.

    Collapses runs of equal tokens; phoneme = token // pitch_classes, pitch
    by majority vote over all tokens, rate = the rounded median run length.
    Malformed sequences still decode token by token; empty input returns
    an empty text with undefined rate and pitch.
    """
    tokens = list(semantic)
    if not tokens:
        return "", None, None
    runs: list[tuple[int, int]] = []  # (token, length)
    for tok in tokens:
        if runs and runs[-1][0] == tok:
            runs[-1] = (tok, runs[-1][1] + 1)
        else:
            runs.append((int(tok), 1))
    text = "".join(
        spec.alphabet[(tok // spec.pitch_classes) % spec.phonemes] for tok, _ in runs
    )
    pitch_votes = np.bincount(
        [int(tok) % spec.pitch_classes for tok in tokens], minlength=spec.pitch_classes
    )
    pitch = int(pitch_votes.argmax())
    rate = int(round(float(np.median([length for _, length in runs]))))
    return text, rate, pitch


def classify_speaker(spec: ToySpec, semantic, acoustic: np.ndarray) -> int | None:
    """Majority-vote speaker recovery from coarse tokens; None on reject.

    A position votes only when its group-0 offset is a whole speaker stride
    and group 1 confirms the same offset.  The winner must carry at least
    half of all positions.
    """
    s = np.asarray(semantic, dtype=np.int64)
    grid = np.asarray(acoustic, dtype=np.int64)
    if grid.shape != (len(s), 2, 2):
        raise InputError(f"acoustic grid {grid.shape} does not match {len(s)} positions")
    if len(s) == 0:
        return None
    k = spec.acoustic_vocab
    d0 = (grid[:, 0, 0] - s) % k
    d1 = (grid[:, 1, 0] - s - GROUP1_COARSE_OFFSET) % k
    valid = (d0 % spec.speaker_stride == 0) & (d0 == d1)
    votes = np.bincount((d0[valid] // spec.speaker_stride), minlength=spec.speakers)
    if votes.sum() == 0:
        return None
    best = int(votes.argmax())
    if 2 * int(votes[best]) >= len(s):
        return best
    return None


def random_text(spec: ToySpec, rng: np.random.Generator, lo: int = 2, hi: int = 12) -> str:
    """Uniform text of length lo..hi without adjacent repeats."""
    n = int(rng.integers(lo, hi + 1))
    ids = [int(rng.integers(spec.phonemes))]
    for _ in range(n - 1):
        step = int(rng.integers(1, spec.phonemes))
        ids.append((ids[-1] + step) % spec.phonemes)
    return ids_to_text(spec, ids)


def build_corpus(
    spec: ToySpec,
    n_train: int,
    n_eval: int,
    seed: int,
    holdout_combos: int = 12,
    text_len: tuple[int, int] = (2, 12),
) -> Corpus:
    """Deterministic corpus with (rate, pitch, speaker) combinations held out.

    Training utterances cycle through the non-held-out combinations and the
    eval set cycles through the held-out ones, so the eval conditions are
    never seen in training while every training combination is covered.
    """
    if n_train < 1 or n_eval < 1:
        raise InputError("corpus sizes must be positive")
    rng = np.random.default_rng(seed)
    combos = [
        (r, p, sig)
        for r in spec.rates
        for p in range(spec.pitch_classes)
        for sig in range(spec.speakers)
    ]
    order = rng.permutation(len(combos))
    held = [combos[i] for i in order[:holdout_combos]]
    kept = [combos[i] for i in order[holdout_combos:]]

    def make(split: str, count: int, pool: list[tuple[int, int, int]]) -> list[Utterance]:
        out = []
        for i in range(count):
            r, p, sig = pool[i % len(pool)]
            text = random_text(spec, rng, *text_len)
            u_seed = int(rng.integers(2**31))
            out.append(
                generate_utterance(
                    spec, text, r, p, sig, seed=u_seed, uid=f"{split}-{i:05d}"
                )
            )
        return out

    train = make("train", n_train, kept)
    evalset = make("eval", n_eval, held)
    return Corpus(spec=spec, train=train, eval=evalset, held_out=held, seed=seed)


# ---------------------------------------------------------------------------
# manifest and waveform i/o


def utterance_record(u: Utterance) -> dict:
    return {
        "id": u.uid,
        "text": u.text,
        "r": u.rate,
        "p": u.pitch,
        "sigma": u.speaker,
        "semantic": list(map(int, u.semantic)),
        # stored group-major: acoustic[group][depth][position]
        "acoustic": u.acoustic.transpose(1, 2, 0).tolist(),
        "seed": u.seed,
    }


def write_manifest(utterances: list[Utterance], path: str | Path) -> None:
    lines = [
        json.dumps(utterance_record(u), sort_keys=True, separators=(",", ":"))
        for u in utterances
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def read_manifest(path: str | Path) -> list[Utterance]:
    out = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        rec = json.loads(line)
        grid = np.asarray(rec["acoustic"], dtype=np.int64).transpose(2, 0, 1)
        out.append(
            Utterance(
                uid=rec["id"],
                text=rec["text"],
                rate=rec["r"],
                pitch=rec["p"],
                speaker=rec["sigma"],
                semantic=[int(v) for v in rec["semantic"]],
                acoustic=grid,
                seed=rec["seed"],
            )
        )
    return out


def render_waveform(spec: ToySpec, acoustic: np.ndarray) -> np.ndarray:
    """Two phase-continuous sinusoids (one per group), 20 ms per frame.

    The per-group tone index is the sum of that group's depth indices mod
    the vocabulary, so both depths are audible.
    """
    grid = np.asarray(acoustic, dtype=np.int64)
    if grid.ndim != 3 or grid.shape[1:] != (2, 2):
        raise InputError(f"expected [T, 2, 2] grid, got {grid.shape}")
    total = np.zeros(grid.shape[0] * FRAME_SAMPLES)
    for group in range(2):
        phase = 0.0
        out = np.empty(grid.shape[0] * FRAME_SAMPLES)
        for t in range(grid.shape[0]):
            tone = int((grid[t, group, 0] + grid[t, group, 1]) % spec.acoustic_vocab)
            freq = BASE_FREQ_HZ + FREQ_STEP_HZ * tone
            step = 2.0 * np.pi * freq / SAMPLE_RATE
            phases = phase + step * np.arange(1, FRAME_SAMPLES + 1)
            out[t * FRAME_SAMPLES : (t + 1) * FRAME_SAMPLES] = np.sin(phases)
            phase = float(phases[-1])
        total += WAVE_AMPLITUDE * out
    return total


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int = SAMPLE_RATE) -> None:
    pcm = np.clip(samples, -1.0, 1.0)
    pcm16 = (pcm * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm16.tobytes())


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise InputError("expected 16-bit mono WAV")
        rate = w.getframerate()
        pcm16 = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    return pcm16.astype(np.float64) / 32767.0, rate
