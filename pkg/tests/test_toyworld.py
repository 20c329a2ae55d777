"""Corpus formulas, the exact inverse oracles, and file formats."""
from __future__ import annotations

import numpy as np
import pytest

from tokcascade.errors import InputError
from tokcascade.toyworld import (
    FRAME_SAMPLES,
    ToySpec,
    build_corpus,
    classify_speaker,
    generate_utterance,
    invert_semantic,
    read_manifest,
    read_wav,
    render_waveform,
    utterance_record,
    write_manifest,
    write_wav,
)

SPEC = ToySpec()


def test_semantic_formula():
    u = generate_utterance(SPEC, "ab", rate=2, pitch=1, speaker=0)
    assert u.semantic == [1, 1, 5, 5]


def test_coarse_formula_with_speaker():
    u = generate_utterance(SPEC, "ab", rate=2, pitch=1, speaker=2)
    assert u.acoustic[:, 0, 0].tolist() == [17, 17, 21, 21]
    assert u.acoustic[:, 1, 0].tolist() == [34, 34, 38, 38]


def test_all_zero_base_case():
    u = generate_utterance(SPEC, "a", rate=1, pitch=0, speaker=0)
    assert u.semantic == [0]
    assert u.acoustic[0, 0, 0] == 0 and u.acoustic[0, 1, 0] == 17
    assert u.acoustic[0, 0, 1] == 0 and u.acoustic[0, 1, 1] == 0


def test_fine_tokens_use_position():
    u = generate_utterance(SPEC, "ab", rate=2, pitch=0, speaker=0)
    assert u.acoustic[:, 0, 1].tolist() == [0, 1, 6, 7]
    assert u.acoustic[:, 1, 1].tolist() == [0, 2, 8, 10]


def test_generate_validation():
    with pytest.raises(InputError):
        generate_utterance(SPEC, "a!b", 1, 0, 0)
    with pytest.raises(InputError):
        generate_utterance(SPEC, "aab", 1, 0, 0)  # adjacent repeat
    with pytest.raises(InputError):
        generate_utterance(SPEC, "ab", 4, 0, 0)
    with pytest.raises(InputError):
        generate_utterance(SPEC, "", 1, 0, 0)


def test_invert_semantic_examples():
    assert invert_semantic(SPEC, [1, 1, 5, 5]) == ("ab", 2, 1)
    assert invert_semantic(SPEC, []) == ("", None, None)
    # ragged runs: median of {3, 2} is 2.5, banker's rounding gives 2
    assert invert_semantic(SPEC, [1, 1, 1, 5, 5]) == ("ab", 2, 1)


def test_invert_handles_malformed_tokens():
    text, rate, pitch = invert_semantic(SPEC, [999, 999, -3])
    assert len(text) == 2 and rate is not None and pitch is not None


def test_invert_is_exact_inverse():
    rng = np.random.default_rng(0)
    for _ in range(200):
        r = int(rng.choice(SPEC.rates))
        p = int(rng.integers(SPEC.pitch_classes))
        sig = int(rng.integers(SPEC.speakers))
        from tokcascade.toyworld import random_text

        text = random_text(SPEC, rng)
        u = generate_utterance(SPEC, text, r, p, sig)
        assert invert_semantic(SPEC, u.semantic) == (text, r, p)


def test_classify_speaker_ground_truth():
    rng = np.random.default_rng(1)
    from tokcascade.toyworld import random_text

    for _ in range(100):
        sig = int(rng.integers(SPEC.speakers))
        u = generate_utterance(
            SPEC, random_text(SPEC, rng), int(rng.choice(SPEC.rates)),
            int(rng.integers(SPEC.pitch_classes)), sig,
        )
        assert classify_speaker(SPEC, u.semantic, u.acoustic) == sig


def test_classify_speaker_rejects_random_grids():
    rng = np.random.default_rng(2)
    rejects = 0
    trials = 200
    for _ in range(trials):
        s = rng.integers(0, 64, size=12).tolist()
        grid = rng.integers(0, 64, size=(12, 2, 2))
        if classify_speaker(SPEC, s, grid) is None:
            rejects += 1
    assert rejects >= trials * 0.95


def test_classify_speaker_single_frame():
    u = generate_utterance(SPEC, "c", 1, 2, speaker=5)
    assert classify_speaker(SPEC, u.semantic, u.acoustic) == 5


def test_classify_speaker_length_mismatch():
    u = generate_utterance(SPEC, "ab", 1, 0, 0)
    with pytest.raises(InputError):
        classify_speaker(SPEC, u.semantic + [0], u.acoustic)


def test_corpus_determinism_and_holdout(tmp_path):
    a = build_corpus(SPEC, n_train=40, n_eval=24, seed=9)
    b = build_corpus(SPEC, n_train=40, n_eval=24, seed=9)
    write_manifest(a.train, tmp_path / "a.jsonl")
    write_manifest(b.train, tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()

    train_combos = {(u.rate, u.pitch, u.speaker) for u in a.train}
    eval_combos = {(u.rate, u.pitch, u.speaker) for u in a.eval}
    assert train_combos.isdisjoint(eval_combos)
    assert eval_combos == set(a.held_out)
    assert len(a.train) == 40 and len(a.eval) == 24


def test_manifest_roundtrip(tmp_path):
    corpus = build_corpus(SPEC, n_train=5, n_eval=3, seed=4)
    path = tmp_path / "m.jsonl"
    write_manifest(corpus.train, path)
    back = read_manifest(path)
    assert len(back) == 5
    for u, v in zip(corpus.train, back):
        assert u.uid == v.uid and u.text == v.text
        assert u.semantic == v.semantic
        assert np.array_equal(u.acoustic, v.acoustic)
    rec = utterance_record(corpus.train[0])
    grid = np.asarray(rec["acoustic"])
    assert grid.shape == (2, 2, len(corpus.train[0].semantic))


def test_render_waveform_length_and_amplitude():
    u = generate_utterance(SPEC, "abc", 2, 1, 3)
    wav = render_waveform(SPEC, u.acoustic)
    assert wav.shape == (len(u.semantic) * FRAME_SAMPLES,)
    assert np.abs(wav).max() <= 0.5 + 1e-12


def test_render_all_zero_tokens_is_100hz():
    grid = np.zeros((4, 2, 2), dtype=np.int64)
    wav = render_waveform(SPEC, grid)
    k = np.arange(1, 4 * FRAME_SAMPLES + 1)
    expected = 0.5 * np.sin(2.0 * np.pi * 100.0 / 16000.0 * k)
    assert np.abs(wav - expected).max() <= 1e-9


def test_wav_roundtrip(tmp_path):
    u = generate_utterance(SPEC, "dba", 1, 0, 7)
    wav = render_waveform(SPEC, u.acoustic)
    path = tmp_path / "out.wav"
    write_wav(path, wav)
    back, rate = read_wav(path)
    assert rate == 16000
    assert back.shape == wav.shape
    assert np.abs(back - wav).max() <= 1.0 / 32767.0 + 1e-6
