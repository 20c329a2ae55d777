"""Metrics against textbook oracles and the RTF definition."""
from __future__ import annotations

import numpy as np
import pytest

from tokcascade.errors import ContractError, InputError
from tokcascade.evalbench import (
    BenchReport,
    eval_nll,
    format_report_table,
    measure_rtf,
    rtf_from,
    speaker_accuracy,
    token_error_rate,
    write_reports,
)
from tokcascade.toyworld import ToySpec, build_corpus, generate_utterance
from tokcascade.transducer import transducer_loss, uniform_logit_loss


def full_matrix_levenshtein(a, b) -> int:
    """Textbook O(nm) DP with the whole matrix kept."""
    a, b = list(a), list(b)
    dp = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        dp[i][0] = i
    for j in range(1, len(b) + 1):
        dp[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            dp[i][j] = min(
                dp[i - 1][j] + 1,
                dp[i][j - 1] + 1,
                dp[i - 1][j - 1] + (0 if a[i - 1] == b[j - 1] else 1),
            )
    return dp[-1][-1]


class TestTokenErrorRate:
    def test_identical_is_zero(self):
        assert token_error_rate([1, 2, 3], [1, 2, 3]) == 0.0

    def test_single_deletion(self):
        assert token_error_rate([1, 1, 5], [1, 1, 5, 5]) == 0.25

    def test_matches_full_matrix_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            ref = rng.integers(0, 5, size=rng.integers(1, 12)).tolist()
            hyp = rng.integers(0, 5, size=rng.integers(0, 12)).tolist()
            want = full_matrix_levenshtein(ref, hyp) / len(ref)
            assert token_error_rate(hyp, ref) == want

    def test_empty_reference_rejected(self):
        with pytest.raises(ContractError):
            token_error_rate([1], [])

    def test_bounds(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            ref = rng.integers(0, 3, size=rng.integers(1, 8)).tolist()
            hyp = rng.integers(0, 3, size=rng.integers(0, 8)).tolist()
            ter = token_error_rate(hyp, ref)
            assert 0.0 <= ter <= max(len(hyp), len(ref)) / len(ref)

    def test_works_on_strings(self):
        assert token_error_rate("abc", "abd") == pytest.approx(1 / 3)


class TestSpeakerAccuracy:
    SPEC = ToySpec()

    def test_ground_truth_is_perfect(self):
        corpus = build_corpus(self.SPEC, n_train=20, n_eval=4, seed=0)
        sems = [u.semantic for u in corpus.train]
        grids = [u.acoustic for u in corpus.train]
        speakers = [u.speaker for u in corpus.train]
        assert speaker_accuracy(self.SPEC, sems, grids, speakers) == 1.0

    def test_random_grids_score_low(self):
        rng = np.random.default_rng(2)
        sems, grids, speakers = [], [], []
        for _ in range(100):
            t = int(rng.integers(4, 16))
            sems.append(rng.integers(0, 64, size=t).tolist())
            grids.append(rng.integers(0, 64, size=(t, 2, 2)))
            speakers.append(int(rng.integers(8)))
        assert speaker_accuracy(self.SPEC, sems, grids, speakers) < 0.2

    def test_empty_list_rejected(self):
        with pytest.raises(ContractError):
            speaker_accuracy(self.SPEC, [], [], [])

    def test_misaligned_rejected(self):
        u = generate_utterance(self.SPEC, "ab", 1, 0, 0)
        with pytest.raises(InputError):
            speaker_accuracy(self.SPEC, [u.semantic], [u.acoustic], [0, 1])


class TestEvalNll:
    def test_single_item_equals_loss(self):
        vals = {"a": 1.5}
        assert eval_nll(lambda k: vals[k], ["a"]) == 1.5

    def test_duplicated_dataset_same_mean(self):
        vals = {"a": 1.0, "b": 3.0}
        once = eval_nll(lambda k: vals[k], ["a", "b"])
        twice = eval_nll(lambda k: vals[k], ["a", "b", "a", "b"])
        assert once == twice == 2.0

    def test_order_invariant(self):
        vals = {"a": 1.0, "b": 3.0, "c": 0.5}
        assert eval_nll(lambda k: vals[k], ["a", "b", "c"]) == eval_nll(
            lambda k: vals[k], ["c", "a", "b"]
        )

    def test_uniform_init_model_matches_closed_form(self):
        from tokcascade.transducer import TransducerModel

        spec = ToySpec()
        m = TransducerModel(
            text_vocab=spec.phonemes, semantic_vocab=spec.semantic_vocab,
            dim=8, heads=2, text_blocks=1, pred_blocks=1,
        )
        m.joint.out.w.data[...] = 0.0
        m.joint.out.b.data[...] = 0.0
        corpus = build_corpus(spec, n_train=6, n_eval=2, seed=3)
        from tokcascade.toyworld import text_to_ids

        def loss(u):
            return transducer_loss(m, text_to_ids(spec, u.text), u.semantic, [0]).item()

        got = eval_nll(loss, corpus.train)
        want = float(
            np.mean(
                [
                    uniform_logit_loss(len(u.text), len(u.semantic), spec.semantic_vocab + 1)
                    for u in corpus.train
                ]
            )
        )
        assert abs(got - want) < 1e-9


class TestRtf:
    def test_definition_example(self):
        assert rtf_from(frames=100, seconds=0.1, frame_rate=50) == pytest.approx(20.0)

    def test_measure_runs_decoder(self):
        calls = {"n": 0}

        def decoder(item):
            calls["n"] += 1
            return [0] * item

        rtf = measure_rtf(decoder, [5, 7, 3], frame_rate=50, runs=3)
        assert rtf > 0
        assert calls["n"] == 4 * 3  # warm-up + 3 timed runs

    def test_empty_dataset_rejected(self):
        with pytest.raises(ContractError):
            measure_rtf(lambda x: [0], [], frame_rate=50)


def test_report_serialization(tmp_path):
    reports = [
        BenchReport(variant="compact", rtf=12.5, nll=1.3, forward_passes=17, utterances=50),
        BenchReport(variant="baseline", rtf=8.0, nll=1.4, utterances=50),
    ]
    path = tmp_path / "bench.jsonl"
    write_reports(reports, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 2 and '"variant":"compact"' in lines[0]
    table = format_report_table(reports)
    assert "compact" in table and "baseline" in table
