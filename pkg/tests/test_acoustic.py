"""Acoustic stage: masking/schedule contracts, prompt cache equivalence,
decode structure, and loss values against hand-built logits."""
from __future__ import annotations

import numpy as np
import pytest

from tokcascade.acoustic import (
    AcousticPrompt,
    DecodeConfig,
    DecodeTrace,
    GroupedMaskedLM,
    MaskPattern,
    iterative_parallel_decode,
    masked_token_loss,
    sample_group_mask,
    sample_training_mask,
    schedule_keep_count,
    split_prompt,
)
from tokcascade.errors import ConfigError, ContractError, InputError
from tokcascade.numerics import Tensor
from tokcascade.toyworld import ToySpec, generate_utterance


def tiny_model(k_s: int = 8, k_a: int = 6, dim: int = 16, seed: int = 0,
               blocks: int = 2, prompt_blocks: int = 1) -> GroupedMaskedLM:
    return GroupedMaskedLM(
        semantic_vocab=k_s, acoustic_vocab=k_a, dim=dim, heads=2,
        blocks=blocks, prompt_blocks=prompt_blocks, conv_kernel=3, seed=seed,
    )


def make_prompt(k_s: int = 8, k_a: int = 6, length: int = 3, seed: int = 1) -> AcousticPrompt:
    rng = np.random.default_rng(seed)
    return AcousticPrompt(
        semantic=rng.integers(0, k_s, size=length).tolist(),
        acoustic=rng.integers(0, k_a, size=(length, 2, 2)),
    )


class TestMasking:
    def test_full_coarse_ratio(self):
        m = sample_group_mask(5, 1.0, "coarse", seed=0)
        assert m.coarse.all() and not m.fine.any()
        assert m.masked_entries() == 10  # both groups, depth 0 only

    def test_specific_positions_count_four_entries(self):
        m = MaskPattern.none(4)
        m.coarse[[1, 3]] = True
        assert m.masked_entries() == 4

    def test_seeded_draws_properties(self):
        for seed in range(1000):
            t = 1 + seed % 13
            ratio = (seed % 11) / 10.0
            m = sample_group_mask(t, ratio, "fine" if seed % 2 else "coarse", seed=seed)
            level = m.fine if seed % 2 else m.coarse
            other = m.coarse if seed % 2 else m.fine
            assert int(level.sum()) == int(np.ceil(ratio * t - 1e-12))
            assert not other.any()
            # one flag vector serves both groups: entry count is always even
            assert m.masked_entries() == 2 * level.sum()

    def test_ratio_validation(self):
        with pytest.raises(ConfigError):
            sample_group_mask(4, 1.5, "coarse", seed=0)
        with pytest.raises(ConfigError):
            sample_group_mask(4, 0.5, "medium", seed=0)

    def test_exact_ratio_products_do_not_overshoot(self):
        m = sample_group_mask(10, 0.1, "coarse", seed=3)
        assert int(m.coarse.sum()) == 1


class TestSchedule:
    def test_terminal_zero(self):
        assert schedule_keep_count(16, 16, 40) == 0
        assert schedule_keep_count(1, 1, 40) == 0

    def test_cosine_example(self):
        assert schedule_keep_count(1, 2, 10) == 8

    def test_monotone_nonincreasing_sweep(self):
        for t in range(1, 65):
            for total in range(1, 33):
                values = [schedule_keep_count(n, total, t) for n in range(1, total + 1)]
                assert values[-1] == 0
                assert all(a >= b for a, b in zip(values, values[1:]))

    def test_out_of_range(self):
        with pytest.raises(ContractError):
            schedule_keep_count(0, 16, 10)
        with pytest.raises(ContractError):
            schedule_keep_count(17, 16, 10)


class TestPromptCache:
    def test_cache_deterministic_and_shaped(self):
        m = tiny_model()
        p = make_prompt()
        a = m.encode_prompt(p)
        b = m.encode_prompt(p)
        assert len(a.layers) == len(m.gen_stack)
        assert a.length == len(p.semantic)
        for (ka, va), (kb, vb) in zip(a.layers, b.layers):
            assert ka.data.shape[1] == len(p.semantic)  # prompt-length rows
            assert va.data.shape[1] == len(p.semantic)
            assert np.array_equal(ka.data, kb.data)
            assert np.array_equal(va.data, vb.data)

    def test_cached_logits_equal_full_recompute(self):
        m = tiny_model(seed=3)
        p = make_prompt(seed=4)
        sem = [1, 2, 3, 0]
        grid = np.random.default_rng(5).integers(0, 6, size=(4, 2, 2))
        mask = MaskPattern.full(4, "coarse")
        cached = m.forward(sem, grid, mask, m.encode_prompt(p))
        direct = m.forward(sem, grid, mask, p)
        for a, b in zip(cached, direct):
            assert np.abs(a.data - b.data).max() <= 1e-6

    def test_empty_prompt_rejected(self):
        with pytest.raises(InputError):
            AcousticPrompt(semantic=[], acoustic=np.zeros((0, 2, 2)))


class TestForward:
    def test_shapes_single_position(self):
        m = tiny_model()
        p = make_prompt()
        logits = m.forward([2], np.zeros((1, 2, 2), np.int64), MaskPattern.full(1, "coarse"), p)
        assert len(logits) == 4
        for head in logits:
            assert head.data.shape == (1, m.acoustic_vocab)

    def test_forward_is_deterministic(self):
        m = tiny_model(seed=7)
        p = make_prompt(seed=8)
        sem = [0, 1, 2]
        grid = np.ones((3, 2, 2), np.int64)
        mask = MaskPattern.full(3, "fine")
        a = m.forward(sem, grid, mask, p)
        b = m.forward(sem, grid, mask, p)
        for x, y in zip(a, b):
            assert np.array_equal(x.data, y.data)

    def test_bidirectional_context(self):
        # changing an unmasked token at one position moves logits elsewhere
        m = tiny_model(seed=9)
        p = make_prompt(seed=10)
        sem = [0, 1, 2, 3]
        mask = MaskPattern.full(4, "fine")  # coarse visible everywhere
        grid_a = np.zeros((4, 2, 2), np.int64)
        grid_b = grid_a.copy()
        grid_b[0, 0, 0] = 3
        la = m.forward(sem, grid_a, mask, p)
        lb = m.forward(sem, grid_b, mask, p)
        assert np.abs(la[1].data[2] - lb[1].data[2]).max() > 1e-9

    def test_input_validation(self):
        m = tiny_model()
        p = make_prompt()
        with pytest.raises(InputError):
            m.forward([], np.zeros((0, 2, 2), np.int64), MaskPattern.none(0), p)
        with pytest.raises(InputError):
            m.forward([1, 2], np.zeros((3, 2, 2), np.int64), MaskPattern.none(2), p)
        with pytest.raises(InputError):
            m.forward([1, 2], np.zeros((2, 2, 2), np.int64), MaskPattern.none(3), p)


class TestMaskedTokenLoss:
    def _logits_with_logprob(self, t_len: int, k: int, target: int, logprob: float):
        # logits[target] = 0, others c: softmax[target] = exp(logprob)
        c = np.log((np.exp(-logprob) - 1.0) / (k - 1))
        row = np.full(k, c)
        row[target] = 0.0
        return np.tile(row, (t_len, 1))

    def test_two_coarse_entries_normalized(self):
        k = 6
        grid = np.zeros((1, 2, 2), np.int64)
        grid[0, 0, 0] = 2
        grid[0, 1, 0] = 4
        logits = [
            Tensor(self._logits_with_logprob(1, k, 2, -1.2)),
            Tensor(np.zeros((1, k))),
            Tensor(self._logits_with_logprob(1, k, 4, -1.2)),
            Tensor(np.zeros((1, k))),
        ]
        mask = MaskPattern.full(1, "coarse")
        loss, empty = masked_token_loss(logits, grid, mask)
        assert not empty
        assert abs(loss.item() - 1.2) < 1e-9
        assert mask.masked_entries() == 2
        assert abs(loss.item() * mask.masked_entries() - 2.4) < 1e-9

    def test_empty_mask_returns_zero_with_flag(self):
        logits = [Tensor(np.zeros((3, 6))) for _ in range(4)]
        loss, empty = masked_token_loss(logits, np.zeros((3, 2, 2), np.int64), MaskPattern.none(3))
        assert empty and loss.item() == 0.0

    def test_uniform_logits_all_coarse(self):
        k = 64
        logits = [Tensor(np.zeros((5, k))) for _ in range(4)]
        grid = np.random.default_rng(0).integers(0, k, size=(5, 2, 2))
        loss, empty = masked_token_loss(logits, grid, MaskPattern.full(5, "coarse"))
        assert not empty
        assert abs(loss.item() - np.log(64.0)) < 1e-12

    def test_gradients_match_finite_differences(self, gradcheck):
        m = tiny_model(k_s=4, k_a=4, dim=8, blocks=1, prompt_blocks=1, seed=11)
        p = make_prompt(k_s=4, k_a=4, length=2, seed=12)
        sem = [0, 2, 3]
        grid = np.random.default_rng(13).integers(0, 4, size=(3, 2, 2))
        mask = MaskPattern(np.array([True, False, True]), np.ones(3, bool))

        def build(m=m):
            logits = m.forward(sem, grid, mask, p)
            loss, _ = masked_token_loss(logits, grid, mask)
            return loss

        gradcheck(m.named_parameters(), build)


class TestIterativeDecode:
    def test_forward_pass_counts(self):
        m = tiny_model(seed=20)
        p = make_prompt(seed=21)
        for n_iter, want in [(1, 2), (4, 5), (16, 17)]:
            trace = DecodeTrace()
            iterative_parallel_decode(
                m, [1, 2, 0, 3, 1], p, DecodeConfig(coarse_iterations=n_iter, seed=0),
                trace=trace,
            )
            assert trace.forward_passes == want

    def test_structural_invariants_over_seeds(self):
        m = tiny_model(seed=22)
        p = make_prompt(seed=23)
        sem = [0, 1, 2, 3, 2, 1, 0, 3]
        for seed in range(25):
            trace = DecodeTrace()
            grid = iterative_parallel_decode(
                m, sem, p, DecodeConfig(coarse_iterations=6, seed=seed), trace=trace
            )
            assert grid.shape == (8, 2, 2)
            assert (grid >= 0).all() and (grid < m.acoustic_vocab).all()
            counts = trace.masked_before + [trace.masked_after[-1]]
            assert counts[0] == len(sem)
            assert trace.masked_after[-1] == 0
            for before, after in zip(trace.masked_before, trace.masked_after):
                assert after < before or before == 0
            for g0, g1 in trace.group_masks:
                assert np.array_equal(g0, g1)
            assert not trace.committed_overwritten

    def test_cache_equivalence_tokens_identical(self):
        m = tiny_model(seed=24)
        p = make_prompt(seed=25)
        sem = [3, 1, 2, 0, 1]
        for seed in range(10):
            cfg = DecodeConfig(coarse_iterations=5, seed=seed)
            a = iterative_parallel_decode(m, sem, p, cfg, use_cache=True)
            b = iterative_parallel_decode(m, sem, p, cfg, use_cache=False)
            assert np.array_equal(a, b)

    def test_determinism_given_seed(self):
        m = tiny_model(seed=26)
        p = make_prompt(seed=27)
        cfg = DecodeConfig(coarse_iterations=3, seed=99)
        a = iterative_parallel_decode(m, [1, 2, 3], p, cfg)
        b = iterative_parallel_decode(m, [1, 2, 3], p, cfg)
        assert np.array_equal(a, b)

    def test_empty_semantic_rejected(self):
        with pytest.raises(InputError):
            iterative_parallel_decode(tiny_model(), [], make_prompt(), DecodeConfig())

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            DecodeConfig(coarse_iterations=0)


class TestTrainingHelpers:
    def test_split_prompt_bounds(self):
        spec = ToySpec()
        u = generate_utterance(spec, "abcd", 3, 1, 2)
        rng = np.random.default_rng(0)
        for _ in range(50):
            prompt, sem, grid = split_prompt(u, rng, (0.25, 0.5), max_target=6)
            assert 1 <= len(prompt.semantic) < len(u.semantic)
            assert 1 <= len(sem) <= 6
            assert grid.shape == (len(sem), 2, 2)
            joined = prompt.semantic + sem
            assert joined == u.semantic[: len(joined)]

    def test_training_mask_levels(self):
        rng = np.random.default_rng(1)
        saw_coarse = saw_fine_only = False
        for _ in range(200):
            m = sample_training_mask(6, rng, coarse_prob=0.5)
            assert m.fine.all()  # fine level is always fully masked in training
            if m.coarse.any():
                saw_coarse = True
            else:
                saw_fine_only = True
        assert saw_coarse and saw_fine_only
