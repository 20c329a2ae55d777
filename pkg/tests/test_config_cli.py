"""Config parsing (strict keys, mandatory seed) and CLI exit codes."""
from __future__ import annotations

import json

import numpy as np
import pytest

from tokcascade.cli import run_command
from tokcascade.config import default_config_text, load_config, parse_config
from tokcascade.errors import ConfigError


def test_default_config_parses_and_exposes_values(tmp_path):
    text = default_config_text(seed=7)
    cfg = parse_config(text)
    assert cfg.seed == 7
    spec = cfg.toy_spec()
    assert spec.semantic_vocab == 64 and spec.acoustic_vocab == 64
    assert cfg.decode().coarse_iterations == 16
    assert cfg.transducer_train().epochs == 30
    assert cfg.acoustic_train().conv_kernel == 7


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config("[toy]\nphonemes = 16\nbananas = 3\n\n[run]\nseed = 1\n")


def test_unknown_section_rejected():
    with pytest.raises(ConfigError):
        parse_config("[mystery]\nx = 1\n\n[run]\nseed = 1\n")


def test_missing_seed_rejected():
    cfg = parse_config("[toy]\nphonemes = 16\n")
    with pytest.raises(ConfigError):
        cfg.seed


def test_bad_numeric_value_rejected():
    cfg = parse_config("[transducer]\nepochs = soon\n\n[run]\nseed = 1\n")
    with pytest.raises(ConfigError):
        cfg.transducer_train()


def test_missing_file_rejected(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


class TestCliExitCodes:
    def test_unknown_subcommand_is_2(self, capsys):
        assert run_command(["frobnicate"]) == 2

    def test_unknown_flag_is_2(self, capsys):
        assert run_command(["corpus-gen", "--config", "x", "--wat"]) == 2
        assert "usage" in capsys.readouterr().err.lower()

    def test_config_error_is_3(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[toy]\nphonemes = 16\n")  # no seed
        out = tmp_path / "corpus"
        assert run_command(["corpus-gen", "--config", str(cfg), "--out", str(out)]) == 3
        assert "seed" in capsys.readouterr().err

    def test_missing_config_file_is_3(self, tmp_path):
        assert (
            run_command(
                ["corpus-gen", "--config", str(tmp_path / "no.ini"), "--out", "d"]
            )
            == 3
        )

    def test_runtime_failure_is_1(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text(default_config_text(seed=5))
        # corpus directory does not exist -> manifest read fails at runtime
        code = run_command(
            [
                "train-interpreter",
                "--config", str(cfg),
                "--corpus", str(tmp_path / "missing"),
                "--out", str(tmp_path / "ckpt.tkc"),
            ]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestCorpusGenCommand:
    def _write_cfg(self, tmp_path, seed=11, n_train=24, n_eval=12):
        cfg = tmp_path / "c.ini"
        text = default_config_text(seed=seed).replace(
            "n_train = 800", f"n_train = {n_train}"
        ).replace("n_eval = 96", f"n_eval = {n_eval}")
        cfg.write_text(text)
        return cfg

    def test_deterministic_manifests(self, tmp_path, capsys):
        cfg = self._write_cfg(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        assert run_command(["corpus-gen", "--config", str(cfg), "--out", str(a)]) == 0
        assert run_command(["corpus-gen", "--config", str(cfg), "--out", str(b)]) == 0
        assert (a / "train.jsonl").read_bytes() == (b / "train.jsonl").read_bytes()
        assert (a / "eval.jsonl").read_bytes() == (b / "eval.jsonl").read_bytes()
        meta = json.loads((a / "meta.json").read_text())
        assert meta["n_train"] == 24 and meta["n_eval"] == 12

    def test_eval_combos_disjoint_from_train(self, tmp_path):
        from tokcascade.toyworld import read_manifest

        cfg = self._write_cfg(tmp_path, seed=13)
        out = tmp_path / "c"
        assert run_command(["corpus-gen", "--config", str(cfg), "--out", str(out)]) == 0
        train = read_manifest(out / "train.jsonl")
        evalset = read_manifest(out / "eval.jsonl")
        tc = {(u.rate, u.pitch, u.speaker) for u in train}
        ec = {(u.rate, u.pitch, u.speaker) for u in evalset}
        assert tc.isdisjoint(ec)


def test_init_config_roundtrip(tmp_path):
    out = tmp_path / "default.ini"
    assert run_command(["init-config", "--out", str(out), "--seed", "42"]) == 0
    cfg = load_config(out)
    assert cfg.seed == 42
