"""Run configuration: sectioned key-value files, strict parsing.

Unknown sections or keys are hard errors so a config file always means
exactly what it says; the seed is mandatory for reproducibility.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .acoustic import AcousticTrainConfig, DecodeConfig
from .errors import ConfigError
from .toyworld import ToySpec
from .transducer import TransducerTrainConfig

_SCHEMA: dict[str, dict[str, str]] = {
    "toy": {
        "phonemes": "16",
        "pitch_classes": "4",
        "rates": "1,2,3",
        "speakers": "8",
        "acoustic_vocab": "64",
        "frame_rate": "50",
    },
    "corpus": {
        "n_train": "800",
        "n_eval": "96",
        "holdout_combos": "12",
        "text_min": "2",
        "text_max": "12",
    },
    "transducer": {
        "dim": "64",
        "heads": "2",
        "text_blocks": "2",
        "pred_blocks": "2",
        "max_symbols_per_frame": "8",
        "epochs": "30",
        "batch_size": "16",
        "lr": "2e-3",
        "time_budget_s": "600",
    },
    "acoustic": {
        "dim": "128",
        "heads": "4",
        "blocks": "4",
        "prompt_blocks": "2",
        "conv_kernel": "7",
        "steps": "2500",
        "batch_size": "16",
        "lr": "1.5e-3",
        "coarse_prob": "0.7",
        "max_target_len": "24",
        "time_budget_s": "900",
    },
    "decode": {
        "coarse_iterations": "16",
        "temperature": "1.0",
    },
    "run": {
        "seed": "",  # mandatory, no default
    },
    "paths": {
        "corpus_dir": "",
        "checkpoint": "",
        "out_dir": "",
    },
}


@dataclass
class Config:
    values: dict[str, dict[str, str]]
    raw_text: str = ""
    source: str = "<defaults>"

    def _get(self, section: str, key: str) -> str:
        return self.values[section][key]

    def _int(self, section: str, key: str) -> int:
        raw = self._get(section, key)
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from exc

    def _float(self, section: str, key: str) -> float:
        raw = self._get(section, key)
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from exc

    @property
    def seed(self) -> int:
        raw = self._get("run", "seed")
        if not raw:
            raise ConfigError("[run] seed is mandatory")
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"[run] seed = {raw!r} is not an integer") from exc

    def path(self, key: str) -> str:
        return self._get("paths", key)

    def toy_spec(self) -> ToySpec:
        rates = tuple(
            int(v) for v in self._get("toy", "rates").split(",") if v.strip()
        )
        spec = ToySpec(
            phonemes=self._int("toy", "phonemes"),
            pitch_classes=self._int("toy", "pitch_classes"),
            rates=rates,
            speakers=self._int("toy", "speakers"),
            acoustic_vocab=self._int("toy", "acoustic_vocab"),
            frame_rate=self._int("toy", "frame_rate"),
        )
        if spec.acoustic_vocab % spec.speakers:
            raise ConfigError("acoustic_vocab must be divisible by speakers")
        return spec

    def corpus_params(self) -> dict:
        return {
            "n_train": self._int("corpus", "n_train"),
            "n_eval": self._int("corpus", "n_eval"),
            "holdout_combos": self._int("corpus", "holdout_combos"),
            "text_len": (self._int("corpus", "text_min"), self._int("corpus", "text_max")),
        }

    def transducer_train(self) -> TransducerTrainConfig:
        return TransducerTrainConfig(
            epochs=self._int("transducer", "epochs"),
            batch_size=self._int("transducer", "batch_size"),
            lr=self._float("transducer", "lr"),
            seed=self.seed,
            dim=self._int("transducer", "dim"),
            heads=self._int("transducer", "heads"),
            text_blocks=self._int("transducer", "text_blocks"),
            pred_blocks=self._int("transducer", "pred_blocks"),
            time_budget_s=self._float("transducer", "time_budget_s"),
        )

    def max_symbols_per_frame(self) -> int:
        return self._int("transducer", "max_symbols_per_frame")

    def acoustic_train(self) -> AcousticTrainConfig:
        return AcousticTrainConfig(
            steps=self._int("acoustic", "steps"),
            batch_size=self._int("acoustic", "batch_size"),
            lr=self._float("acoustic", "lr"),
            seed=self.seed,
            dim=self._int("acoustic", "dim"),
            heads=self._int("acoustic", "heads"),
            blocks=self._int("acoustic", "blocks"),
            prompt_blocks=self._int("acoustic", "prompt_blocks"),
            conv_kernel=self._int("acoustic", "conv_kernel"),
            coarse_prob=self._float("acoustic", "coarse_prob"),
            max_target_len=self._int("acoustic", "max_target_len"),
            time_budget_s=self._float("acoustic", "time_budget_s"),
        )

    def decode(self) -> DecodeConfig:
        return DecodeConfig(
            coarse_iterations=self._int("decode", "coarse_iterations"),
            temperature=self._float("decode", "temperature"),
            seed=self.seed,
        )


def default_values() -> dict[str, dict[str, str]]:
    return {section: dict(keys) for section, keys in _SCHEMA.items()}


def parse_config(text: str, source: str = "<string>") -> Config:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {source}: {exc}") from exc
    values = default_values()
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {source}")
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}] of {source}")
            values[section][key] = value
    return Config(values=values, raw_text=text, source=source)


def load_config(path: str | Path) -> Config:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(), source=str(p))


def default_config_text(seed: int = 1234) -> str:
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        for key, value in keys.items():
            if section == "run" and key == "seed":
                value = str(seed)
            if value:
                lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
