"""Deterministic parameter-update rules (SGD and Adam)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DimensionError
from .tensor import Tensor


@dataclass
class OptimConfig:
    kind: str = "adam"  # "sgd" | "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


class SGD:
    def __init__(self, lr: float):
        self.lr = float(lr)

    def step(self, params: list[Tensor], grads: list[np.ndarray] | None = None) -> None:
        grads = _resolve_grads(params, grads)
        for p, g in zip(params, grads):
            p.data -= self.lr * g


class Adam:
    """Adam with bias correction; per-parameter moments keyed by identity."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self._m: dict[int, np.ndarray] = {}
        self._v: dict[int, np.ndarray] = {}

    def step(self, params: list[Tensor], grads: list[np.ndarray] | None = None) -> None:
        grads = _resolve_grads(params, grads)
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g in zip(params, grads):
            key = id(p)
            m = self._m.get(key)
            if m is None:
                m = np.zeros_like(p.data)
                v = np.zeros_like(p.data)
            else:
                v = self._v[key]
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            self._m[key] = m
            self._v[key] = v
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _resolve_grads(params: list[Tensor], grads: list[np.ndarray] | None) -> list[np.ndarray]:
    if grads is None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
    if len(grads) != len(params):
        raise DimensionError(f"{len(params)} params but {len(grads)} grads")
    for p, g in zip(params, grads):
        if np.shape(g) != p.data.shape:
            raise DimensionError(f"grad shape {np.shape(g)} != param shape {p.data.shape}")
    return [np.asarray(g, dtype=np.float64) for g in grads]


def make_optimizer(cfg: OptimConfig):
    if cfg.kind == "sgd":
        return SGD(cfg.lr)
    if cfg.kind == "adam":
        return Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    raise ConfigError(f"unknown optimizer kind {cfg.kind!r}")


def optimizer_step(params: list[Tensor], grads, config) -> list[Tensor]:
    """One functional update step: params are modified in place and returned."""
    opt = config if isinstance(config, (SGD, Adam)) else make_optimizer(config)
    opt.step(params, grads)
    return params


def zero_grads(params: list[Tensor]) -> None:
    for p in params:
        p.grad = None
