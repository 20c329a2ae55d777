"""Group-shared mask patterns and the iteration schedule.

A mask flag lives at (position, depth level) and applies to *both* groups
at once: the coarse tokens of group 0 and group 1 at a position are always
masked or unmasked together, and likewise at the fine level.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, ContractError

COARSE, FINE = 0, 1
LEVELS = {"coarse": COARSE, "fine": FINE}


@dataclass
class MaskPattern:
    """Boolean flags per position for each depth level, shared across groups."""

    coarse: np.ndarray
    fine: np.ndarray

    def __post_init__(self):
        self.coarse = np.asarray(self.coarse, dtype=bool)
        self.fine = np.asarray(self.fine, dtype=bool)
        if self.coarse.shape != self.fine.shape or self.coarse.ndim != 1:
            raise ConfigError("mask levels must be equal-length vectors")

    @property
    def length(self) -> int:
        return self.coarse.size

    def level(self, j: int) -> np.ndarray:
        return self.coarse if j == COARSE else self.fine

    def masked_entries(self) -> int:
        """Count of masked (position, group, depth) cells; two groups each."""
        return 2 * int(self.coarse.sum() + self.fine.sum())

    def union(self, other: "MaskPattern") -> "MaskPattern":
        return MaskPattern(self.coarse | other.coarse, self.fine | other.fine)

    @staticmethod
    def none(length: int) -> "MaskPattern":
        return MaskPattern(np.zeros(length, bool), np.zeros(length, bool))

    @staticmethod
    def full(length: int, level: str) -> "MaskPattern":
        m = MaskPattern.none(length)
        m.level(LEVELS[level])[:] = True
        return m


def sample_group_mask(length: int, ratio: float, level: str, seed: int) -> MaskPattern:
    """Mask ceil(ratio * length) uniformly chosen positions at one level.

    The other level is untouched; both groups share the chosen positions.
    """
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"mask ratio {ratio} outside [0, 1]")
    if level not in LEVELS:
        raise ConfigError(f"unknown mask level {level!r}")
    # tiny slack so exact products like 0.1 * 10 do not round up past the count
    count = math.ceil(ratio * length - 1e-12)
    rng = np.random.default_rng(seed)
    positions = rng.choice(length, size=count, replace=False)
    mask = MaskPattern.none(length)
    mask.level(LEVELS[level])[positions] = True
    return mask


def schedule_keep_count(iteration: int, total_iterations: int, length: int) -> int:
    """Coarse positions still masked after `iteration` (cosine schedule).

    ceil(length * cos(pi * n / (2 * N))) for n < N, and exactly 0 at the
    final iteration; non-increasing in n.
    """
    if not 1 <= iteration <= total_iterations:
        raise ContractError(
            f"iteration {iteration} outside 1..{total_iterations}"
        )
    if iteration == total_iterations:
        return 0
    return math.ceil(length * math.cos(math.pi * iteration / (2 * total_iterations)))
