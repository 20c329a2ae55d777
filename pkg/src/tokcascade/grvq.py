"""Grouped residual vector quantization.

Feature vectors are split into G contiguous groups; each group is quantized
by a depth-D cascade of codebooks, where depth j is fitted on the residuals
left after depths < j.  The default token geometry is two groups by two
depths, giving a 2x2 grid of code indices per frame.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DimensionError


@dataclass(frozen=True)
class AcousticTokenFrame:
    """Code indices for one frame: codes[group][depth]."""

    codes: tuple[tuple[int, ...], ...]

    def __getitem__(self, group_depth: tuple[int, int]) -> int:
        i, j = group_depth
        return self.codes[i][j]


@dataclass
class Codebooks:
    """Per (group, depth) tables of codeword vectors, immutable after fit.

    entries[i][j] has shape [K, feat_dim // groups].
    """

    groups: int
    depths: int
    entries: list[list[np.ndarray]]
    seed: int

    @property
    def codebook_size(self) -> int:
        return self.entries[0][0].shape[0]

    @property
    def feat_dim(self) -> int:
        return self.entries[0][0].shape[1] * self.groups

    def state_dict(self) -> dict[str, np.ndarray]:
        return {
            f"group{i}.depth{j}": self.entries[i][j]
            for i in range(self.groups)
            for j in range(self.depths)
        }


def _kmeans(x: np.ndarray, k: int, rng: np.random.Generator, iters: int = 20) -> np.ndarray:
    """Plain k-means with k-means++-style seeding; empty clusters are
    re-seeded to the farthest point.  Deterministic given the generator."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[c] = x[rng.integers(n)]
            continue
        probs = d2 / total
        centers[c] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, ((x - centers[c]) ** 2).sum(axis=1))
    for _ in range(iters):
        dists = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assign = dists.argmin(axis=1)
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                far = dists.min(axis=1).argmax()
                centers[c] = x[far]
    return centers


def fit_codebooks(
    features,
    groups: int = 2,
    depths: int = 2,
    codebook_size: int = 64,
    seed: int = 0,
    kmeans_iters: int = 20,
) -> Codebooks:
    """Fit the grouped residual codebook cascade on training vectors."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"expected [n, feat_dim] features, got shape {x.shape}")
    n, feat_dim = x.shape
    if n < codebook_size:
        raise DataError(f"need at least {codebook_size} vectors, got {n}")
    if feat_dim % groups != 0:
        raise ConfigError(f"feature dim {feat_dim} not divisible by {groups} groups")
    sub = feat_dim // groups
    rng = np.random.default_rng(seed)
    entries: list[list[np.ndarray]] = []
    for i in range(groups):
        residual = x[:, i * sub : (i + 1) * sub].copy()
        tables = []
        for _ in range(depths):
            centers = _kmeans(residual, codebook_size, rng, iters=kmeans_iters)
            idx = ((residual[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2).argmin(axis=1)
            residual = residual - centers[idx]
            tables.append(centers)
        entries.append(tables)
    return Codebooks(groups=groups, depths=depths, entries=entries, seed=seed)


def encode_frame(cb: Codebooks, x) -> AcousticTokenFrame:
    """Nearest codeword per group at depth 0, nearest-to-residual at deeper
    depths; ties broken toward the lowest index (argmin behavior)."""
    v = np.asarray(x, dtype=np.float64)
    if v.shape != (cb.feat_dim,):
        raise DimensionError(f"expected vector of dim {cb.feat_dim}, got {v.shape}")
    sub = cb.feat_dim // cb.groups
    codes = []
    for i in range(cb.groups):
        residual = v[i * sub : (i + 1) * sub].copy()
        picks = []
        for j in range(cb.depths):
            table = cb.entries[i][j]
            idx = int(((residual[None, :] - table) ** 2).sum(axis=1).argmin())
            picks.append(idx)
            residual = residual - table[idx]
        codes.append(tuple(picks))
    return AcousticTokenFrame(codes=tuple(codes))


def decode_frame(cb: Codebooks, frame: AcousticTokenFrame) -> np.ndarray:
    """Per group, sum the selected codewords across depths; concatenate."""
    parts = []
    for i in range(cb.groups):
        acc = np.zeros(cb.feat_dim // cb.groups)
        for j in range(cb.depths):
            idx = frame.codes[i][j]
            table = cb.entries[i][j]
            if not 0 <= idx < table.shape[0]:
                raise IndexError(f"code {idx} out of range for table of {table.shape[0]}")
            acc = acc + table[idx]
        parts.append(acc)
    return np.concatenate(parts)


def reconstruction_mse(cb: Codebooks, features, depth_limit: int | None = None) -> float:
    """Mean squared reconstruction error using only depths < depth_limit."""
    x = np.asarray(features, dtype=np.float64)
    limit = cb.depths if depth_limit is None else depth_limit
    sub = cb.feat_dim // cb.groups
    err = 0.0
    for v in x:
        rec = []
        for i in range(cb.groups):
            residual = v[i * sub : (i + 1) * sub].copy()
            acc = np.zeros(sub)
            for j in range(limit):
                table = cb.entries[i][j]
                idx = int(((residual[None, :] - table) ** 2).sum(axis=1).argmin())
                acc = acc + table[idx]
                residual = residual - table[idx]
            rec.append(acc)
        err += float(((np.concatenate(rec) - v) ** 2).mean())
    return err / len(x)
