"""Metrics and throughput benchmarks.

Token error rate is plain Levenshtein distance over reference length;
speaker accuracy counts exact recoveries from the oracle classifier
(rejects count as errors); NLL is the mean per-utterance transducer loss;
the real-time factor divides generated audio seconds by wall seconds with
a warm-up run excluded and the median of repeated timed runs reported.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, InputError
from .toyworld import ToySpec, classify_speaker

THREADS_ENV = "TOKCASCADE_THREADS"


@dataclass
class BenchReport:
    variant: str
    rtf: float
    nll: float | None = None
    ter: float | None = None
    speaker_accuracy: float | None = None
    forward_passes: int | None = None
    utterances: int = 0
    config_hash: str = ""
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))


def token_error_rate(hyp, ref) -> float:
    """Levenshtein distance (unit insert/delete/substitute) over len(ref)."""
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise ContractError("empty reference")
    prev = list(range(len(hyp) + 1))
    for i, r in enumerate(ref, start=1):
        cur = [i] + [0] * len(hyp)
        for j, h in enumerate(hyp, start=1):
            cur[j] = min(
                prev[j] + 1,  # delete from ref
                cur[j - 1] + 1,  # insert
                prev[j - 1] + (0 if r == h else 1),
            )
        prev = cur
    return prev[-1] / len(ref)


def speaker_accuracy(spec: ToySpec, semantics, grids, expected_speakers) -> float:
    """Fraction of grids whose recovered speaker matches the expectation."""
    semantics, grids, expected = list(semantics), list(grids), list(expected_speakers)
    if not semantics:
        raise ContractError("empty evaluation list")
    if not (len(semantics) == len(grids) == len(expected)):
        raise InputError("misaligned evaluation lists")
    hits = 0
    for sem, grid, want in zip(semantics, grids, expected):
        got = classify_speaker(spec, sem, grid)
        hits += int(got == want)
    return hits / len(semantics)


def eval_nll(loss_fn, dataset) -> float:
    """Mean per-utterance loss; loss_fn(item) -> float."""
    items = list(dataset)
    if not items:
        raise ContractError("empty dataset")
    return float(np.mean([float(loss_fn(item)) for item in items]))


def rtf_from(frames: int, seconds: float, frame_rate: int) -> float:
    """Generated audio seconds per wall second."""
    if seconds <= 0:
        raise ContractError("non-positive wall time")
    return (frames / frame_rate) / seconds


def worker_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def measure_rtf(
    decoder,
    dataset,
    frame_rate: int,
    runs: int = 5,
    threaded: bool = False,
) -> float:
    """Median-of-runs RTF for `decoder(item) -> sequence` over the dataset.

    The first (warm-up) run is discarded.  With threaded=True the decode
    fans out over TOKCASCADE_THREADS workers and is labeled by the caller;
    model load and corpus I/O stay outside the timed region by contract.
    """
    items = list(dataset)
    if not items:
        raise ContractError("empty dataset")

    def one_run() -> float:
        start = time.perf_counter()
        if threaded and worker_threads() > 1:
            with ThreadPoolExecutor(max_workers=worker_threads()) as pool:
                outputs = list(pool.map(decoder, items))
        else:
            outputs = [decoder(item) for item in items]
        elapsed = time.perf_counter() - start
        frames = sum(len(out) for out in outputs)
        return rtf_from(frames, elapsed, frame_rate)

    one_run()  # warm-up, excluded
    return float(np.median([one_run() for _ in range(runs)]))


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_reports(reports: list[BenchReport], path: str | Path) -> None:
    Path(path).write_text("\n".join(r.to_json() for r in reports) + "\n")


def format_report_table(reports: list[BenchReport]) -> str:
    header = f"{'variant':<12} {'RTF':>10} {'NLL':>10} {'TER':>8} {'spk-acc':>8} {'fwd':>6}"
    rows = [header, "-" * len(header)]
    for r in reports:
        rows.append(
            f"{r.variant:<12} {r.rtf:>10.2f} "
            f"{(f'{r.nll:.4f}' if r.nll is not None else '-'):>10} "
            f"{(f'{r.ter:.4f}' if r.ter is not None else '-'):>8} "
            f"{(f'{r.speaker_accuracy:.3f}' if r.speaker_accuracy is not None else '-'):>8} "
            f"{(str(r.forward_passes) if r.forward_passes is not None else '-'):>6}"
        )
    return "\n".join(rows)
