"""Text-to-semantic stage: monotonic-alignment transducer."""

from .decode import greedy_decode
from .lattice import (
    AlignmentPath,
    brute_force_loss,
    enumerate_alignment_paths,
    path_count,
    path_from_frames,
    remove_blanks,
    transducer_loss,
    uniform_logit_loss,
)
from .model import BASELINE, COMPACT, JointNetwork, TransducerModel, TransducerVariant
from .train import TransducerTrainConfig, sample_prompt, train_transducer

__all__ = [
    "BASELINE",
    "COMPACT",
    "AlignmentPath",
    "JointNetwork",
    "TransducerModel",
    "TransducerTrainConfig",
    "TransducerVariant",
    "brute_force_loss",
    "enumerate_alignment_paths",
    "greedy_decode",
    "path_count",
    "path_from_frames",
    "remove_blanks",
    "sample_prompt",
    "train_transducer",
    "transducer_loss",
    "uniform_logit_loss",
]
