"""Semantic-to-acoustic stage: grouped masked LM with parallel decoding."""

from .decode import DecodeConfig, DecodeTrace, iterative_parallel_decode
from .masking import MaskPattern, sample_group_mask, schedule_keep_count
from .model import (
    AcousticPrompt,
    DepthwiseConv,
    GeneratorBlock,
    GroupedMaskedLM,
    PromptCache,
    masked_token_loss,
)
from .train import (
    AcousticTrainConfig,
    sample_training_mask,
    split_prompt,
    train_acoustic,
)

__all__ = [
    "AcousticPrompt",
    "AcousticTrainConfig",
    "DecodeConfig",
    "DecodeTrace",
    "DepthwiseConv",
    "GeneratorBlock",
    "GroupedMaskedLM",
    "MaskPattern",
    "PromptCache",
    "iterative_parallel_decode",
    "masked_token_loss",
    "sample_group_mask",
    "sample_training_mask",
    "schedule_keep_count",
    "split_prompt",
    "train_acoustic",
]
