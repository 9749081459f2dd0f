"""Encoders, gradients and augmentation."""
from biascope.encoders.augment import SCHEMES, AugmentationScheme, augment_batch, augment_pair
from biascope.encoders.autodiff import Tape, finite_difference_check, value_and_grad
from biascope.encoders.checkpoint import read_checkpoint, write_checkpoint
from biascope.encoders.models import (
    CNN_DESK,
    CNN_FULL,
    PRESETS,
    VIT_DESK,
    VIT_FULL,
    CnnConfig,
    StubConfig,
    VitConfig,
    cast_params,
    config_from_json,
    param_count,
    patchify,
    unpatchify,
)

__all__ = [
    "AugmentationScheme",
    "CNN_DESK",
    "CNN_FULL",
    "CnnConfig",
    "PRESETS",
    "SCHEMES",
    "StubConfig",
    "Tape",
    "VIT_DESK",
    "VIT_FULL",
    "VitConfig",
    "augment_batch",
    "augment_pair",
    "cast_params",
    "config_from_json",
    "finite_difference_check",
    "param_count",
    "patchify",
    "read_checkpoint",
    "unpatchify",
    "value_and_grad",
    "write_checkpoint",
]
