"""Depth-to-regions segmentation: U-Net model, weighted BCE, train/infer tool.

Companion to the grasp-selection package; the two meet only at the file
formats (16-bit millimeter depth PNGs in, 3-plane region PNGs out).
"""

from .data import (CLASS_NAMES, TrainSample, augment, center_crop,
                   labels_from_paint, load_depth_png, load_regions_png,
                   load_sample, save_depth_png, save_regions_png, scan_dataset,
                   split_dataset, standardize)
from .errors import (DatasetError, FormatError, ParameterError, SegnetError,
                     ShapeError)
from .loss import DEFAULT_POSITIVE_WEIGHT, LossConfig, weighted_bce_loss
from .model import (DEFAULT_BASE_CHANNELS, DEFAULT_CLASSES, DEFAULT_LEVELS,
                    SizeWalk, UNet, build_unet, plan_sizes)
from .train import TrainResult, infer, load_checkpoint, train

__all__ = [
    "CLASS_NAMES",
    "DEFAULT_BASE_CHANNELS",
    "DEFAULT_CLASSES",
    "DEFAULT_LEVELS",
    "DEFAULT_POSITIVE_WEIGHT",
    "DatasetError",
    "FormatError",
    "LossConfig",
    "ParameterError",
    "SegnetError",
    "ShapeError",
    "SizeWalk",
    "TrainResult",
    "TrainSample",
    "UNet",
    "augment",
    "build_unet",
    "center_crop",
    "infer",
    "labels_from_paint",
    "load_checkpoint",
    "load_depth_png",
    "load_regions_png",
    "load_sample",
    "plan_sizes",
    "save_depth_png",
    "save_regions_png",
    "scan_dataset",
    "split_dataset",
    "standardize",
    "train",
    "weighted_bce_loss",
]
