"""Symmetry-guided anomaly segmentation for 2-D grayscale rasters."""

from .fbb import BoundingBox, FbbResult, Side, find_bounding_box
from .imgio import BinaryMask, GrayImage, load_gray_pgm, write_gray_pgm, write_mask_pgm
from .ocsvm import OcsvmModel, TrainConfig, decide, train
from .phantom import PhantomSpec, generate, standard_lesion_spec
from .pipeline import PipelineConfig, SegmentationResult, evaluate, segment
from .preprocess import DiffusionParams, diffuse, otsu_threshold, skull_strip

__all__ = [
    "BinaryMask",
    "BoundingBox",
    "DiffusionParams",
    "FbbResult",
    "GrayImage",
    "OcsvmModel",
    "PhantomSpec",
    "PipelineConfig",
    "SegmentationResult",
    "Side",
    "TrainConfig",
    "decide",
    "diffuse",
    "evaluate",
    "find_bounding_box",
    "generate",
    "load_gray_pgm",
    "otsu_threshold",
    "segment",
    "skull_strip",
    "standard_lesion_spec",
    "train",
    "write_gray_pgm",
    "write_mask_pgm",
]

__version__ = "0.1.0"
