"""End-to-end segmentation: strip, diffuse, locate, train, classify, score.

Training samples come only from the central part of the detected box (the
classifier is one-class: no background pixels are ever used for training);
classification then covers every pixel of the head mask.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fbb, ocsvm, preprocess
from .imgio import BinaryMask, GrayImage


@dataclass(frozen=True)
class PipelineConfig:
    diffusion: preprocess.DiffusionParams = preprocess.DiffusionParams()
    bin_count: int = fbb.DEFAULT_BIN_COUNT
    detection_threshold: float = fbb.DEFAULT_DETECTION_THRESHOLD
    # training wants a region wide enough to sample the anomaly's intensity
    # spread: the decision surface passes through the outermost margin vectors,
    # so an overly pure central sample rejects ordinary in-lesion variation
    central_fraction: float = 0.8
    patch_size: int = 3
    train: ocsvm.TrainConfig = ocsvm.TrainConfig(nu=0.01)
    cleanup: bool = False

    def __post_init__(self):
        if not (0.0 < self.central_fraction <= 1.0):
            raise ValueError(f"central_fraction must be in (0, 1], got {self.central_fraction}")
        if self.patch_size not in (1, 3, 5):
            raise ValueError(f"patch_size must be 1, 3, or 5, got {self.patch_size}")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass(frozen=True)
class MetricsReport:
    counts: ConfusionCounts
    accuracy: float
    si: float


@dataclass(frozen=True)
class SegmentationResult:
    mask: BinaryMask
    box: fbb.FbbResult
    model: Optional[ocsvm.OcsvmModel]
    head: preprocess.HeadMaskResult
    smoothed: GrayImage


def central_region(box: fbb.BoundingBox, fraction: float) -> fbb.BoundingBox:
    """Concentric sub-box with each half-extent scaled by `fraction` (never empty)."""
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    cr = (box.row_min + box.row_max) // 2
    cc = (box.col_min + box.col_max) // 2
    half_r = int(np.floor(fraction / 2.0 * box.height))
    half_c = int(np.floor(fraction / 2.0 * box.width))
    return fbb.BoundingBox(
        max(box.row_min, cr - half_r),
        min(box.row_max, cr + half_r),
        max(box.col_min, cc - half_c),
        min(box.col_max, cc + half_c),
    )


def region_pixels(mask: BinaryMask, region: fbb.BoundingBox):
    """(rows, cols) of in-mask pixels inside `region`, row-major order."""
    rr, cc = np.nonzero(
        mask.bits[region.row_min : region.row_max + 1, region.col_min : region.col_max + 1]
    )
    return rr + region.row_min, cc + region.col_min


def extract_features(
    image: GrayImage, mask: BinaryMask, region: fbb.BoundingBox, patch_size: int
) -> np.ndarray:
    """One row per in-mask pixel: the centered intensity patch scaled by 1/255.

    Patches are gathered with edge replication so border pixels get full-size
    vectors. Row order matches `region_pixels`.
    """
    if patch_size % 2 != 1 or patch_size < 1:
        raise ValueError(f"patch_size must be odd and positive, got {patch_size}")
    rows, cols = region_pixels(mask, region)
    half = patch_size // 2
    padded = np.pad(image.pixels, half, mode="edge")
    cols_out = []
    for dr in range(patch_size):
        for dc in range(patch_size):
            cols_out.append(padded[rows + dr, cols + dc])
    return np.stack(cols_out, axis=1) / 255.0


def _scores_parallel(model, feats, jobs: int) -> np.ndarray:
    if jobs <= 1 or feats.shape[0] < 2 * jobs:
        return ocsvm.decision_scores(model, feats)
    from concurrent.futures import ThreadPoolExecutor

    chunks = np.array_split(feats, jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(lambda c: ocsvm.decision_scores(model, c), chunks))
    return np.concatenate(parts)


def segment(
    image: GrayImage, config: PipelineConfig = PipelineConfig(), jobs: int = 1
) -> SegmentationResult:
    head = preprocess.skull_strip(image)
    smoothed = preprocess.diffuse(head.stripped, config.diffusion)
    box_res = fbb.find_bounding_box(
        smoothed, head.mask, config.bin_count, config.detection_threshold
    )
    empty = BinaryMask(np.zeros_like(head.mask.bits))
    if not box_res.found:
        return SegmentationResult(empty, box_res, None, head, smoothed)

    central = central_region(box_res.box, config.central_fraction)
    train_feats = extract_features(smoothed, head.mask, central, config.patch_size)

    full = fbb.BoundingBox(0, image.height - 1, 0, image.width - 1)
    rows, cols = region_pixels(head.mask, full)
    feats = extract_features(smoothed, head.mask, full, config.patch_size)

    train_cfg = config.train
    if train_cfg.gamma is None:
        # kernel width from the spread of the whole head, not the near-constant
        # training patch; the training region alone collapses the length scale
        train_cfg = dataclasses.replace(train_cfg, gamma=ocsvm.default_gamma(feats))
    model = ocsvm.train(train_feats, train_cfg)
    scores = _scores_parallel(model, feats, jobs)
    bits = np.zeros_like(head.mask.bits)
    bits[rows[scores >= 0.0], cols[scores >= 0.0]] = True
    if config.cleanup and bits.any():
        bits = preprocess.largest_component(bits)
    return SegmentationResult(BinaryMask(bits), box_res, model, head, smoothed)


def evaluate(predicted: BinaryMask, truth: BinaryMask, domain: BinaryMask) -> MetricsReport:
    """Pixel confusion counts, accuracy, and similarity index over the domain."""
    shapes = {predicted.bits.shape, truth.bits.shape, domain.bits.shape}
    if len(shapes) != 1:
        raise ValueError("predicted/truth/domain dimension mismatch")
    d = domain.bits
    p = predicted.bits[d]
    t = truth.bits[d]
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(np.count_nonzero(~p & ~t))
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 1.0
    denom = 2 * tp + fp + fn
    si = (2 * tp / denom) if denom else 1.0
    return MetricsReport(ConfusionCounts(tp, fp, fn, tn), accuracy, si)


def metrics_to_json(report: MetricsReport) -> str:
    doc = {
        "tp": report.counts.tp,
        "fp": report.counts.fp,
        "fn": report.counts.fn,
        "tn": report.counts.tn,
        "accuracy": round(report.accuracy, 6),
        "si": round(report.si, 6),
    }
    return json.dumps(doc, indent=2)


def config_from_dict(doc: dict) -> PipelineConfig:
    """Build a pipeline config from a JSON-style mapping; unknown keys are an error."""
    allowed = {
        "diffusion",
        "bin_count",
        "detection_threshold",
        "central_fraction",
        "patch_size",
        "train",
        "cleanup",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    defaults = PipelineConfig()

    diffusion = defaults.diffusion
    if "diffusion" in doc:
        d = dict(doc["diffusion"])
        bad = set(d) - {"lam", "k", "iterations", "function", "neighborhood"}
        if bad:
            raise ValueError(f"unknown diffusion keys: {sorted(bad)}")
        if "function" in d:
            d["function"] = preprocess.ConductionFunction(d["function"])
        diffusion = preprocess.DiffusionParams(**d)

    train = defaults.train
    if "train" in doc:
        t = dict(doc["train"])
        bad = set(t) - {"nu", "gamma", "tolerance", "max_passes", "seed", "max_samples"}
        if bad:
            raise ValueError(f"unknown train keys: {sorted(bad)}")
        train = ocsvm.TrainConfig(**t)

    return PipelineConfig(
        diffusion=diffusion,
        bin_count=int(doc.get("bin_count", defaults.bin_count)),
        detection_threshold=float(doc.get("detection_threshold", defaults.detection_threshold)),
        central_fraction=float(doc.get("central_fraction", defaults.central_fraction)),
        patch_size=int(doc.get("patch_size", defaults.patch_size)),
        train=train,
        cleanup=bool(doc.get("cleanup", defaults.cleanup)),
    )
