"""Skull stripping by automatic global thresholding and edge-preserving diffusion.

The diffusion step is the Perona-Malik scheme extended to an 8-connected
neighborhood: every pixel is updated by a lambda-weighted sum over all eight
directional finite differences, each scaled by a conduction coefficient
computed from that difference's magnitude.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .imgio import BinaryMask, GrayImage


class DegenerateHistogramError(ValueError):
    """All intensity mass sits in a single gray level; no threshold separates two classes."""


class EmptyForegroundError(ValueError):
    """Thresholding produced no foreground pixels."""


class ConductionFunction(Enum):
    EXPONENTIAL = "exponential"
    RATIONAL = "rational"


@dataclass(frozen=True)
class DiffusionParams:
    """Parameters for the iterative diffusion filter.

    lam is capped at 0.125: with eight equally weighted directions the center
    coefficient is 1 - 8*lam, which goes negative (overshoot) past 1/8.
    """

    lam: float = 0.125
    k: float = 15.0
    iterations: int = 10
    function: ConductionFunction = ConductionFunction.EXPONENTIAL
    neighborhood: int = 8

    def __post_init__(self):
        if not (0.0 < self.lam <= 0.125):
            raise ValueError(f"lam must be in (0, 0.125], got {self.lam}")
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.neighborhood not in (4, 8):
            raise ValueError(f"neighborhood must be 4 or 8, got {self.neighborhood}")


@dataclass(frozen=True)
class HeadMaskResult:
    mask: BinaryMask
    threshold: int
    stripped: GrayImage


def _histogram_256(image: GrayImage) -> np.ndarray:
    idx = np.clip(np.rint(image.pixels), 0, 255).astype(np.int64)
    return np.bincount(idx.ravel(), minlength=256)


def otsu_threshold(image: GrayImage) -> int:
    """Threshold t in [0, 255] maximizing between-class variance of {<=t} vs {>t}.

    Ties break to the lowest t. Comparisons are done in exact integer
    arithmetic so the maximizer never depends on floating-point rounding.
    """
    hist = _histogram_256(image)
    total = int(hist.sum())
    total_sum = int(np.dot(np.arange(256), hist))
    best_t = -1
    best_num, best_den = -1, 1  # between-class variance as exact fraction num/den
    n0 = 0
    s0 = 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        # n0*n1*(mu0-mu1)^2 == (s0*n1 - s1*n0)^2 / (n0*n1)
        num = (s0 * n1 - (total_sum - s0) * n0) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    if best_t < 0:
        raise DegenerateHistogramError("degenerate histogram: image is constant")
    return best_t


_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def largest_component(bits: np.ndarray) -> np.ndarray:
    """Largest 8-connected true component; equal sizes break to lowest top-left index."""
    labels, n = ndimage.label(bits, structure=_EIGHT_CONNECTED)
    if n == 0:
        return np.zeros_like(bits)
    counts = np.bincount(labels.ravel())
    counts[0] = 0
    best = counts.max()
    candidates = np.flatnonzero(counts == best)
    if len(candidates) > 1:
        flat = labels.ravel()
        candidates = sorted(candidates, key=lambda l: int(np.flatnonzero(flat == l)[0]))
    return labels == candidates[0]


def fill_holes(bits: np.ndarray) -> np.ndarray:
    """Flood-fill background from the raster border; unreached false pixels become true."""
    return ndimage.binary_fill_holes(bits)


def skull_strip(image: GrayImage) -> HeadMaskResult:
    """Head mask = largest 8-connected above-threshold component with holes filled."""
    t = otsu_threshold(image)
    fg = image.pixels > t
    if not fg.any():
        raise EmptyForegroundError("no head region found above the threshold")
    mask_bits = fill_holes(largest_component(fg))
    stripped = np.where(mask_bits, image.pixels, 0.0)
    return HeadMaskResult(BinaryMask(mask_bits), t, GrayImage(stripped))


def conduction(gradient_magnitude, k: float, function: ConductionFunction):
    """Edge-stopping weight in (0, 1]; 1 at zero gradient, decreasing with magnitude."""
    g = np.asarray(gradient_magnitude, dtype=np.float64)
    r = g / k
    if function is ConductionFunction.EXPONENTIAL:
        out = np.exp(-(r * r))
    elif function is ConductionFunction.RATIONAL:
        out = 1.0 / (1.0 + r * r)
    else:
        raise ValueError(f"unknown conduction function {function!r}")
    return out if out.ndim else float(out)


# (dr, dc) offsets grouped into left-right mirror pairs; summing each pair
# first keeps the update bit-identical under horizontal mirroring (addition
# of two terms commutes exactly, longer chains do not)
_OFFSET_PAIRS_4 = [((-1, 0),), ((1, 0),), ((0, -1), (0, 1))]
_OFFSET_PAIRS_8 = _OFFSET_PAIRS_4 + [((-1, -1), (-1, 1)), ((1, -1), (1, 1))]


def _neighbor(img: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shifted copy; out-of-range positions replicate the center pixel (zero difference)."""
    h, w = img.shape
    out = img.copy()
    dst_r = slice(max(0, -dr), h - max(0, dr))
    dst_c = slice(max(0, -dc), w - max(0, dc))
    src_r = slice(max(0, dr), h - max(0, -dr))
    src_c = slice(max(0, dc), w - max(0, -dc))
    out[dst_r, dst_c] = img[src_r, src_c]
    return out


def diffuse(image: GrayImage, params: DiffusionParams) -> GrayImage:
    """Iterative anisotropic diffusion over a 4- or 8-connected neighborhood."""
    img = image.pixels.copy()
    pairs = _OFFSET_PAIRS_8 if params.neighborhood == 8 else _OFFSET_PAIRS_4
    for _ in range(params.iterations):
        delta = np.zeros_like(img)
        for group in pairs:
            flux = None
            for dr, dc in group:
                grad = _neighbor(img, dr, dc) - img
                term = conduction(np.abs(grad), params.k, params.function) * grad
                flux = term if flux is None else flux + term
            delta += flux
        img = img + params.lam * delta
    return GrayImage(img)
