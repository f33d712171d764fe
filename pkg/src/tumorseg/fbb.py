"""Symmetry-based bounding-box localization.

Finds the axis-aligned rectangle on one side of the brain's left-right
symmetry axis whose gray-level histogram is most dissimilar from its mirror
reflection, while the rest of that side stays similar to its reflection.
Similarity is the Bhattacharyya coefficient between normalized histograms.

Search strategy: a vertical pass picks the row interval, then a horizontal
pass (restricted to the winning rows) picks the column interval. Each pass
slides a short strip window along its axis, scores the window contents
against their reflection, and takes the contiguous run of positions around
the dissimilarity peak (half-maximum cut). Histograms are collected from a
slightly eroded mask so the strong intensity gradient along the mask
boundary cannot masquerade as an anomaly.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .imgio import BinaryMask, GrayImage

DEFAULT_BIN_COUNT = 64
DEFAULT_DETECTION_THRESHOLD = 0.2

_INTENSITY_LO = 0.0
_INTENSITY_HI = 256.0


class HistogramError(ValueError):
    """Incompatible or empty histogram operands."""


class Side(Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class Histogram:
    """Normalized gray-level histogram over uniform bins on [0, 256)."""

    bin_count: int
    counts: np.ndarray
    probs: np.ndarray
    lo: float = _INTENSITY_LO
    hi: float = _INTENSITY_HI

    @property
    def empty(self) -> bool:
        return float(self.counts.sum()) == 0.0


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle, all coordinates inclusive."""

    row_min: int
    row_max: int
    col_min: int
    col_max: int

    def __post_init__(self):
        if self.row_min > self.row_max or self.col_min > self.col_max:
            raise ValueError(f"degenerate box {self}")

    @property
    def height(self) -> int:
        return self.row_max - self.row_min + 1

    @property
    def width(self) -> int:
        return self.col_max - self.col_min + 1


@dataclass(frozen=True)
class FbbResult:
    box: Optional[BoundingBox]
    side: Side
    axis_col: float
    inside_dissimilarity: float
    found: bool


def _bin_indices(values: np.ndarray, bin_count: int) -> np.ndarray:
    idx = np.floor(values * (bin_count / _INTENSITY_HI)).astype(np.int64)
    return np.clip(idx, 0, bin_count - 1)


def _from_counts(counts: np.ndarray, bin_count: int) -> Histogram:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    probs = counts / total if total > 0 else np.zeros_like(counts)
    return Histogram(bin_count, counts, probs)


def build_histogram(
    image: GrayImage, mask: BinaryMask, region: BoundingBox, bin_count: int
) -> Histogram:
    """Histogram of pixels inside both `region` and `mask`."""
    if bin_count < 2:
        raise ValueError(f"bin_count must be >= 2, got {bin_count}")
    if (
        region.row_min < 0
        or region.col_min < 0
        or region.row_max >= image.height
        or region.col_max >= image.width
    ):
        raise ValueError(f"region {region} outside {image.height}x{image.width} raster")
    sub = image.pixels[region.row_min : region.row_max + 1, region.col_min : region.col_max + 1]
    sel = mask.bits[region.row_min : region.row_max + 1, region.col_min : region.col_max + 1]
    vals = sub[sel]
    counts = np.bincount(_bin_indices(vals, bin_count), minlength=bin_count)
    return _from_counts(counts, bin_count)


def _bc_counts(c1: np.ndarray, c2: np.ndarray) -> float:
    """BC from raw counts: exact 1.0 for identical counts, exact 0.0 for disjoint support."""
    n1 = float(c1.sum())
    n2 = float(c2.sum())
    if n1 == 0.0 or n2 == 0.0:
        raise HistogramError("empty histogram operand")
    num = float(np.sqrt(c1 * c2).sum())
    return num / np.sqrt(n1 * n2)


def bhattacharyya(p: Histogram, q: Histogram) -> float:
    """Sum over bins of sqrt(p_i * q_i); 1 iff identical, 0 iff disjoint supports."""
    if p.bin_count != q.bin_count:
        raise HistogramError(f"bin count mismatch: {p.bin_count} vs {q.bin_count}")
    if p.empty or q.empty:
        raise HistogramError("empty histogram operand")
    return _bc_counts(p.counts, q.counts)


def _mirror_cols(cols: np.ndarray, axis_col: float) -> np.ndarray:
    # axis_col lives on the half-integer grid, so 2*axis_col - col is integral
    return np.floor(2.0 * axis_col - cols + 0.5).astype(np.int64)


def estimate_axis(image: GrayImage, mask: BinaryMask) -> float:
    """Column of the left-right symmetry axis.

    Candidate columns lie on a half-integer grid within +/-10% of the raster
    width around the mask centroid column; the winner maximizes the BC between
    the left-half histogram and the histogram of its mirror reflection.
    """
    rows, cols = np.nonzero(mask.bits)
    if len(rows) == 0:
        raise ValueError("empty mask")
    centroid = float(cols.mean())
    w = image.width
    lo = max(0.0, centroid - 0.1 * w)
    hi = min(w - 1.0, centroid + 0.1 * w)
    candidates = np.arange(np.ceil(2.0 * lo), np.floor(2.0 * hi) + 1.0) / 2.0
    vals = image.pixels[rows, cols]
    nb = DEFAULT_BIN_COUNT
    bins = _bin_indices(vals, nb)
    # extra sentinel bin marks mirrors that leave the mask or the raster, so a
    # candidate axis is rewarded only when the mask itself reflects onto itself
    h_a = np.bincount(bins, minlength=nb + 1).astype(np.float64)

    best = (np.inf, np.inf, np.inf)  # (-bc, |c-centroid|, c) minimized lexicographically
    best_c = centroid
    for c in candidates:
        mcol = _mirror_cols(cols, c)
        inb = (mcol >= 0) & (mcol < w)
        ok = inb & mask.bits[rows, np.clip(mcol, 0, w - 1)]
        mirror_bins = np.full(len(cols), nb)
        mirror_bins[ok] = _bin_indices(image.pixels[rows[ok], mcol[ok]], nb)
        h_b = np.bincount(mirror_bins, minlength=nb + 1).astype(np.float64)
        bc = _bc_counts(h_a, h_b)
        key = (-bc, abs(c - centroid), float(c))
        if key < best:
            best = key
            best_c = float(c)
    return best_c


def _bc_array(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise-over-last-axis BC for stacked count vectors.

    One empty operand scores 0 (no similarity); both empty scores 1.
    """
    na = a.sum(axis=-1)
    nb = b.sum(axis=-1)
    num = np.sqrt(a * b).sum(axis=-1)
    den = np.sqrt(na * nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        bc = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    both_empty = (na == 0) & (nb == 0)
    return np.where(both_empty, 1.0, bc)


# profile positions supported by fewer pixels than this are ignored; sparse
# histograms score spuriously dissimilar through sampling noise alone
_MIN_SUPPORT = 16

# strip window half-width for the interval profiles
_WINDOW_HALF = 3

# erosion depth applied to the mask before histogram collection
_CORE_EROSION = 3

# a detection must be backed by an intensity shift of at least this many gray
# levels between the box and its reflection; histogram bins are 4 levels wide,
# so narrow distributions sitting on opposite sides of a bin edge can look
# fully dissimilar while differing by almost nothing
_MIN_MEDIAN_SHIFT = 8.0


def _sampling_bias(bins: int, nt: np.ndarray, nm: np.ndarray) -> np.ndarray:
    """Expected 1-BC of two same-distribution multinomial samples.

    Roughly (K-1)/4 * (1/nt + 1/nm) for K-bin histograms; subtracting it keeps
    sparse windows from scoring spuriously dissimilar through noise alone.
    """
    return (bins - 1) / 4.0 * (1.0 / np.maximum(nt, 1.0) + 1.0 / np.maximum(nm, 1.0))


def _windowed_interval(counts_t: np.ndarray, counts_m: np.ndarray, half: int = _WINDOW_HALF):
    """Interval from the dissimilarity profile of a sliding strip window.

    counts_* have shape (n, bins): per-row (or per-column) histograms of the
    tested side and of its mirror reflection. Each position is scored by the
    mismatch of the window [p-half, p+half] against its reflection, corrected
    for small-sample bias; the returned interval is the contiguous run around
    the peak where the profile stays above half the peak value.
    """
    n, bins = counts_t.shape
    zeros = np.zeros((1, bins))
    cum_t = np.concatenate([zeros, np.cumsum(counts_t, axis=0)])
    cum_m = np.concatenate([zeros, np.cumsum(counts_m, axis=0)])
    support = max(_MIN_SUPPORT, int(np.ceil(0.01 * cum_t[-1].sum())))

    pos = np.arange(n)
    lo = np.maximum(pos - half, 0)
    hi = np.minimum(pos + half + 1, n)
    t = cum_t[hi] - cum_t[lo]
    m = cum_m[hi] - cum_m[lo]
    d = 1.0 - _bc_array(t, m)
    nt = t.sum(axis=1)
    nm = m.sum(axis=1)
    d = np.maximum(d - _sampling_bias(bins, nt, nm), 0.0)
    d[nt < support] = 0.0
    # heavily one-sided support means the mask itself has no counterpart
    # there (boundary noise, midline clipping), not an intensity anomaly
    d[nm < 0.7 * nt] = 0.0

    peak = int(np.argmax(d))
    if d[peak] <= 0.0:
        return 0, 0
    cut = 0.5 * d[peak]
    a = peak
    while a > 0 and d[a - 1] >= cut:
        a -= 1
    b = peak
    while b < n - 1 and d[b + 1] >= cut:
        b += 1
    return a, b


def _core_mask(mask: BinaryMask) -> BinaryMask:
    """Eroded copy used for histogram collection; falls back when too small."""
    from scipy import ndimage

    core = ndimage.binary_erosion(
        mask.bits, np.ones((3, 3), dtype=bool), iterations=_CORE_EROSION
    )
    if core.sum() < 4 * _MIN_SUPPORT:
        return mask
    return BinaryMask(core)


def interval_score(
    image: GrayImage, mask: BinaryMask, box: BoundingBox, axis_col: float, bin_count: int
) -> float:
    """Diagnostic score (1 - BC_inside) + BC_outside for a candidate box, in [0, 2]."""
    h, w = image.pixels.shape
    rows, cols = np.nonzero(mask.bits)
    vals = image.pixels[rows, cols]
    bins = _bin_indices(vals, bin_count)
    mcol = _mirror_cols(cols, axis_col)
    ok = (mcol >= 0) & (mcol < w) & mask.bits[rows, np.clip(mcol, 0, w - 1)]
    inside = (
        (rows >= box.row_min)
        & (rows <= box.row_max)
        & (cols >= box.col_min)
        & (cols <= box.col_max)
    )
    parts = []
    for sel in (inside, ~inside):
        h_t = np.bincount(bins[sel], minlength=bin_count).astype(np.float64)
        sel_ok = sel & ok
        mvals = image.pixels[rows[sel_ok], mcol[sel_ok]]
        h_m = np.bincount(_bin_indices(mvals, bin_count), minlength=bin_count).astype(np.float64)
        parts.append(float(_bc_array(h_t, h_m)))
    return (1.0 - parts[0]) + parts[1]


def _pair_histograms_1d(
    image: GrayImage,
    mask: BinaryMask,
    axis_col: float,
    side_cols: np.ndarray,
    rows_range,
    by: str,
    bin_count: int,
):
    """Per-row or per-column count matrices for side pixels and their mirrors."""
    h, w = image.pixels.shape
    r0, r1 = rows_range
    rr, cc = np.nonzero(mask.bits[r0 : r1 + 1][:, side_cols])
    rows = rr + r0
    cols = side_cols[cc]
    vals = image.pixels[rows, cols]
    mcol = _mirror_cols(cols, axis_col)
    ok = (mcol >= 0) & (mcol < w) & mask.bits[rows, np.clip(mcol, 0, w - 1)]

    if by == "row":
        pos = rows - r0
        n = r1 - r0 + 1
    else:
        pos = cols - side_cols[0]
        n = len(side_cols)
    bins = _bin_indices(vals, bin_count)
    counts_t = np.zeros((n, bin_count))
    np.add.at(counts_t, (pos, bins), 1.0)
    counts_m = np.zeros((n, bin_count))
    mvals = image.pixels[rows[ok], mcol[ok]]
    np.add.at(counts_m, (pos[ok], _bin_indices(mvals, bin_count)), 1.0)
    return counts_t, counts_m


def _box_dissimilarity(
    image: GrayImage,
    mask: BinaryMask,
    box: BoundingBox,
    axis_col: float,
    bin_count: int,
    min_pixels: int = _MIN_SUPPORT,
):
    """Bias-corrected 1 - BC between the box contents and their mirror reflection.

    Applies the same small-sample correction and support/balance guards as the
    interval profiles, so the detection decision cannot be driven by a tiny or
    unpaired pixel population. Returns (dissimilarity, median intensity shift
    between box and reflection).
    """
    h, w = image.pixels.shape
    rr, cc = np.nonzero(mask.bits[box.row_min : box.row_max + 1, box.col_min : box.col_max + 1])
    rows = rr + box.row_min
    cols = cc + box.col_min
    if len(rows) < min_pixels:
        return 0.0, 0.0
    vals = image.pixels[rows, cols]
    inside = np.bincount(_bin_indices(vals, bin_count), minlength=bin_count)
    mcol = _mirror_cols(cols, axis_col)
    ok = (mcol >= 0) & (mcol < w) & mask.bits[rows, np.clip(mcol, 0, w - 1)]
    nt = float(len(rows))
    nm = float(np.count_nonzero(ok))
    if nm < 0.7 * nt:
        return 0.0, 0.0
    mvals = image.pixels[rows[ok], mcol[ok]]
    mirror = np.bincount(_bin_indices(mvals, bin_count), minlength=bin_count)
    d = 1.0 - _bc_counts(inside.astype(np.float64), mirror.astype(np.float64))
    d = float(max(d - _sampling_bias(bin_count, np.float64(nt), np.float64(nm)), 0.0))
    shift = float(abs(np.median(vals) - np.median(mvals)))
    return d, shift


def _search_side(
    image: GrayImage, mask: BinaryMask, axis_col: float, side: Side, bin_count: int
):
    h, w = image.pixels.shape
    if side is Side.RIGHT:
        c_lo = int(np.floor(axis_col)) + 1
        c_hi = w - 1
    else:
        c_lo = 0
        c_hi = int(np.ceil(axis_col)) - 1
    if c_lo > c_hi:
        return None
    side_cols = np.arange(c_lo, c_hi + 1)
    if not mask.bits[:, side_cols].any():
        return None

    core = _core_mask(mask)
    rows_t, rows_m = _pair_histograms_1d(
        image, core, axis_col, side_cols, (0, h - 1), "row", bin_count
    )
    ra, rb = _windowed_interval(rows_t, rows_m)

    cols_t, cols_m = _pair_histograms_1d(
        image, core, axis_col, side_cols, (ra, rb), "col", bin_count
    )
    ca, cb = _windowed_interval(cols_t, cols_m)
    box = BoundingBox(ra, rb, c_lo + ca, c_lo + cb)
    # a credible anomaly must occupy a non-trivial share of its half-plane;
    # smaller pixel sets mimic dissimilarity through sampling noise alone
    min_pixels = max(_MIN_SUPPORT, int(np.ceil(0.02 * rows_t.sum())))
    dissim, shift = _box_dissimilarity(image, core, box, axis_col, bin_count, min_pixels)
    # salience tells the anomalous side from its mirror image: the box and its
    # reflection always score the same dissimilarity against each other, but
    # only the true anomaly stands out from the rest of its own head
    in_box = np.zeros_like(core.bits)
    in_box[box.row_min : box.row_max + 1, box.col_min : box.col_max + 1] = True
    box_vals = image.pixels[core.bits & in_box]
    rest_vals = image.pixels[core.bits & ~in_box]
    if len(box_vals) and len(rest_vals):
        salience = float(abs(np.median(box_vals) - np.median(rest_vals)))
    else:
        salience = 0.0
    return box, dissim, shift, salience


def find_bounding_box(
    image: GrayImage,
    mask: BinaryMask,
    bin_count: int = DEFAULT_BIN_COUNT,
    detection_threshold: float = DEFAULT_DETECTION_THRESHOLD,
) -> FbbResult:
    """Run the two-pass search on both half-planes; the higher inside-dissimilarity wins."""
    if bin_count < 2:
        raise ValueError(f"bin_count must be >= 2, got {bin_count}")
    axis_col = estimate_axis(image, mask)

    best = None
    for side in (Side.RIGHT, Side.LEFT):
        res = _search_side(image, mask, axis_col, side, bin_count)
        if res is None:
            continue
        box, dissim, shift, salience = res
        if best is None or (salience, dissim) > (best[3], best[2]):
            best = (box, side, dissim, salience, shift)
    if best is None:
        return FbbResult(None, Side.RIGHT, axis_col, 0.0, False)
    box, side, dissim, _, shift = best
    found = dissim >= detection_threshold and shift >= _MIN_MEDIAN_SHIFT
    return FbbResult(box if found else None, side, axis_col, dissim, found)
