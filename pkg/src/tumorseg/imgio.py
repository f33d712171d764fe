"""Grayscale raster and binary mask types plus binary PGM (P5) I/O."""
from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np


class PgmError(ValueError):
    """Malformed, unsupported, or truncated PGM data."""


class RangeError(ValueError):
    """Pixel intensity outside the writable [0, 255] range."""


@dataclass(frozen=True)
class GrayImage:
    """2-D real-valued raster, row-major, top-left origin, canonical range [0, 255]."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float64)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("pixels must be a nonempty 2-D array")
        if not np.all(np.isfinite(px)):
            raise ValueError("pixels must be finite")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True)
class BinaryMask:
    """2-D boolean raster with the same layout conventions as GrayImage."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits, dtype=bool)
        if b.ndim != 2 or b.size == 0:
            raise ValueError("bits must be a nonempty 2-D array")
        object.__setattr__(self, "bits", b)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]


def _atomic_write_bytes(path, data: bytes) -> None:
    """Write via temp file + rename so a failed run leaves no partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp_pgm_")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_header_tokens(data: bytes, count: int, start: int):
    """Read `count` whitespace-separated tokens, tolerating '#' comment lines."""
    tokens = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        if i >= n:
            raise PgmError("truncated PGM header")
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
            j += 1
        tokens.append(data[i:j])
        i = j
    return tokens, i


def load_gray_pgm(path) -> GrayImage:
    """Load an 8-bit binary PGM (magic P5, maxval 255)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2:
        raise PgmError("truncated PGM header")
    magic = data[:2]
    if magic == b"P2":
        raise PgmError("unsupported PGM variant: P2 (ASCII); only binary P5 is supported")
    if magic != b"P5":
        raise PgmError("not a binary PGM file (missing P5 magic)")
    tokens, pos = _read_header_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PgmError("malformed PGM header: non-numeric dimension or maxval") from None
    if width <= 0 or height <= 0:
        raise PgmError("malformed PGM header: non-positive dimensions")
    if maxval != 255:
        raise PgmError(f"unsupported maxval {maxval}; only 255 is supported")
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PgmError("malformed PGM header: missing separator before pixel data")
    pos += 1
    raster = data[pos : pos + width * height]
    if len(raster) < width * height:
        raise PgmError(
            f"truncated pixel data: expected {width * height} bytes, got {len(raster)}"
        )
    px = np.frombuffer(raster, dtype=np.uint8).astype(np.float64).reshape(height, width)
    return GrayImage(px)


def _quantize(pixels: np.ndarray) -> np.ndarray:
    """Round to nearest integer, ties away from zero (values are non-negative here)."""
    return np.floor(pixels + 0.5)


def write_gray_pgm(image: GrayImage, path) -> None:
    """Write an 8-bit binary PGM; intensities are rounded to nearest integer."""
    px = image.pixels
    bad = (px < 0) | (px > 255)
    if bad.any():
        idx = int(np.flatnonzero(bad.ravel())[0])
        raise RangeError(
            f"intensity {px.ravel()[idx]!r} at pixel index {idx} outside [0, 255]"
        )
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    body = _quantize(px).astype(np.uint8).tobytes()
    _atomic_write_bytes(path, header + body)


def write_mask_pgm(mask: BinaryMask, path) -> None:
    """Write a mask as P5 with true -> 255, false -> 0."""
    header = f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii")
    body = np.where(mask.bits, 255, 0).astype(np.uint8).tobytes()
    _atomic_write_bytes(path, header + body)


def load_mask_pgm(path, threshold: int = 128) -> BinaryMask:
    """Load a P5 file and threshold it back into a mask (>= threshold is true)."""
    img = load_gray_pgm(path)
    return BinaryMask(img.pixels >= threshold)


def mask_boundary(mask: BinaryMask) -> np.ndarray:
    """Mask pixels with at least one 4-neighbor outside the mask (image border counts as outside)."""
    bits = mask.bits
    interior = np.zeros_like(bits)
    interior[1:-1, 1:-1] = (
        bits[1:-1, 1:-1]
        & bits[:-2, 1:-1]
        & bits[2:, 1:-1]
        & bits[1:-1, :-2]
        & bits[1:-1, 2:]
    )
    return bits & ~interior


def render_overlay(image: GrayImage, mask: BinaryMask, box=None) -> GrayImage:
    """Copy of `image` with the mask boundary and the box edges painted at 255.

    `box` is a BoundingBox (inclusive coordinates) or None.
    """
    if (image.height, image.width) != (mask.height, mask.width):
        raise ValueError("image/mask dimension mismatch")
    out = image.pixels.copy()
    out[mask_boundary(mask)] = 255.0
    if box is not None:
        r0, r1, c0, c1 = box.row_min, box.row_max, box.col_min, box.col_max
        out[r0, c0 : c1 + 1] = 255.0
        out[r1, c0 : c1 + 1] = 255.0
        out[r0 : r1 + 1, c0] = 255.0
        out[r0 : r1 + 1, c1] = 255.0
    return GrayImage(out)
