"""Synthetic head phantoms with exact ground truth.

Geometry: a dark background, a bright head ellipse, a mirrored pair of dark
ventricle ellipses, and an optional bright lesion confined to one half.
Gaussian noise comes from a counter-based splitmix64 generator feeding a
Box-Muller transform, so identical specs produce bit-identical rasters on
any platform. Truth masks are the noise-free geometry.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .imgio import BinaryMask, GrayImage

BACKGROUND_INTENSITY = 5.0


class SpecError(ValueError):
    """A phantom spec field violates its constraints."""


@dataclass(frozen=True)
class Ellipse:
    center_row: float
    center_col: float
    semi_row: float
    semi_col: float
    intensity: float


@dataclass(frozen=True)
class PhantomSpec:
    width: int = 128
    height: int = 128
    head: Ellipse = Ellipse(63.5, 63.5, 50.0, 40.0, 120.0)
    # one ventricle of the mirrored pair; the other is its reflection
    ventricle: Ellipse = Ellipse(55.0, 50.0, 16.0, 5.0, 60.0)
    lesion: Optional[Ellipse] = None
    noise_sigma: float = 0.0
    seed: int = 0


def standard_lesion_spec(seed: int = 1, noise_sigma: float = 8.0) -> PhantomSpec:
    """Canonical fixture: lesion covering rows 40-60, cols 70-90."""
    return PhantomSpec(
        lesion=Ellipse(50.0, 80.0, 10.0, 10.0, 200.0),
        noise_sigma=noise_sigma,
        seed=seed,
    )


def symmetric_spec(seed: int = 0, noise_sigma: float = 0.0) -> PhantomSpec:
    return PhantomSpec(noise_sigma=noise_sigma, seed=seed)


def _splitmix64(counter: np.ndarray) -> np.ndarray:
    z = (counter * np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def gaussian_field(seed: int, count: int) -> np.ndarray:
    """`count` standard normals from splitmix64 uniforms via Box-Muller."""
    pairs = (count + 1) // 2
    with np.errstate(over="ignore"):
        base = np.uint64(seed) * np.uint64(0x2545F4914F6CDD1D)
        idx = np.arange(2 * pairs, dtype=np.uint64) + np.uint64(1)
        bits = _splitmix64(base + idx)
    # 53-bit mantissa, shifted into (0, 1] so log() is always finite
    u = ((bits >> np.uint64(11)).astype(np.float64) + 1.0) / 9007199254740992.0
    u1 = u[:pairs]
    u2 = u[pairs:]
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


def _ellipse_mask(height: int, width: int, e: Ellipse) -> np.ndarray:
    rows = np.arange(height)[:, None]
    cols = np.arange(width)[None, :]
    return ((cols - e.center_col) / e.semi_col) ** 2 + (
        (rows - e.center_row) / e.semi_row
    ) ** 2 <= 1.0


def _mirrored(e: Ellipse, width: int) -> Ellipse:
    return replace(e, center_col=(width - 1) - e.center_col)


def _validate(spec: PhantomSpec) -> None:
    if spec.width < 1 or spec.height < 1:
        raise SpecError("width/height must be positive")
    if spec.noise_sigma < 0:
        raise SpecError("noise_sigma must be >= 0")
    h = spec.head
    if (
        h.center_col - h.semi_col < 0
        or h.center_col + h.semi_col > spec.width - 1
        or h.center_row - h.semi_row < 0
        or h.center_row + h.semi_row > spec.height - 1
    ):
        raise SpecError("head ellipse does not fit inside the raster")
    if spec.lesion is not None:
        lesion_bits = _ellipse_mask(spec.height, spec.width, spec.lesion)
        head_bits = _ellipse_mask(spec.height, spec.width, spec.head)
        if (lesion_bits & ~head_bits).any():
            raise SpecError("lesion extends outside the head ellipse")
        axis = (spec.width - 1) / 2.0
        _, lcols = np.nonzero(lesion_bits)
        if len(lcols) and lcols.min() < axis < lcols.max():
            raise SpecError("lesion crosses the mirror axis")


def generate(spec: PhantomSpec):
    """Returns (image, head_truth, lesion_truth)."""
    _validate(spec)
    h, w = spec.height, spec.width
    head_bits = _ellipse_mask(h, w, spec.head)
    base = np.full((h, w), BACKGROUND_INTENSITY)
    base[head_bits] = spec.head.intensity
    for vent in (spec.ventricle, _mirrored(spec.ventricle, w)):
        base[_ellipse_mask(h, w, vent) & head_bits] = vent.intensity
    if spec.lesion is not None:
        lesion_bits = _ellipse_mask(h, w, spec.lesion)
        base[lesion_bits] = spec.lesion.intensity
    else:
        lesion_bits = np.zeros((h, w), dtype=bool)
    if spec.noise_sigma > 0:
        noise = gaussian_field(spec.seed, h * w).reshape(h, w)
        base = np.clip(base + spec.noise_sigma * noise, 0.0, 255.0)
    return GrayImage(base), BinaryMask(head_bits), BinaryMask(lesion_bits)


def spec_from_dict(doc: dict) -> PhantomSpec:
    """Build a spec from a JSON-style mapping; unknown keys are an error."""

    def ellipse(d, name):
        allowed = {"center_row", "center_col", "semi_row", "semi_col", "intensity"}
        unknown = set(d) - allowed
        if unknown:
            raise SpecError(f"unknown {name} keys: {sorted(unknown)}")
        missing = allowed - set(d)
        if missing:
            raise SpecError(f"missing {name} keys: {sorted(missing)}")
        return Ellipse(**{k: float(v) for k, v in d.items()})

    allowed = {"width", "height", "head", "ventricle", "lesion", "noise_sigma", "seed"}
    unknown = set(doc) - allowed
    if unknown:
        raise SpecError(f"unknown phantom spec keys: {sorted(unknown)}")
    defaults = PhantomSpec()
    return PhantomSpec(
        width=int(doc.get("width", defaults.width)),
        height=int(doc.get("height", defaults.height)),
        head=ellipse(doc["head"], "head") if "head" in doc else defaults.head,
        ventricle=(
            ellipse(doc["ventricle"], "ventricle") if "ventricle" in doc else defaults.ventricle
        ),
        lesion=ellipse(doc["lesion"], "lesion") if doc.get("lesion") else None,
        noise_sigma=float(doc.get("noise_sigma", 0.0)),
        seed=int(doc.get("seed", 0)),
    )
