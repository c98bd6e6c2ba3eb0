"""Noise forensics: L1 diff maps, threshold rendering, region statistics.

All arithmetic is integer-exact per pixel. The L1 distance is computed over
RGB only (alpha excluded), giving values in 0..765. The grayscale renderer
saturates at a threshold T so faint noise becomes visible; T defaults to 24.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, ParamOutOfRange
from .raster import RasterImage, SelectionMask, require_same_dims

DEFAULT_THRESHOLD = 24

L1_MAX = 765


@dataclass(frozen=True)
class DiffMap:
    """Per-pixel |dR|+|dG|+|dB| between two images of equal size."""

    values: np.ndarray  # (h, w) int32, 0..765

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError(f"diff map must be 2-D, got shape {v.shape}")
        if v.dtype != np.int32:
            object.__setattr__(self, "values", v.astype(np.int32))

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class DiffStats:
    changed_pixel_count: int
    mean_l1: float
    fraction_changed: float
    changed_outside_mask: int | None = None
    max_l1_outside_mask: int | None = None

    def to_dict(self) -> dict:
        return {
            "changed_pixel_count": self.changed_pixel_count,
            "mean_l1": self.mean_l1,
            "fraction_changed": self.fraction_changed,
            "changed_outside_mask": self.changed_outside_mask,
            "max_l1_outside_mask": self.max_l1_outside_mask,
        }


def l1_map(a: RasterImage, b: RasterImage) -> DiffMap:
    """Exact per-pixel L1 distance in RGB; symmetric in its arguments."""
    require_same_dims(a, b)
    ra = a.pixels[..., :3].astype(np.int32)
    rb = b.pixels[..., :3].astype(np.int32)
    return DiffMap(np.abs(ra - rb).sum(axis=2).astype(np.int32))


def render_grayscale(diff: DiffMap, threshold: int = DEFAULT_THRESHOLD) -> RasterImage:
    """Map L1 values to gray: 0 stays black, >= threshold clips to white.

    Gray level is round(255 * min(v, T) / T) with halves rounded away from
    zero, so renders are bit-stable across platforms.
    """
    if threshold < 1:
        raise ParamOutOfRange("threshold", f"got {threshold}, want >= 1")
    v = np.minimum(diff.values, threshold).astype(np.float64)
    gray = np.floor(255.0 * v / threshold + 0.5).astype(np.uint8)
    h, w = diff.values.shape
    out = np.empty((h, w, 4), np.uint8)
    out[..., 0] = gray
    out[..., 1] = gray
    out[..., 2] = gray
    out[..., 3] = 255
    return RasterImage(out)


def stats(diff: DiffMap, mask: SelectionMask | None = None) -> DiffStats:
    """Changed-pixel counts, mean L1, and outside-mask figures when masked."""
    v = diff.values
    changed = int((v > 0).sum())
    total = v.size
    mean = float(v.mean()) if total else 0.0
    fraction = changed / total if total else 0.0
    outside_changed = None
    outside_max = None
    if mask is not None:
        if mask.bits.shape != v.shape:
            raise DimensionMismatch(
                f"mask is {mask.width}x{mask.height}, diff map is {diff.width}x{diff.height}"
            )
        outside = ~mask.bits
        outside_vals = v[outside]
        outside_changed = int((outside_vals > 0).sum())
        outside_max = int(outside_vals.max()) if outside_vals.size else 0
    return DiffStats(
        changed_pixel_count=changed,
        mean_l1=mean,
        fraction_changed=fraction,
        changed_outside_mask=outside_changed,
        max_l1_outside_mask=outside_max,
    )


def degradation_curve(
    snapshots: list[RasterImage],
    reference: RasterImage,
    mask: SelectionMask | None = None,
) -> list[DiffStats]:
    """Stats of every snapshot against a fixed reference, in order."""
    curve: list[DiffStats] = []
    for i, snap in enumerate(snapshots):
        try:
            curve.append(stats(l1_map(reference, snap), mask))
        except DimensionMismatch as e:
            raise DimensionMismatch(f"snapshot {i}: {e}") from e
    return curve
