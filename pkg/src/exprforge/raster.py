"""8-bit RGBA raster images and binary selection masks, with PNG I/O.

Images are numpy arrays of shape (height, width, 4), dtype uint8. Masks are
boolean arrays of shape (height, width); True marks a selected (editable)
pixel. Mask PNGs are single-channel with values 0 or 255 only; anything in
between is rejected because selections are full-hardness by contract.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, MaskNotBinary


@dataclass
class RasterImage:
    pixels: np.ndarray  # (h, w, 4) uint8

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 4:
            raise ValueError(f"expected (h, w, 4) RGBA array, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {arr.dtype}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def rgb(self) -> np.ndarray:
        return self.pixels[:, :, :3]

    @property
    def alpha(self) -> np.ndarray:
        return self.pixels[:, :, 3]

    def copy(self) -> "RasterImage":
        return RasterImage(self.pixels.copy())

    @classmethod
    def from_rgb(cls, rgb: np.ndarray, alpha: int = 255) -> "RasterImage":
        rgb = np.asarray(rgb, dtype=np.uint8)
        if rgb.ndim != 3 or rgb.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) array, got {rgb.shape}")
        out = np.empty((rgb.shape[0], rgb.shape[1], 4), dtype=np.uint8)
        out[:, :, :3] = rgb
        out[:, :, 3] = alpha
        return cls(out)

    @classmethod
    def filled(cls, width: int, height: int, rgba: tuple[int, int, int, int]) -> "RasterImage":
        arr = np.empty((height, width, 4), dtype=np.uint8)
        arr[:, :] = np.array(rgba, dtype=np.uint8)
        return cls(arr)

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "RasterImage":
        with Image.open(io.BytesIO(data)) as im:
            return cls(np.asarray(im.convert("RGBA"), dtype=np.uint8))

    @classmethod
    def load(cls, path: str | Path) -> "RasterImage":
        with Image.open(path) as im:
            return cls(np.asarray(im.convert("RGBA"), dtype=np.uint8))

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.pixels, mode="RGBA").save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Image.fromarray(self.pixels, mode="RGBA").save(path, format="PNG")


@dataclass
class SelectionMask:
    bits: np.ndarray  # (h, w) bool

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 2:
            raise ValueError(f"expected (h, w) array, got shape {arr.shape}")
        if arr.dtype != np.bool_:
            raise ValueError(f"mask bits must be bool, got {arr.dtype}")
        self.bits = arr

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def is_empty(self) -> bool:
        return not bool(self.bits.any())

    @property
    def selected_count(self) -> int:
        return int(self.bits.sum())

    def copy(self) -> "SelectionMask":
        return SelectionMask(self.bits.copy())

    def matches(self, image: RasterImage) -> bool:
        return self.bits.shape == image.pixels.shape[:2]

    @classmethod
    def empty(cls, width: int, height: int) -> "SelectionMask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, width: int, height: int) -> "SelectionMask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "SelectionMask":
        """Accept a 0/255 (or 0/1) integer array; reject intermediate values."""
        arr = np.asarray(arr)
        if arr.dtype == np.bool_:
            return cls(arr)
        values = np.unique(arr)
        allowed = {0, 1} if arr.max(initial=0) <= 1 else {0, 255}
        if not set(int(v) for v in values) <= allowed:
            raise MaskNotBinary(
                f"mask contains non-binary values (found {sorted(int(v) for v in values)[:8]}); "
                "selections must be full hardness, 0 or 255 only"
            )
        return cls(arr > 0)

    @classmethod
    def from_png_bytes(cls, data: bytes) -> "SelectionMask":
        with Image.open(io.BytesIO(data)) as im:
            return cls.from_array(np.asarray(im.convert("L"), dtype=np.uint8))

    @classmethod
    def load(cls, path: str | Path) -> "SelectionMask":
        with Image.open(path) as im:
            return cls.from_array(np.asarray(im.convert("L"), dtype=np.uint8))

    def to_png_bytes(self) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(self.bits.astype(np.uint8) * 255, mode="L").save(buf, format="PNG")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Image.fromarray(self.bits.astype(np.uint8) * 255, mode="L").save(path, format="PNG")


def require_same_dims(a, b) -> None:
    """Raise unless two rasters (images or masks) share width and height."""
    if (a.width, a.height) != (b.width, b.height):
        raise DimensionMismatch(
            f"dimensions differ: {a.width}x{a.height} vs {b.width}x{b.height}"
        )
