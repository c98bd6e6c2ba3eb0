#!/usr/bin/env python3
"""Regenerate the shared client/server fixtures under tests/fixtures/.

The browser preview must reproduce the server's region transform
pixel-for-pixel, so the expected outputs are produced by the server
implementation itself and committed as PNGs. Run from anywhere:

    python3 tools/make_goldens.py
"""

import json
from pathlib import Path

import numpy as np

from exprforge.edit_pipeline import apply_region_transform
from exprforge.raster import RasterImage, SelectionMask

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

CASES = [
    {"name": "shrink_half", "scale": 0.5, "dx": 0.0, "dy": 0.0},
    {"name": "translate_only", "scale": 1.0, "dx": 5.0, "dy": -3.0},
    {"name": "grow_shift", "scale": 1.3, "dx": -2.0, "dy": 4.0},
    {"name": "fine_scale", "scale": 0.77, "dx": 1.0, "dy": 1.0},
]


def build_base(width: int = 48, height: int = 48) -> RasterImage:
    rng = np.random.default_rng(20240817)
    pixels = rng.integers(0, 256, size=(height, width, 4), dtype=np.uint8)
    pixels[:, :, 3] = 255
    return RasterImage(pixels)


def build_mask(width: int = 48, height: int = 48) -> SelectionMask:
    ys, xs = np.mgrid[0:height, 0:width]
    disc = ((xs - 23) ** 2 + (ys - 25) ** 2) <= 13**2
    return SelectionMask(disc.astype(bool))


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    base = build_base()
    mask = build_mask()
    base.save(OUT / "base.png")
    mask.save(OUT / "mask.png")

    manifest = []
    for case in CASES:
        result = apply_region_transform(
            base, mask, case["scale"], translation=(case["dx"], case["dy"])
        )
        out_name = f"transform_{case['name']}.png"
        result.save(OUT / out_name)
        manifest.append({**case, "expected": out_name})

    (OUT / "cases.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(manifest)} transform goldens to {OUT}")


if __name__ == "__main__":
    main()
