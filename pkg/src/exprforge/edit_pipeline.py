"""Region-constrained edit execution.

One edit runs as: validate, crop to the selection (plus context padding),
derive a Canny edge hint, call the generation backend on the crop, then
composite the result back. The compositor discards everything the backend
produced outside the selection, so pixels outside the mask are bit-exact
unchanged no matter how the backend behaves. That guarantee lives here, not
in any backend.
"""

from __future__ import annotations

import hashlib
import random
import time
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy import ndimage

from .errors import (
    BackendError,
    DimensionMismatch,
    EditIterationError,
    EmptySelection,
    ParamOutOfRange,
)
from .prompting import LoRAConfig, inject_lora_triggers
from .raster import RasterImage, SelectionMask, require_same_dims

if TYPE_CHECKING:
    from .backends import GenerationBackend

DEFAULT_PADDING = 64
CANNY_SIGMA = 1.4
CANNY_LOW = 100.0
CANNY_HIGH = 200.0

DEFAULT_SAMPLING_STEPS = 30
DEFAULT_DENOISING_STRENGTH = 1.0
DEFAULT_CONTROLNET_STEPS = 0.5
DEFAULT_CFG_SCALE = 7.0


@dataclass(frozen=True)
class HyperParams:
    """Generation knobs: ranges are validated, defaults are ours."""

    denoising_strength: float = DEFAULT_DENOISING_STRENGTH
    controlnet_steps: float = DEFAULT_CONTROLNET_STEPS
    sampling_steps: int = DEFAULT_SAMPLING_STEPS
    cfg_scale: float = DEFAULT_CFG_SCALE
    seed: int | str = "random"

    def __post_init__(self):
        if not (0.0 < self.denoising_strength <= 1.0):
            raise ParamOutOfRange(
                "denoising_strength", f"got {self.denoising_strength}, want (0, 1]"
            )
        if not (0.0 <= self.controlnet_steps <= 1.0):
            raise ParamOutOfRange(
                "controlnet_steps", f"got {self.controlnet_steps}, want [0, 1]"
            )
        if not isinstance(self.sampling_steps, int) or self.sampling_steps < 1:
            raise ParamOutOfRange("sampling_steps", f"got {self.sampling_steps}")
        if not (self.cfg_scale > 0):
            raise ParamOutOfRange("cfg_scale", f"got {self.cfg_scale}")
        if self.seed != "random" and not isinstance(self.seed, int):
            raise ParamOutOfRange("seed", f"got {self.seed!r}, want int or 'random'")


@dataclass(frozen=True)
class EditRequest:
    image: RasterImage
    mask: SelectionMask
    prompt: str = ""
    negative_prompt: str = ""
    params: HyperParams = field(default_factory=HyperParams)
    loras: tuple[LoRAConfig, ...] = ()
    context_dots: tuple[tuple[int, int], ...] | None = None


@dataclass(frozen=True)
class LayerMetadata:
    seed: int | str
    backend_id: str
    latency_ms: float
    request_hash: str


@dataclass(frozen=True)
class EditLayer:
    """Full-frame result layer; alpha is 255 exactly on selected pixels."""

    pixels: RasterImage
    origin: tuple[int, int] = (0, 0)
    metadata: LayerMetadata | None = None


@dataclass(frozen=True)
class EditResult:
    layer: EditLayer
    composited_preview: RasterImage


@dataclass(frozen=True)
class BoundingBox:
    """Half-open pixel box [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


def validate_request(req: EditRequest) -> None:
    """Raise on dimension mismatch, empty selection, or bad hyperparameters."""
    require_same_dims(req.image, req.mask)
    if req.mask.is_empty:
        raise EmptySelection("selection mask has no selected pixels")
    # HyperParams and LoRAConfig validate their own ranges on construction,
    # but re-check here so requests deserialized through other paths fail too.
    HyperParams(
        denoising_strength=req.params.denoising_strength,
        controlnet_steps=req.params.controlnet_steps,
        sampling_steps=req.params.sampling_steps,
        cfg_scale=req.params.cfg_scale,
        seed=req.params.seed,
    )


def extract_canny(
    image: RasterImage, low: float = CANNY_LOW, high: float = CANNY_HIGH
) -> np.ndarray:
    """Canny edge map as (h, w) uint8, 255 on edges.

    Pipeline: luminance grayscale, Gaussian blur (sigma 1.4), Sobel
    gradients, non-maximum suppression, double-threshold hysteresis with
    8-connected linking. Gradient magnitude is normalized to 0..255 before
    thresholding so `low`/`high` are resolution independent. Deterministic.
    """
    if not (0 <= low <= high):
        raise ParamOutOfRange("canny_thresholds", f"want 0 <= low <= high, got {low}/{high}")
    rgb = image.pixels[..., :3].astype(np.float64)
    gray = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    blurred = ndimage.gaussian_filter(gray, sigma=CANNY_SIGMA, mode="nearest")
    gx = ndimage.sobel(blurred, axis=1, mode="nearest")
    gy = ndimage.sobel(blurred, axis=0, mode="nearest")
    mag = np.hypot(gx, gy)
    peak = mag.max()
    if peak == 0.0:
        return np.zeros(mag.shape, np.uint8)
    mag = mag * (255.0 / peak)

    nms = _non_maximum_suppression(mag, gx, gy)
    strong = nms >= high
    weak = nms >= low
    if not strong.any():
        return np.zeros(mag.shape, np.uint8)
    # Keep weak pixels only when 8-connected to a strong one.
    labels, _ = ndimage.label(weak, structure=np.ones((3, 3), bool))
    keep_ids = np.unique(labels[strong])
    edges = np.isin(labels, keep_ids) & weak
    return (edges * 255).astype(np.uint8)


def _non_maximum_suppression(mag: np.ndarray, gx: np.ndarray, gy: np.ndarray) -> np.ndarray:
    """Thin ridges to 1 px along the gradient direction.

    Directions quantize to 4 bins. A pixel survives when its magnitude is
    strictly greater than the previous neighbor and at least the next
    neighbor along the gradient; on an exact two-pixel plateau this keeps
    the first pixel and drops the second, so symmetric step edges thin to a
    single pixel instead of two or zero.
    """
    h, w = mag.shape
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0

    padded = np.pad(mag, 1, mode="constant")

    def shifted(dy: int, dx: int) -> np.ndarray:
        return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]

    # (prev, next) neighbor offsets per direction bin, fixed order.
    bins = {
        0: ((0, -1), (0, 1)),     # horizontal gradient, vertical edge
        45: ((1, -1), (-1, 1)),
        90: ((-1, 0), (1, 0)),    # vertical gradient, horizontal edge
        135: ((-1, -1), (1, 1)),
    }
    sel = {
        0: (angle < 22.5) | (angle >= 157.5),
        45: (angle >= 22.5) & (angle < 67.5),
        90: (angle >= 67.5) & (angle < 112.5),
        135: (angle >= 112.5) & (angle < 157.5),
    }
    out = np.zeros_like(mag)
    for b, ((pdy, pdx), (ndy, ndx)) in bins.items():
        prev_m = shifted(pdy, pdx)
        next_m = shifted(ndy, ndx)
        keep = sel[b] & (mag > prev_m) & (mag >= next_m)
        out[keep] = mag[keep]
    return out


def crop_to_selection(
    image: RasterImage, mask: SelectionMask, padding: int = DEFAULT_PADDING
) -> tuple[RasterImage, SelectionMask, BoundingBox]:
    """Tight mask bounding box grown by `padding`, clamped to the frame."""
    if padding < 0:
        raise ParamOutOfRange("padding", f"got {padding}")
    require_same_dims(image, mask)
    ys, xs = np.nonzero(mask.bits)
    if ys.size == 0:
        raise EmptySelection("cannot crop to an empty selection")
    y0 = max(int(ys.min()) - padding, 0)
    y1 = min(int(ys.max()) + 1 + padding, image.height)
    x0 = max(int(xs.min()) - padding, 0)
    x1 = min(int(xs.max()) + 1 + padding, image.width)
    box = BoundingBox(x0, y0, x1, y1)
    sub_image = RasterImage(image.pixels[y0:y1, x0:x1].copy())
    sub_mask = SelectionMask(mask.bits[y0:y1, x0:x1].copy())
    return sub_image, sub_mask, box


def selection_centroid(mask: SelectionMask) -> tuple[float, float]:
    """(cx, cy) as the float mean of selected pixel coordinates."""
    ys, xs = np.nonzero(mask.bits)
    if ys.size == 0:
        raise EmptySelection("centroid of an empty selection")
    return float(xs.mean()), float(ys.mean())


def apply_region_transform(
    image: RasterImage,
    mask: SelectionMask,
    scale: float,
    translation: tuple[float, float] = (0.0, 0.0),
    fill: tuple[int, int, int, int] = (255, 255, 255, 255),
) -> RasterImage:
    """Scale selected content about the selection centroid, then translate.

    Nearest-neighbor resampling; destination pixels whose source falls
    outside the selection (or the frame) take `fill`, which is how vacated
    area turns white. Pixels outside the mask are never touched. This is a
    geometric hint for the generator, not a quality resampler.
    """
    require_same_dims(image, mask)
    if not (scale > 0):
        raise ParamOutOfRange("scale", f"got {scale}, want > 0")
    ys, xs = np.nonzero(mask.bits)
    if ys.size == 0:
        raise EmptySelection("transform of an empty selection")
    cx = float(xs.mean())
    cy = float(ys.mean())
    dx, dy = float(translation[0]), float(translation[1])

    # Inverse map: destination pixel p samples source q. Expression order
    # matters: the browser preview recomputes this arithmetic and must agree
    # bit-for-bit in IEEE754 doubles.
    qx = np.floor(cx + (xs.astype(np.float64) - dx - cx) / scale + 0.5).astype(np.int64)
    qy = np.floor(cy + (ys.astype(np.float64) - dy - cy) / scale + 0.5).astype(np.int64)

    h, w = mask.bits.shape
    valid = (qx >= 0) & (qx < w) & (qy >= 0) & (qy < h)
    qx_c = np.clip(qx, 0, w - 1)
    qy_c = np.clip(qy, 0, h - 1)
    from_selection = valid & mask.bits[qy_c, qx_c]

    out = image.pixels.copy()
    out[ys, xs] = np.asarray(fill, np.uint8)
    out[ys[from_selection], xs[from_selection]] = image.pixels[
        qy[from_selection], qx[from_selection]
    ]
    return RasterImage(out)


def _effective_params(params: HyperParams, loras: tuple[LoRAConfig, ...]) -> HyperParams:
    """LoRA step/cfg overrides replace the request values; later LoRAs win."""
    out = params
    for lora in loras:
        if lora.step_override is not None:
            out = replace(out, sampling_steps=lora.step_override)
        if lora.cfg_override is not None:
            out = replace(out, cfg_scale=lora.cfg_override)
    return out


def _request_hash(req: EditRequest, seed: int | str) -> str:
    hasher = hashlib.sha256()
    hasher.update(req.image.pixels.tobytes())
    hasher.update(req.mask.bits.tobytes())
    for text in (req.prompt, req.negative_prompt, repr(seed)):
        hasher.update(text.encode("utf-8"))
        hasher.update(b"\x00")
    p = req.params
    hasher.update(
        f"{p.denoising_strength}|{p.controlnet_steps}|{p.sampling_steps}|{p.cfg_scale}".encode()
    )
    hasher.update(repr(req.context_dots).encode("utf-8"))
    return hasher.hexdigest()[:16]


def run_edit(
    req: EditRequest,
    backend: "GenerationBackend",
    padding: int = DEFAULT_PADDING,
    canny_low: float = CANNY_LOW,
    canny_high: float = CANNY_HIGH,
) -> EditResult:
    """Execute one edit and return the layer plus composited preview.

    The returned layer's alpha equals the request mask exactly, and the
    composited preview is bit-identical to the input image at every
    unselected pixel regardless of what the backend returned.
    """
    start = time.perf_counter()
    validate_request(req)

    sub_image, sub_mask, box = crop_to_selection(req.image, req.mask, padding)
    edge_map = extract_canny(sub_image, canny_low, canny_high)

    prompt = req.prompt
    for lora in req.loras:
        prompt = inject_lora_triggers(prompt, lora)
    params = _effective_params(req.params, req.loras)
    if params.seed == "random":
        params = replace(params, seed=random.randint(0, 2**31 - 1))

    generated = backend.generate(
        sub_image,
        sub_mask,
        edge_map,
        prompt,
        req.negative_prompt,
        params,
        req.context_dots,
    )
    if generated.width != sub_image.width or generated.height != sub_image.height:
        raise BackendError(
            f"backend returned {generated.width}x{generated.height}, "
            f"expected {sub_image.width}x{sub_image.height}"
        )

    # Assemble the full-frame layer: backend pixels inside the selection,
    # transparent everywhere else. Anything outside the mask is discarded.
    h, w = req.image.height, req.image.width
    layer_px = np.zeros((h, w, 4), np.uint8)
    layer_px[..., 3] = req.mask.bits.astype(np.uint8) * 255
    region = layer_px[box.y0 : box.y1, box.x0 : box.x1]
    sel = sub_mask.bits
    region[..., :3][sel] = generated.pixels[..., :3][sel]

    layer_image = RasterImage(layer_px)
    latency_ms = (time.perf_counter() - start) * 1000.0
    layer = EditLayer(
        pixels=layer_image,
        metadata=LayerMetadata(
            seed=params.seed,
            backend_id=backend.descriptor()["id"],
            latency_ms=latency_ms,
            request_hash=_request_hash(req, params.seed),
        ),
    )
    preview = composite(req.image, layer)
    return EditResult(layer=layer, composited_preview=preview)


def composite(base: RasterImage, layer: EditLayer) -> RasterImage:
    """Binary merge: layer pixel where layer alpha is 255, else base pixel."""
    require_same_dims(base, layer.pixels)
    sel = layer.pixels.alpha == 255
    out = base.pixels.copy()
    out[sel] = layer.pixels.pixels[sel]
    return RasterImage(out)


def iterate_edits(
    image: RasterImage,
    requests: list[EditRequest],
    backend: "GenerationBackend",
    padding: int = DEFAULT_PADDING,
) -> list[RasterImage]:
    """Fold run_edit over a request list, snapshotting after every step.

    Each request's `image` field is replaced with the current working image,
    so requests act as deltas. An empty list returns [image].
    """
    if not requests:
        return [image]
    current = image
    snapshots: list[RasterImage] = []
    for step, req in enumerate(requests):
        bound = replace(req, image=current)
        try:
            result = run_edit(bound, backend, padding=padding)
        except Exception as e:
            raise EditIterationError(step, e) from e
        current = result.composited_preview
        snapshots.append(current)
    return snapshots
