"""Generation backends: deterministic stub, HTTP adapter, timing oracle.

Every backend takes the cropped image, its mask, a Canny edge hint, and the
prompt material, and must return a raster of identical dimensions. The stub
exists so the compositing guarantee and the service can be tested without a
GPU; its `global_noise` mode deliberately scribbles outside the mask to
prove the pipeline discards it.
"""

from __future__ import annotations

import base64
import contextlib
import itertools
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from .edit_pipeline import HyperParams
from .errors import (
    DimensionMismatchFromBackend,
    EndpointUnavailable,
    MalformedResponse,
    ParamOutOfRange,
)
from .raster import RasterImage, SelectionMask

STUB_MODES = ("procedural", "identity", "global_noise", "edge_noise")

ENV_BACKEND_URL = "EXPRFORGE_BACKEND_URL"
ENV_BACKEND_TIMEOUT = "EXPRFORGE_BACKEND_TIMEOUT"


@runtime_checkable
class GenerationBackend(Protocol):
    def generate(
        self,
        sub_image: RasterImage,
        sub_mask: SelectionMask,
        edge_map: np.ndarray,
        prompt: str,
        negative_prompt: str,
        params: HyperParams,
        context_dots: tuple[tuple[int, int], ...] | None,
    ) -> RasterImage: ...

    def descriptor(self) -> dict: ...


def _concrete_seed(params: HyperParams) -> int:
    if isinstance(params.seed, int):
        return params.seed
    return random.randint(0, 2**31 - 1)


class StubBackend:
    """Seed-deterministic procedural editor, no model involved.

    Modes:
      procedural   hue rotation by a seed-derived angle plus 3x3 box
                   smoothing, applied inside the mask only
      identity     returns the input unchanged
      global_noise perturbs every pixel (mask violation on purpose)
      edge_noise   perturbs a band `edge_noise_width` px wide just inside
                   the mask boundary
    """

    def __init__(self, mode: str = "procedural", edge_noise_width: int = 2):
        if mode not in STUB_MODES:
            raise ParamOutOfRange("mode", f"got {mode!r}, want one of {STUB_MODES}")
        if edge_noise_width < 1:
            raise ParamOutOfRange("edge_noise_width", f"got {edge_noise_width}")
        self.mode = mode
        self.edge_noise_width = edge_noise_width

    def descriptor(self) -> dict:
        return {"id": f"stub:{self.mode}", "kind": "stub"}

    def generate(self, sub_image, sub_mask, edge_map, prompt, negative_prompt,
                 params, context_dots) -> RasterImage:
        seed = _concrete_seed(params)
        if self.mode == "identity":
            return sub_image.copy()
        if self.mode == "global_noise":
            return self._global_noise(sub_image, seed)
        if self.mode == "edge_noise":
            return self._edge_noise(sub_image, sub_mask, seed)
        return self._procedural(sub_image, sub_mask, seed)

    def _procedural(self, sub_image: RasterImage, sub_mask: SelectionMask,
                    seed: int) -> RasterImage:
        rng = np.random.default_rng(seed)
        angle = int(rng.integers(32, 224))
        rgb = sub_image.pixels[..., :3]
        hsv = np.asarray(Image.fromarray(rgb, "RGB").convert("HSV"), np.uint8).copy()
        hsv[..., 0] = ((hsv[..., 0].astype(np.int32) + angle) % 256).astype(np.uint8)
        rotated = np.asarray(Image.fromarray(hsv, "HSV").convert("RGB"), np.uint8)
        smoothed = ndimage.uniform_filter(
            rotated.astype(np.float64), size=(3, 3, 1), mode="nearest"
        )
        smoothed = np.clip(np.rint(smoothed), 0, 255).astype(np.uint8)
        out = sub_image.pixels.copy()
        sel = sub_mask.bits
        out[..., :3][sel] = smoothed[sel]
        return RasterImage(out)

    def _global_noise(self, sub_image: RasterImage, seed: int) -> RasterImage:
        # Modular offsets in 16..239 guarantee every pixel actually changes;
        # clipped additive noise would leave saturated pixels untouched.
        rng = np.random.default_rng(seed)
        h, w = sub_image.height, sub_image.width
        delta = rng.integers(16, 240, size=(h, w, 3), dtype=np.int32)
        out = sub_image.pixels.copy()
        out[..., :3] = ((out[..., :3].astype(np.int32) + delta) % 256).astype(np.uint8)
        return RasterImage(out)

    def _edge_noise(self, sub_image: RasterImage, sub_mask: SelectionMask,
                    seed: int) -> RasterImage:
        bits = sub_mask.bits
        eroded = ndimage.binary_erosion(
            bits, structure=np.ones((3, 3), bool), iterations=self.edge_noise_width
        )
        band = bits & ~eroded
        rng = np.random.default_rng(seed)
        h, w = sub_image.height, sub_image.width
        delta = rng.integers(16, 240, size=(h, w, 3), dtype=np.int32)
        out = sub_image.pixels.copy()
        rgb = out[..., :3].astype(np.int32)
        rgb[band] = (rgb[band] + delta[band]) % 256
        out[..., :3] = rgb.astype(np.uint8)
        return RasterImage(out)


@dataclass
class HttpBackendConfig:
    base_url: str
    timeout: float = 120.0
    model_name: str = ""
    controlnet_model: str = ""
    extra_headers: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.base_url:
            raise ParamOutOfRange("base_url", "must be non-empty")

    @classmethod
    def from_env(cls) -> "HttpBackendConfig":
        url = os.environ.get(ENV_BACKEND_URL, "")
        if not url:
            raise EndpointUnavailable(f"{ENV_BACKEND_URL} is not set")
        return cls(base_url=url, timeout=float(os.environ.get(ENV_BACKEND_TIMEOUT, "120")))


def _encode_png_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _edge_map_png(edge_map: np.ndarray) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(edge_map.astype(np.uint8), "L").save(buf, format="PNG")
    return buf.getvalue()


class HttpBackend:
    """Adapter for an img2img + ControlNet inference endpoint.

    POSTs JSON to {base_url}/generate with base64 PNG payloads and reads the
    first image of the response's `images` list. Calls are serialized per
    instance by default since GPU endpoints are typically single-tenant;
    pass concurrent=True to dispatch in parallel.
    """

    def __init__(self, config: HttpBackendConfig, concurrent: bool = False):
        self.config = config
        self._lock = threading.Lock() if not concurrent else None

    def descriptor(self) -> dict:
        return {"id": f"http:{self.config.base_url}", "kind": "http"}

    def generate(self, sub_image, sub_mask, edge_map, prompt, negative_prompt,
                 params, context_dots) -> RasterImage:
        body = {
            "init_image": _encode_png_b64(sub_image.to_png_bytes()),
            "mask": _encode_png_b64(sub_mask.to_png_bytes()),
            "control_image": _encode_png_b64(_edge_map_png(edge_map)),
            "prompt": prompt,
            "negative_prompt": negative_prompt,
            "denoising_strength": params.denoising_strength,
            "steps": params.sampling_steps,
            "cfg_scale": params.cfg_scale,
            "seed": params.seed,
            "controlnet_fraction": params.controlnet_steps,
            "dots": [list(d) for d in context_dots] if context_dots else None,
        }
        if self.config.model_name:
            body["model_name"] = self.config.model_name
        if self.config.controlnet_model:
            body["controlnet_model"] = self.config.controlnet_model

        url = self.config.base_url.rstrip("/") + "/generate"
        guard = self._lock if self._lock is not None else contextlib.nullcontext()
        with guard:
            try:
                resp = requests.post(
                    url,
                    json=body,
                    headers=self.config.extra_headers or None,
                    timeout=self.config.timeout,
                )
                resp.raise_for_status()
            except requests.RequestException as e:
                raise EndpointUnavailable(f"backend request failed: {e}") from e

        try:
            payload = resp.json()
            images = payload["images"]
            first = images[0]
            raw = base64.b64decode(first)
            out = RasterImage.from_png_bytes(raw)
        except Exception as e:
            raise MalformedResponse(f"could not decode backend response: {e}") from e

        if out.width != sub_image.width or out.height != sub_image.height:
            raise DimensionMismatchFromBackend(
                f"backend returned {out.width}x{out.height}, "
                f"expected {sub_image.width}x{sub_image.height}"
            )
        return out


class TimingBackend:
    """Identity backend that sleeps a scheduled delay per call.

    delay_profile is either a constant in seconds or a list cycled across
    calls; used as the known-latency oracle for the benchmark harness.
    """

    def __init__(self, delay_profile: float | list[float] = 0.0):
        if isinstance(delay_profile, (int, float)):
            profile = [float(delay_profile)]
        else:
            profile = [float(d) for d in delay_profile]
        if not profile or any(d < 0 for d in profile):
            raise ParamOutOfRange("delay_profile", f"got {delay_profile!r}")
        self._cycle = itertools.cycle(profile)
        self._lock = threading.Lock()
        self.profile = profile

    def descriptor(self) -> dict:
        return {"id": "timing", "kind": "timing"}

    def generate(self, sub_image, sub_mask, edge_map, prompt, negative_prompt,
                 params, context_dots) -> RasterImage:
        with self._lock:
            delay = next(self._cycle)
        if delay > 0:
            time.sleep(delay)
        return sub_image.copy()


def make_backend(
    kind: str,
    http_config: HttpBackendConfig | None = None,
    stub_mode: str = "procedural",
    delay_profile: float | list[float] = 0.0,
) -> GenerationBackend:
    """Build a backend by kind name: stub, http, or timing."""
    if kind == "stub":
        return StubBackend(mode=stub_mode)
    if kind == "http":
        return HttpBackend(http_config or HttpBackendConfig.from_env())
    if kind == "timing":
        return TimingBackend(delay_profile)
    raise ParamOutOfRange("backend", f"got {kind!r}, want stub, http, or timing")
