"""Latency benchmark harness: timed edit runs with mean and sample std.

The protocol is one untimed warm-up edit followed by n timed runs; the
timing window spans request dispatch to layer availability. Statistics are
recomputable exactly from the stored per-run values.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .edit_pipeline import EditRequest, HyperParams, run_edit
from .errors import EditIterationError
from .raster import RasterImage, SelectionMask

DEFAULT_RUNS = 10
DEFAULT_IMAGE_SIZE = 1024


@dataclass(frozen=True)
class LatencyReport:
    label: str
    runs: tuple[float, ...]  # per-run milliseconds
    mean_ms: float
    std_ms: float

    @property
    def n(self) -> int:
        return len(self.runs)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "runs_ms": list(self.runs),
            "mean_ms": self.mean_ms,
            "std_ms": self.std_ms,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_runs(cls, label: str, runs: list[float]) -> "LatencyReport":
        if len(runs) < 2:
            raise ValueError("need at least 2 runs for a sample std")
        return cls(
            label=label,
            runs=tuple(runs),
            mean_ms=statistics.fmean(runs),
            std_ms=statistics.stdev(runs),
        )


def build_bench_request(size: int = DEFAULT_IMAGE_SIZE,
                        params: HyperParams | None = None,
                        prompt: str = "smile") -> EditRequest:
    """Deterministic square fixture with a centered half-size selection."""
    if size < 8:
        raise ValueError(f"size too small: {size}")
    rng = np.random.default_rng(1024)
    px = np.empty((size, size, 4), np.uint8)
    px[..., :3] = rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)
    px[..., 3] = 255
    bits = np.zeros((size, size), bool)
    q = size // 4
    bits[q : size - q, q : size - q] = True
    return EditRequest(
        image=RasterImage(px),
        mask=SelectionMask(bits),
        prompt=prompt,
        params=params or HyperParams(seed=0),
    )


def run_benchmark(backend, request: EditRequest, n: int = DEFAULT_RUNS,
                  label: str = "") -> LatencyReport:
    """One warm-up edit, then n timed run_edit calls against `backend`."""
    if n < 2:
        raise ValueError(f"need n >= 2 runs, got {n}")
    if not label:
        label = backend.descriptor()["id"]

    try:
        run_edit(request, backend)  # warm-up, untimed
    except Exception as e:
        raise EditIterationError(-1, e) from e

    runs: list[float] = []
    for i in range(n):
        start = time.perf_counter()
        try:
            run_edit(request, backend)
        except Exception as e:
            raise EditIterationError(i, e) from e
        runs.append((time.perf_counter() - start) * 1000.0)
    return LatencyReport.from_runs(label, runs)


def _nearest_percent(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def relative_change_percent(a_ms: float, b_ms: float) -> int:
    """(a - b) / a as a whole percent, halves rounded away from zero."""
    if a_ms == 0:
        raise ValueError("baseline mean is zero")
    return _nearest_percent(100.0 * (a_ms - b_ms) / a_ms)


def compare(reports: list[LatencyReport]) -> str:
    """Render a comparison table; changes are relative to the first report."""
    if len(reports) < 2:
        raise ValueError("need at least 2 reports to compare")
    base = reports[0]
    label_w = max(len(r.label) for r in reports)
    lines = [
        f"{'config'.ljust(label_w)}  {'mean ms':>12}  {'std ms':>10}  {'n':>4}  change",
    ]
    for r in reports:
        if r is base:
            change = "baseline"
        else:
            pct = relative_change_percent(base.mean_ms, r.mean_ms)
            direction = "reduction" if pct >= 0 else "increase"
            change = f"{abs(pct)}% {direction}"
        lines.append(
            f"{r.label.ljust(label_w)}  {r.mean_ms:>12.2f}  {r.std_ms:>10.2f}  {r.n:>4}  {change}"
        )
    return "\n".join(lines)
