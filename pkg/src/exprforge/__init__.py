"""Expression-tag prompt retrieval and region-constrained image editing."""

from .backends import (
    GenerationBackend,
    HttpBackend,
    HttpBackendConfig,
    StubBackend,
    TimingBackend,
    make_backend,
)
from .bench import LatencyReport, compare, run_benchmark
from .diff_analyzer import DiffMap, DiffStats, degradation_curve, l1_map, render_grayscale, stats
from .edit_pipeline import (
    EditLayer,
    EditRequest,
    EditResult,
    HyperParams,
    apply_region_transform,
    composite,
    crop_to_selection,
    extract_canny,
    iterate_edits,
    run_edit,
    validate_request,
)
from .errors import ExprForgeError
from .expression_db import (
    ExpressionDatabase,
    ExpressionTag,
    build_story_generation_prompt,
    load_database,
    resolve_alias,
    sample_db_path,
    save_database,
)
from .prompting import LoRAConfig, assemble_prompt, build_edit_prompt, inject_lora_triggers
from .raster import RasterImage, SelectionMask
from .retrieval import RetrievalQuery, ScoredTag, build_index, retrieve, retrieve_via_llm

__version__ = "0.1.0"

__all__ = [
    "ExprForgeError",
    "ExpressionDatabase",
    "ExpressionTag",
    "load_database",
    "save_database",
    "resolve_alias",
    "sample_db_path",
    "build_story_generation_prompt",
    "RetrievalQuery",
    "ScoredTag",
    "build_index",
    "retrieve",
    "retrieve_via_llm",
    "LoRAConfig",
    "assemble_prompt",
    "inject_lora_triggers",
    "build_edit_prompt",
    "RasterImage",
    "SelectionMask",
    "HyperParams",
    "EditRequest",
    "EditLayer",
    "EditResult",
    "validate_request",
    "extract_canny",
    "crop_to_selection",
    "apply_region_transform",
    "run_edit",
    "composite",
    "iterate_edits",
    "GenerationBackend",
    "StubBackend",
    "HttpBackend",
    "HttpBackendConfig",
    "TimingBackend",
    "make_backend",
    "DiffMap",
    "DiffStats",
    "l1_map",
    "render_grayscale",
    "stats",
    "degradation_curve",
    "LatencyReport",
    "run_benchmark",
    "compare",
]
