"""HTTP/JSON service tying database, retrieval, pipeline, and analyzer.

Edit generation is multi-second on real backends, so /api/edits runs an
async job model: submit returns a job id, clients poll, then fetch the
layer and composite PNGs. Jobs execute on a single FIFO worker thread (GPU
endpoints are single-tenant) and persist under a run directory with LRU
eviction past a configurable cap.

Multipart bodies are parsed with the stdlib email parser rather than a
form-parsing dependency; see parse_multipart.
"""

from __future__ import annotations

import base64
import json
import math
import os
import queue
import shutil
import tempfile
import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from email.parser import BytesParser
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .backends import (
    GenerationBackend,
    HttpBackend,
    HttpBackendConfig,
    StubBackend,
    TimingBackend,
)
from .diff_analyzer import DEFAULT_THRESHOLD, l1_map, render_grayscale, stats
from .edit_pipeline import (
    DEFAULT_PADDING,
    EditRequest,
    HyperParams,
    run_edit,
)
from .errors import (
    DimensionMismatch,
    EmptySelection,
    EndpointUnavailable,
    ExprForgeError,
    ParamOutOfRange,
)
from .expression_db import ExpressionDatabase, load_database, sample_db_path
from .prompting import LoRAConfig, assemble_prompt
from .raster import RasterImage, SelectionMask
from .retrieval import (
    HttpLlmClient,
    LlmEndpointConfig,
    RetrievalQuery,
    build_index,
    retrieve,
    retrieve_via_llm,
)

DEFAULT_JOB_CAP = 100
DEFAULT_PORT = 8787

BACKEND_KINDS = ("stub", "http", "timing")

DEFAULT_SETTINGS: dict = {
    "prompt_prefix": "",
    "prompt_suffix": "",
    "params": {
        "denoising_strength": 1.0,
        "controlnet_steps": 0.5,
        "sampling_steps": 30,
        "cfg_scale": 7.0,
        "seed": "random",
    },
    "backend": "stub",
    "http": {
        "base_url": "",
        "timeout": 120.0,
        "model_name": "",
        "controlnet_model": "",
    },
    "loras": {},
    "diff_threshold": DEFAULT_THRESHOLD,
}


# --- multipart/form-data without an extra dependency ---

def parse_multipart(content_type: str, body: bytes) -> dict[str, tuple[str | None, bytes]]:
    """Parse a multipart/form-data body into {name: (filename, payload)}.

    Reuses the stdlib MIME machinery by prepending the request content-type
    as a header block. Boundary tokens are random, so binary payloads pass
    through byte-exact.
    """
    if not content_type or "multipart" not in content_type:
        raise ValueError("expected a multipart/form-data request body")
    head = f"Content-Type: {content_type}\r\nMIME-Version: 1.0\r\n\r\n"
    msg = BytesParser().parsebytes(head.encode("utf-8") + body)
    if not msg.is_multipart():
        raise ValueError("malformed multipart body")
    parts: dict[str, tuple[str | None, bytes]] = {}
    for part in msg.get_payload():
        name = part.get_param("name", header="content-disposition")
        if name is None:
            continue
        payload = part.get_payload(decode=True)
        parts[str(name)] = (part.get_filename(), payload if payload is not None else b"")
    return parts


# --- settings ---

def _merge_settings(current: dict, update: dict) -> dict:
    out = json.loads(json.dumps(current))  # deep copy of plain JSON data
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    return out


def validate_settings(doc: dict) -> None:
    """Raise on any out-of-range or unknown field; callers apply atomically."""
    unknown = set(doc) - set(DEFAULT_SETTINGS)
    if unknown:
        raise ParamOutOfRange("settings", f"unknown fields: {sorted(unknown)}")
    for key in ("prompt_prefix", "prompt_suffix"):
        if not isinstance(doc[key], str):
            raise ParamOutOfRange(key, "must be a string")
    params = doc["params"]
    unknown = set(params) - set(DEFAULT_SETTINGS["params"])
    if unknown:
        raise ParamOutOfRange("params", f"unknown fields: {sorted(unknown)}")
    seed = params["seed"]
    if isinstance(seed, float) and seed.is_integer():
        seed = int(seed)
    HyperParams(
        denoising_strength=params["denoising_strength"],
        controlnet_steps=params["controlnet_steps"],
        sampling_steps=params["sampling_steps"],
        cfg_scale=params["cfg_scale"],
        seed=seed,
    )
    if doc["backend"] not in BACKEND_KINDS:
        raise ParamOutOfRange("backend", f"got {doc['backend']!r}, want one of {BACKEND_KINDS}")
    http = doc["http"]
    unknown = set(http) - set(DEFAULT_SETTINGS["http"])
    if unknown:
        raise ParamOutOfRange("http", f"unknown fields: {sorted(unknown)}")
    if not isinstance(http["base_url"], str):
        raise ParamOutOfRange("http.base_url", "must be a string")
    if not (isinstance(http["timeout"], (int, float)) and http["timeout"] > 0):
        raise ParamOutOfRange("http.timeout", f"got {http['timeout']!r}")
    if not isinstance(doc["loras"], dict):
        raise ParamOutOfRange("loras", "must be an object keyed by LoRA name")
    for name, spec in doc["loras"].items():
        _lora_from_doc(name, spec)
    t = doc["diff_threshold"]
    if not (isinstance(t, int) and t >= 1):
        raise ParamOutOfRange("diff_threshold", f"got {t!r}, want integer >= 1")


def _lora_from_doc(name: str, spec: dict) -> LoRAConfig:
    if not isinstance(spec, dict):
        raise ParamOutOfRange("loras", f"entry {name!r} must be an object")
    return LoRAConfig(
        name=name,
        trigger_words=tuple(spec.get("trigger_words", ())),
        weight=spec.get("weight", 1.0),
        step_override=spec.get("step_override"),
        cfg_override=spec.get("cfg_override"),
    )


def _atomic_write_json(path: Path, doc: dict) -> None:
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(doc, f, indent=2, ensure_ascii=False)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- jobs ---

@dataclass
class EditJob:
    id: str
    state: str = "queued"  # queued -> running -> done | failed
    summary: dict = field(default_factory=dict)
    error: str | None = None
    latency_ms: int | None = None
    accepted_at: float = field(default_factory=time.perf_counter)
    dir: Path | None = None

    def to_dict(self) -> dict:
        doc = {"id": self.id, "state": self.state, "summary": self.summary}
        if self.latency_ms is not None:
            doc["latency_ms"] = self.latency_ms
        if self.error is not None:
            doc["error"] = self.error
        return doc


class JobStore:
    """LRU-bounded job registry; artifacts live under run_dir/jobs/<id>."""

    def __init__(self, run_dir: Path, cap: int = DEFAULT_JOB_CAP):
        self.run_dir = run_dir
        self.cap = cap
        self._jobs: OrderedDict[str, EditJob] = OrderedDict()
        self._lock = threading.RLock()

    def add(self, job: EditJob) -> None:
        with self._lock:
            self._jobs[job.id] = job
            self._evict()

    def get(self, job_id: str) -> EditJob | None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is not None:
                self._jobs.move_to_end(job_id)
            return job

    def contains(self, job_id: str) -> bool:
        with self._lock:
            return job_id in self._jobs

    def _evict(self) -> None:
        while len(self._jobs) > self.cap:
            victim_id = None
            for jid, job in self._jobs.items():
                if job.state != "running":
                    victim_id = jid
                    break
            if victim_id is None:
                break
            job = self._jobs.pop(victim_id)
            if job.dir is not None:
                shutil.rmtree(job.dir, ignore_errors=True)


# --- app state ---

class ServiceState:
    def __init__(
        self,
        db: ExpressionDatabase,
        run_dir: Path,
        job_cap: int,
        backend_override: GenerationBackend | None,
        settings_path: Path,
    ):
        self.db = db
        self.index = build_index(db)
        self.run_dir = run_dir
        self.settings_path = settings_path
        self.settings_lock = threading.RLock()
        self.settings = self._load_settings()
        self.store = JobStore(run_dir, job_cap)
        self.queue: "queue.Queue[str | None]" = queue.Queue()
        self.backend_override = backend_override
        self.worker = threading.Thread(target=self._worker_loop, daemon=True)
        self.worker.start()

    def _load_settings(self) -> dict:
        if self.settings_path.exists():
            doc = _merge_settings(
                DEFAULT_SETTINGS, json.loads(self.settings_path.read_text("utf-8"))
            )
            validate_settings(doc)
            return doc
        return json.loads(json.dumps(DEFAULT_SETTINGS))

    def current_settings(self) -> dict:
        with self.settings_lock:
            return json.loads(json.dumps(self.settings))

    def replace_settings(self, doc: dict) -> None:
        with self.settings_lock:
            validate_settings(doc)
            self.settings = doc
            _atomic_write_json(self.settings_path, doc)

    def build_backend(self) -> GenerationBackend:
        if self.backend_override is not None:
            return self.backend_override
        s = self.current_settings()
        kind = s["backend"]
        if kind == "stub":
            return StubBackend()
        if kind == "timing":
            return TimingBackend(0.0)
        base_url = s["http"]["base_url"] or os.environ.get("EXPRFORGE_BACKEND_URL", "")
        if not base_url:
            raise EndpointUnavailable("http backend selected but no base_url configured")
        return HttpBackend(
            HttpBackendConfig(
                base_url=base_url,
                timeout=s["http"]["timeout"],
                model_name=s["http"]["model_name"],
                controlnet_model=s["http"]["controlnet_model"],
            )
        )

    def _worker_loop(self) -> None:
        while True:
            job_id = self.queue.get()
            if job_id is None:
                return
            job = self.store.get(job_id)
            if job is None or job.dir is None:
                continue  # evicted while queued
            job.state = "running"
            try:
                req = _load_job_request(job.dir, self.current_settings())
                result = run_edit(req, self.build_backend(), padding=job.summary.get("padding", DEFAULT_PADDING))
                result.layer.pixels.save(job.dir / "layer.png")
                result.composited_preview.save(job.dir / "composite.png")
                job.latency_ms = int(round((time.perf_counter() - job.accepted_at) * 1000))
                job.state = "done"
            except Exception as e:
                job.error = str(e)
                job.state = "failed"

    def shutdown(self) -> None:
        self.queue.put(None)


def _load_job_request(job_dir: Path, settings: dict) -> EditRequest:
    image = RasterImage.load(job_dir / "input.png")
    mask = SelectionMask.load(job_dir / "mask.png")
    doc = json.loads((job_dir / "request.json").read_text("utf-8"))
    loras = tuple(
        _lora_from_doc(name, settings["loras"][name]) for name in doc.get("loras", [])
    )
    dots = doc.get("context_dots")
    return EditRequest(
        image=image,
        mask=mask,
        prompt=doc["prompt"],
        negative_prompt=doc.get("negative_prompt", ""),
        params=_params_from_doc(doc["params"]),
        loras=loras,
        context_dots=tuple((int(x), int(y)) for x, y in dots) if dots else None,
    )


def _params_from_doc(doc: dict) -> HyperParams:
    seed = doc.get("seed", "random")
    if isinstance(seed, float) and seed.is_integer():
        seed = int(seed)
    steps = doc.get("sampling_steps", DEFAULT_SETTINGS["params"]["sampling_steps"])
    if isinstance(steps, float) and steps.is_integer():
        steps = int(steps)
    return HyperParams(
        denoising_strength=doc.get("denoising_strength", 1.0),
        controlnet_steps=doc.get("controlnet_steps", 0.5),
        sampling_steps=steps,
        cfg_scale=doc.get("cfg_scale", 7.0),
        seed=seed,
    )


def _score_json(score: float) -> float | None:
    return None if math.isinf(score) else score


def _results_json(rows) -> list[dict]:
    return [
        {
            "tag_name": r.tag_name,
            "score": _score_json(r.score),
            "exact": math.isinf(r.score),
            "matched_fields": list(r.matched_fields),
        }
        for r in rows
    ]


def create_app(
    db_path: str | Path | None = None,
    run_dir: str | Path | None = None,
    job_cap: int = DEFAULT_JOB_CAP,
    backend: GenerationBackend | None = None,
    settings_path: str | Path | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the service app; backend overrides the settings-selected kind."""
    db = load_database(Path(db_path) if db_path else sample_db_path())
    run_root = Path(run_dir) if run_dir else Path(tempfile.mkdtemp(prefix="exprforge-run-"))
    run_root.mkdir(parents=True, exist_ok=True)
    (run_root / "jobs").mkdir(exist_ok=True)
    state = ServiceState(
        db=db,
        run_dir=run_root,
        job_cap=job_cap,
        backend_override=backend,
        settings_path=Path(settings_path) if settings_path else run_root / "settings.json",
    )

    app = FastAPI(title="exprforge", version="0.1.0")
    app.state.service = state
    app.router.add_event_handler("shutdown", state.shutdown)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def bad_request(detail: str) -> HTTPException:
        return HTTPException(status_code=400, detail=detail)

    @app.get("/api/tags")
    def list_tags(transformation_free: str | None = None, q: str | None = None):
        flag: bool | None = None
        if transformation_free is not None and transformation_free != "":
            lowered = transformation_free.lower()
            if lowered in ("true", "1"):
                flag = True
            elif lowered in ("false", "0"):
                flag = False
            else:
                raise bad_request(
                    f"transformation_free must be true or false, got {transformation_free!r}"
                )
        needle = q.casefold() if q else None
        rows = []
        for tag in state.db.tags:
            if flag is not None and tag.transformation_free is not flag:
                continue
            if needle is not None:
                haystacks = [tag.name.casefold()] + [a.text.casefold() for a in tag.aliases]
                if not any(needle in h for h in haystacks):
                    continue
            rows.append(
                {
                    "name": tag.name,
                    "definition": tag.definition,
                    "aliases": [{"text": a.text, "language": a.language} for a in tag.aliases],
                    "transformation_free": tag.transformation_free,
                    "n_stories": len(tag.stories),
                    "n_example_images": len(tag.example_images),
                }
            )
        return rows

    @app.post("/api/retrieve")
    async def retrieve_tags(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError as e:
            raise bad_request(f"invalid JSON body: {e}")
        text = body.get("text", "")
        k = body.get("k", 5)
        use_llm = bool(body.get("use_llm", False))
        allow_fallback = bool(body.get("allow_fallback", True))
        try:
            query = RetrievalQuery(text=text, k=int(k))
        except (ValueError, TypeError) as e:
            raise bad_request(str(e))

        if use_llm:
            try:
                client = HttpLlmClient(LlmEndpointConfig.from_env())
                result = retrieve_via_llm(state.db, query, client)
                return {
                    "results": _results_json(result.tags),
                    "degraded": result.degraded,
                    "detail": result.detail,
                }
            except EndpointUnavailable as e:
                if not allow_fallback:
                    raise HTTPException(status_code=502, detail=str(e))
                rows = retrieve(state.index, query)
                return {"results": _results_json(rows), "degraded": True, "detail": str(e)}
        rows = retrieve(state.index, query)
        return {"results": _results_json(rows), "degraded": False, "detail": None}

    @app.post("/api/edits")
    async def submit_edit(request: Request):
        try:
            parts = parse_multipart(request.headers.get("content-type", ""), await request.body())
        except ValueError as e:
            raise bad_request(str(e))
        if "image" not in parts or "mask" not in parts:
            raise bad_request("multipart body needs 'image' and 'mask' file parts")

        image_bytes = parts["image"][1]
        mask_bytes = parts["mask"][1]
        params_doc: dict = {}
        if "params" in parts and parts["params"][1]:
            try:
                params_doc = json.loads(parts["params"][1])
            except json.JSONDecodeError as e:
                raise bad_request(f"params part is not valid JSON: {e}")

        settings = state.current_settings()
        try:
            image = RasterImage.from_png_bytes(image_bytes)
            mask = SelectionMask.from_png_bytes(mask_bytes)
            if (image.width, image.height) != (mask.width, mask.height):
                raise DimensionMismatch(
                    f"image is {image.width}x{image.height}, mask is {mask.width}x{mask.height}"
                )
            if mask.is_empty:
                raise EmptySelection("selection mask has no selected pixels")

            tags = params_doc.get("tags")
            raw_prompt = params_doc.get("prompt", "")
            if tags is not None:
                if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
                    raise ParamOutOfRange("tags", "must be a list of strings")
                prompt = assemble_prompt(tags, settings["prompt_prefix"], settings["prompt_suffix"])
            elif raw_prompt:
                prompt = assemble_prompt([raw_prompt], settings["prompt_prefix"], settings["prompt_suffix"])
            else:
                prompt = ""

            merged_params = dict(settings["params"])
            merged_params.update(params_doc.get("params", {}))
            hyper = _params_from_doc(merged_params)

            lora_names = params_doc.get("loras", [])
            for name in lora_names:
                if name not in settings["loras"]:
                    raise ParamOutOfRange("loras", f"unknown LoRA {name!r}")

            padding = params_doc.get("padding", DEFAULT_PADDING)
            if not (isinstance(padding, int) and padding >= 0):
                raise ParamOutOfRange("padding", f"got {padding!r}")

            dots = params_doc.get("context_dots")
            if dots is not None:
                dots = [[int(x), int(y)] for x, y in dots]
        except (ExprForgeError, ValueError, TypeError) as e:
            raise bad_request(str(e))

        job_id = uuid.uuid4().hex[:12]
        job_dir = state.run_dir / "jobs" / job_id
        job_dir.mkdir(parents=True)
        (job_dir / "input.png").write_bytes(image_bytes)
        (job_dir / "mask.png").write_bytes(mask.to_png_bytes())
        (job_dir / "request.json").write_text(
            json.dumps(
                {
                    "prompt": prompt,
                    "negative_prompt": params_doc.get("negative_prompt", ""),
                    "params": merged_params,
                    "loras": lora_names,
                    "context_dots": dots,
                },
                ensure_ascii=False,
            ),
            "utf-8",
        )
        job = EditJob(
            id=job_id,
            summary={
                "prompt": prompt,
                "width": image.width,
                "height": image.height,
                "selected_pixels": mask.selected_count,
                "padding": padding,
            },
            dir=job_dir,
        )
        state.store.add(job)
        state.queue.put(job_id)
        return JSONResponse({"job_id": job_id, "state": job.state}, status_code=202)

    def _get_job_or_410(job_id: str) -> EditJob:
        job = state.store.get(job_id)
        if job is None:
            raise HTTPException(status_code=410, detail=f"unknown or evicted job {job_id!r}")
        return job

    @app.get("/api/edits/{job_id}")
    def poll_edit(job_id: str):
        return _get_job_or_410(job_id).to_dict()

    def _serve_artifact(job_id: str, filename: str) -> Response:
        job = _get_job_or_410(job_id)
        if job.state == "failed":
            raise HTTPException(status_code=500, detail=job.error or "edit failed")
        if job.state != "done" or job.dir is None:
            raise HTTPException(status_code=404, detail=f"job {job_id} not finished")
        path = job.dir / filename
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"artifact {filename} missing")
        return Response(content=path.read_bytes(), media_type="image/png")

    @app.get("/api/edits/{job_id}/layer.png")
    def get_layer(job_id: str):
        return _serve_artifact(job_id, "layer.png")

    @app.get("/api/edits/{job_id}/composite.png")
    def get_composite(job_id: str):
        return _serve_artifact(job_id, "composite.png")

    @app.post("/api/diff")
    async def diff_images(request: Request):
        try:
            parts = parse_multipart(request.headers.get("content-type", ""), await request.body())
        except ValueError as e:
            raise bad_request(str(e))
        if "a" not in parts or "b" not in parts:
            raise bad_request("multipart body needs 'a' and 'b' file parts")
        try:
            a = RasterImage.from_png_bytes(parts["a"][1])
            b = RasterImage.from_png_bytes(parts["b"][1])
            mask = None
            if "mask" in parts and parts["mask"][1]:
                mask = SelectionMask.from_png_bytes(parts["mask"][1])
            threshold = state.current_settings()["diff_threshold"]
            if "threshold" in parts and parts["threshold"][1]:
                threshold = int(parts["threshold"][1].decode("utf-8").strip())
            diff = l1_map(a, b)
            report = stats(diff, mask)
            heatmap = render_grayscale(diff, threshold)
        except (ExprForgeError, ValueError) as e:
            raise bad_request(str(e))
        return {
            "stats": report.to_dict(),
            "threshold": threshold,
            "heatmap_png_base64": base64.b64encode(heatmap.to_png_bytes()).decode("ascii"),
        }

    @app.get("/api/settings")
    def get_settings():
        return state.current_settings()

    @app.put("/api/settings")
    async def put_settings(request: Request):
        try:
            update = json.loads(await request.body())
        except json.JSONDecodeError as e:
            raise bad_request(f"invalid JSON body: {e}")
        if not isinstance(update, dict):
            raise bad_request("settings body must be a JSON object")
        merged = _merge_settings(state.current_settings(), update)
        try:
            state.replace_settings(merged)
        except (ExprForgeError, ValueError, TypeError) as e:
            raise bad_request(str(e))
        return state.current_settings()

    @app.get("/api/info")
    def info():
        report = state.db.report()
        if state.backend_override is not None:
            backend_desc = state.backend_override.descriptor()
        else:
            backend_desc = {"kind": state.current_settings()["backend"]}
        return {
            "name": "exprforge",
            "version": app.version,
            "db": report.counts(),
            "backend": backend_desc,
        }

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="panel")

    return app
