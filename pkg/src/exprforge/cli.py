"""Command-line entry points."""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from .backends import HttpBackendConfig, make_backend
from .bench import build_bench_request, compare, run_benchmark
from .diff_analyzer import DEFAULT_THRESHOLD, l1_map, render_grayscale, stats
from .edit_pipeline import HyperParams
from .errors import ExprForgeError
from .expression_db import load_database, sample_db_path
from .prompting import LoRAConfig
from .raster import RasterImage, SelectionMask
from .retrieval import RetrievalQuery, build_index, retrieve


@click.group()
def main():
    """Expression-tag editing toolkit."""


@main.group()
def db():
    """Database inspection commands."""


@db.command("validate")
@click.argument("path", type=click.Path(exists=False))
def db_validate(path):
    """Load a tag database and print its counts; exit 1 on the first error."""
    try:
        database = load_database(Path(path))
    except ExprForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    report = database.report()
    click.echo(f"tags        {report.n_tags}")
    click.echo(f"aliases     {report.n_aliases}")
    click.echo(f"stories     {report.n_stories}")
    click.echo(f"image refs  {report.n_image_refs}")
    for warning in report.warnings:
        click.echo(f"warning: {warning}")


@main.command("retrieve")
@click.argument("text")
@click.option("--db", "db_path", type=click.Path(exists=True), default=None,
              help="Database directory (default: bundled sample).")
@click.option("--k", default=5, show_default=True, help="Number of results.")
def retrieve_cmd(text, db_path, k):
    """Rank expression tags against free-form text."""
    database = load_database(Path(db_path)) if db_path else load_database(sample_db_path())
    index = build_index(database)
    try:
        results = retrieve(index, RetrievalQuery(text=text, k=k))
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    if not results:
        click.echo("no matches")
        return
    width = max(len(r.tag_name) for r in results)
    for rank, r in enumerate(results, start=1):
        score = "exact" if r.score == float("inf") else f"{r.score:.4f}"
        fields = ",".join(r.matched_fields)
        click.echo(f"{rank:>2}  {r.tag_name.ljust(width)}  {score:>10}  {fields}")


@main.command("diff")
@click.argument("orig", type=click.Path(exists=True))
@click.argument("edited", type=click.Path(exists=True))
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None)
@click.option("--threshold", default=DEFAULT_THRESHOLD, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write the grayscale heatmap PNG here.")
def diff_cmd(orig, edited, mask_path, threshold, out_path):
    """Print L1 diff stats as JSON; optionally write the heatmap."""
    try:
        a = RasterImage.load(Path(orig))
        b = RasterImage.load(Path(edited))
        mask = SelectionMask.load(Path(mask_path)) if mask_path else None
        diff = l1_map(a, b)
        report = stats(diff, mask)
        if out_path:
            render_grayscale(diff, threshold).save(Path(out_path))
    except ExprForgeError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(1)
    click.echo(json.dumps(report.to_dict(), indent=2))


@main.command("serve")
@click.option("--db", "db_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True)
@click.option("--backend", "backend_kind",
              type=click.Choice(["stub", "http", "timing"]), default="stub",
              show_default=True)
@click.option("--run-dir", type=click.Path(), default=None,
              help="Job artifact directory (default: a fresh temp dir).")
@click.option("--static", "static_dir", type=click.Path(exists=True), default=None,
              help="Serve a built web panel from this directory.")
def serve_cmd(db_path, host, port, backend_kind, run_dir, static_dir):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    backend = None
    if backend_kind != "http":
        backend = make_backend(backend_kind)
    app = create_app(
        db_path=db_path,
        run_dir=run_dir,
        backend=backend,
        static_dir=static_dir,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("bench")
@click.option("--backend", "backend_kind",
              type=click.Choice(["stub", "http", "timing"]), default="stub",
              show_default=True)
@click.option("--runs", default=10, show_default=True)
@click.option("--size", default=1024, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file with a list of benchmark configs to compare.")
@click.option("--out", "out_path", type=click.Path(), default="bench_report.json",
              show_default=True, help="JSON report destination.")
def bench_cmd(backend_kind, runs, size, config_path, out_path):
    """Time edits on a square fixture and report mean, std, and changes."""
    configs: list[dict] = [{}]
    if config_path:
        doc = json.loads(Path(config_path).read_text("utf-8"))
        configs = doc["configs"] if isinstance(doc, dict) else doc
        if not isinstance(configs, list) or not configs:
            click.echo("error: config file must hold a non-empty list of configs", err=True)
            sys.exit(1)

    reports = []
    for i, cfg in enumerate(configs):
        label = cfg.get("label", f"config {i}" if config_path else backend_kind)
        params = HyperParams(
            denoising_strength=cfg.get("denoising_strength", 1.0),
            controlnet_steps=cfg.get("controlnet_steps", 0.5),
            sampling_steps=cfg.get("sampling_steps", 30),
            cfg_scale=cfg.get("cfg_scale", 7.0),
            seed=cfg.get("seed", 0),
        )
        request = build_bench_request(size=size, params=params,
                                      prompt=cfg.get("prompt", "smile"))
        if cfg.get("lora"):
            lora = cfg["lora"]
            request = dataclasses.replace(
                request,
                loras=(LoRAConfig(
                    name=lora["name"],
                    trigger_words=tuple(lora.get("trigger_words", ())),
                    weight=lora.get("weight", 1.0),
                    step_override=lora.get("step_override"),
                    cfg_override=lora.get("cfg_override"),
                ),),
            )
        http_config = None
        if backend_kind == "http" and cfg.get("base_url"):
            http_config = HttpBackendConfig(base_url=cfg["base_url"])
        backend = make_backend(
            backend_kind,
            http_config=http_config,
            delay_profile=cfg.get("delay_profile", 0.0),
        )
        report = run_benchmark(backend, request, n=runs, label=label)
        reports.append(report)
        click.echo(f"{label}: mean {report.mean_ms:.2f} ms, std {report.std_ms:.2f} ms, n={report.n}")

    if len(reports) >= 2:
        click.echo("")
        click.echo(compare(reports))
    Path(out_path).write_text(
        json.dumps([r.to_dict() for r in reports], indent=2), "utf-8"
    )
    click.echo(f"wrote {out_path}")


if __name__ == "__main__":
    main()
