"""Command-line interface for training, inspection, and serving.

Stage commands (gen-data through run-all) drive the cached pipeline: each
one brings its upstream stages up to date first, so any command is a valid
entry point into a fresh or partially built artifact directory. Workflow
commands (reconstruct, generate, eval, serve) consume the trained bundle.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .errors import GpdesignError
from .microgen import RVEImage
from .oracle import MaterialPoint
from .pipeline import (
    BUNDLE_FILENAME,
    PipelineConfig,
    config_from_dict,
    evaluate_run,
    generate_designs,
    load_bundle,
    profile_config,
    reconstruct_for_geometry,
    run_stage,
    run_training_pipeline,
)
from .spgd import evaluate as evaluate_field

_STAGE_BY_COMMAND = {
    "gen-data": "dataset",
    "fit-spgd": "spgd",
    "build-table": "latent_table",
    "train-map": "regressors",
    "fit-gmm": "gmm",
}


def _load_config(profile: str, config_path: str | None, out_dir: str | None) -> PipelineConfig:
    cfg = profile_config(profile, out_dir=out_dir)
    if config_path is not None:
        try:
            doc = json.loads(Path(config_path).read_text())
        except json.JSONDecodeError as exc:
            raise click.ClickException(f"[config] {config_path} is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise click.ClickException(f"[config] {config_path} must hold a JSON object")
        try:
            cfg = config_from_dict(doc, base=cfg)
        except (ValueError, TypeError) as exc:
            raise click.ClickException(f"[config] {exc}")
        if out_dir is not None:
            cfg = dataclasses.replace(cfg, out_dir=str(out_dir))
    return cfg


@click.group()
@click.option("--profile", type=click.Choice(["desk", "paper"]), default="desk",
              show_default=True, help="Base configuration profile.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file overriding profile fields.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None,
              help="Artifact directory (defaults to the profile's).")
@click.option("--force", is_flag=True, help="Rerun stages even when cached artifacts match.")
@click.pass_context
def main(ctx: click.Context, profile: str, config_path: str | None,
         out_dir: str | None, force: bool) -> None:
    """Generative design pipeline for parametric microstructures."""
    ctx.obj = {"config": _load_config(profile, config_path, out_dir), "force": force}


def _run_stage_command(ctx: click.Context, stage: str) -> None:
    cfg: PipelineConfig = ctx.obj["config"]
    try:
        run_stage(cfg, stage, force=ctx.obj["force"])
    except GpdesignError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{stage}: {Path(cfg.out_dir) / (stage + '.gpdc')}")


@main.command("gen-data")
@click.pass_context
def gen_data(ctx: click.Context) -> None:
    """Sample the training and test geometry datasets."""
    _run_stage_command(ctx, "dataset")


@main.command("fit-spgd")
@click.pass_context
def fit_spgd_cmd(ctx: click.Context) -> None:
    """Fit separated stress surrogates for every dataset geometry."""
    _run_stage_command(ctx, "spgd")


@main.command("train-rrae")
@click.argument("which", type=click.Choice(["geometry", "spatial", "m1", "m2"]))
@click.pass_context
def train_rrae_cmd(ctx: click.Context, which: str) -> None:
    """Train one of the four reduced autoencoders."""
    _run_stage_command(ctx, f"rrae_{which}")


@main.command("build-table")
@click.pass_context
def build_table(ctx: click.Context) -> None:
    """Assemble the latent coefficient table from the trained autoencoders."""
    _run_stage_command(ctx, "latent_table")


@main.command("train-map")
@click.pass_context
def train_map(ctx: click.Context) -> None:
    """Train the latent regressors mapping geometry codes to field codes."""
    _run_stage_command(ctx, "regressors")


@main.command("fit-gmm")
@click.pass_context
def fit_gmm_cmd(ctx: click.Context) -> None:
    """Fit the mixture density over training geometry codes."""
    _run_stage_command(ctx, "gmm")


@main.command("run-all")
@click.pass_context
def run_all(ctx: click.Context) -> None:
    """Run every pipeline stage and assemble the model bundle."""
    cfg: PipelineConfig = ctx.obj["config"]
    try:
        run_training_pipeline(cfg, force=ctx.obj["force"])
    except GpdesignError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"bundle: {Path(cfg.out_dir) / BUNDLE_FILENAME}")


def _require_bundle(cfg: PipelineConfig, command: str):
    path = Path(cfg.out_dir) / BUNDLE_FILENAME
    if not path.exists():
        raise click.ClickException(
            f"[{command}] no bundle at {path}; run 'gpdesign run-all' first")
    try:
        return load_bundle(path)
    except GpdesignError as exc:
        raise click.ClickException(f"[{command}] {exc}")


def _read_mask_png(path: str, resolution: int, command: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            gray = np.asarray(img.convert("L"))
    except OSError as exc:
        raise click.ClickException(f"[{command}] cannot read image {path}: {exc}")
    if gray.shape != (resolution, resolution):
        raise click.ClickException(
            f"[{command}] image is {gray.shape[0]}x{gray.shape[1]}, "
            f"bundle expects {resolution}x{resolution}")
    return (gray > 127).astype(np.uint8)


def _write_mask_png(path: Path, mask: np.ndarray) -> None:
    Image.fromarray((np.asarray(mask) > 0.5).astype(np.uint8) * 255, "L").save(path)


def _write_field_png(path: Path, field: np.ndarray) -> None:
    lo, hi = float(field.min()), float(field.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    Image.fromarray(((field - lo) * scale).astype(np.uint8), "L").save(path)


@main.command("reconstruct")
@click.option("--image", "image_path", required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Binary geometry PNG (inclusion bright, matrix dark).")
@click.option("--mu1", type=float, default=None,
              help="First material parameter (default: range midpoint).")
@click.option("--mu2", type=float, default=None,
              help="Second material parameter (default: range midpoint).")
@click.pass_context
def reconstruct(ctx: click.Context, image_path: str,
                mu1: float | None, mu2: float | None) -> None:
    """Predict the stress field for a geometry image at one material point."""
    cfg: PipelineConfig = ctx.obj["config"]
    bundle = _require_bundle(cfg, "reconstruct")
    mask = _read_mask_png(image_path, bundle.resolution, "reconstruct")
    if mu1 is None:
        mu1 = 0.5 * (bundle.basis1.lo + bundle.basis1.hi)
    if mu2 is None:
        mu2 = 0.5 * (bundle.basis2.lo + bundle.basis2.hi)
    try:
        solution = reconstruct_for_geometry(bundle, RVEImage(bundle.resolution, mask))
        field = evaluate_field(solution, MaterialPoint(mu1, mu2))
    except GpdesignError as exc:
        raise click.ClickException(f"[reconstruct] {exc}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    np.save(out / "reconstruct_field.npy", field)
    _write_field_png(out / "reconstruct_field.png", field)
    click.echo(json.dumps({
        "mu1": mu1,
        "mu2": mu2,
        "field_min": float(field.min()),
        "field_max": float(field.max()),
        "field_mean": float(field.mean()),
        "field_npy": str(out / "reconstruct_field.npy"),
        "field_png": str(out / "reconstruct_field.png"),
    }, indent=2, sort_keys=True))


@main.command("generate")
@click.option("--n", "count", type=int, required=True, help="Number of designs to draw.")
@click.option("--seed", type=int, default=0, show_default=True, help="Sampling seed.")
@click.pass_context
def generate(ctx: click.Context, count: int, seed: int) -> None:
    """Sample new geometry designs from the fitted density model."""
    cfg: PipelineConfig = ctx.obj["config"]
    bundle = _require_bundle(cfg, "generate")
    try:
        designs = generate_designs(bundle, count, seed)
    except (GpdesignError, ValueError) as exc:
        raise click.ClickException(f"[generate] {exc}")
    out = Path(cfg.out_dir) / "generated"
    out.mkdir(parents=True, exist_ok=True)
    alphas = np.stack([alpha for alpha, _, _ in designs])
    np.save(out / "alphas.npy", alphas)
    for i, (_, mask, _) in enumerate(designs):
        _write_mask_png(out / f"design_{i:04d}.png", mask)
    click.echo(f"generate: wrote {count} masks and alphas.npy to {out}")


@main.command("eval")
@click.pass_context
def eval_cmd(ctx: click.Context) -> None:
    """Report reconstruction, surrogate, and generation quality metrics."""
    cfg: PipelineConfig = ctx.obj["config"]
    try:
        metrics = evaluate_run(cfg, force=ctx.obj["force"])
    except GpdesignError as exc:
        raise click.ClickException(str(exc))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(metrics, indent=2, sort_keys=True, default=float)
    (out / "eval.json").write_text(text + "\n")
    click.echo(text)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8642, show_default=True)
@click.pass_context
def serve(ctx: click.Context, host: str, port: int) -> None:
    """Serve the trained bundle over HTTP."""
    import uvicorn

    from .service import build_app

    cfg: PipelineConfig = ctx.obj["config"]
    bundle = _require_bundle(cfg, "serve")
    uvicorn.run(build_app(bundle), host=host, port=port)


if __name__ == "__main__":
    main()
