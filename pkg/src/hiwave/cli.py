"""Command-line interface."""

from __future__ import annotations

import json
from pathlib import Path

import click
import numpy as np

from .denoise import RemoteBackend
from .fields import load_field
from .guidance import MODES, SKIP_ORIENTATIONS, GuidanceConfig
from .imaging import ImageBuffer, lanczos_resize, load_image, psnr, save_image
from .pipeline import (
    ABLATION_ARMS,
    apply_ablation,
    default_plan,
    demo_backend,
    run_pipeline,
)
from .sampler import ddim_invert
from .schedules import KINDS, build_schedule
from .tiling import plan_layout
from .wavelets import dwt2, get_filter


def _parse_plan(text: str) -> list[tuple[int, int]]:
    targets = []
    for token in text.split(","):
        token = token.strip()
        if "x" in token:
            h, w = token.split("x")
            targets.append((int(h), int(w)))
        else:
            targets.append((int(token), int(token)))
    return targets


def _parse_taus(text: str | None) -> list[int] | None:
    if not text:
        return None
    return [int(t) for t in text.split(",")]


def _make_backend(backend: str, remote_url: str | None, native: int):
    if backend == "remote":
        if not remote_url:
            raise click.UsageError("--remote-url is required with --backend remote")
        return RemoteBackend(remote_url)
    return demo_backend(native, native)


_shared = [
    click.option("--seed", default=0, show_default=True, type=int),
    click.option("--backend", default="analytic", show_default=True,
                 type=click.Choice(["analytic", "remote"])),
    click.option("--remote-url", default=None, help="Service URL for --backend remote."),
    click.option("--w", default=7.5, show_default=True, help="Standard guidance strength."),
    click.option("--wd", default=7.5, show_default=True, help="Detail-band guidance strength."),
    click.option("--tau", default=None, help="Comma-separated per-stage skip thresholds."),
    click.option("--alpha", default=3.0, show_default=True, help="Skip cosine-decay exponent."),
    click.option("--mode", default="frequency_guided", show_default=True,
                 type=click.Choice(list(MODES))),
    click.option("--wavelet", default="sym4", show_default=True,
                 type=click.Choice(["sym4", "haar"])),
    click.option("--skip-orientation", default="prose", show_default=True,
                 type=click.Choice(list(SKIP_ORIENTATIONS))),
    click.option("--patch", default=64, show_default=True, help="Patch size (latent pixels)."),
    click.option("--batch", default=4, show_default=True, help="Patches per streamed batch."),
    click.option("--steps", default=50, show_default=True),
    click.option("--sigma-min", default=0.01, show_default=True),
    click.option("--sigma-max", default=10.0, show_default=True),
    click.option("--schedule", default="karras_rho7", show_default=True,
                 type=click.Choice(list(KINDS))),
    click.option("--ablation", default="full", show_default=True,
                 type=click.Choice(list(ABLATION_ARMS))),
    click.option("--out", "out_dir", default="out", show_default=True,
                 type=click.Path(path_type=Path)),
]


def shared_options(fn):
    for opt in reversed(_shared):
        fn = opt(fn)
    return fn


def _build_stage_plan(targets, w, wd, tau, alpha, mode, wavelet, skip_orientation,
                      patch, batch, steps, schedule, sigma_min, sigma_max):
    guidance = GuidanceConfig(
        w=w, w_d=wd, filter=get_filter(wavelet), mode=mode,
        alpha=alpha, skip_orientation=skip_orientation,
    )
    return default_plan(
        targets, guidance=guidance, steps=steps,
        patch=(patch, patch), batch_size=batch, taus=_parse_taus(tau),
        schedule_kind=schedule, sigma_min=sigma_min, sigma_max=sigma_max,
    )


@click.group()
def main():
    """Frequency-guided tiled diffusion sampling engine."""


@main.command()
@click.option("--prompt", "--condition", "condition", default="0", show_default=True,
              help="Condition identifier (mixture component for the analytic backend).")
@click.option("--plan", default="64,128,256", show_default=True,
              help="Comma-separated stage targets; first entry is the base resolution.")
@shared_options
def generate(condition, plan, seed, backend, remote_url, w, wd, tau, alpha, mode, wavelet,
             skip_orientation, patch, batch, steps, sigma_min, sigma_max, schedule,
             ablation, out_dir):
    """Generate a base image and progressively upscale it."""
    targets = _parse_plan(plan)
    native = targets[0]
    be = _make_backend(backend, remote_url, native[0])
    stage_plan = _build_stage_plan(targets[1:], w, wd, tau, alpha, mode, wavelet,
                                   skip_orientation, patch, batch, steps,
                                   schedule, sigma_min, sigma_max)
    stage_plan = apply_ablation(stage_plan, ablation)
    img, manifest = run_pipeline(stage_plan, be, seed, condition, out_dir=out_dir)
    click.echo(f"final {img.height}x{img.width} -> {manifest.outputs[-1]}")
    click.echo(f"manifest: {Path(out_dir) / 'manifest.json'}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--plan", default="2x", show_default=True,
              help="Stage targets, or '2x'/'4x' to double progressively from the input size.")
@click.option("--condition", default="0", show_default=True)
@shared_options
def upscale(input_path, plan, condition, seed, backend, remote_url, w, wd, tau, alpha, mode,
            wavelet, skip_orientation, patch, batch, steps, sigma_min, sigma_max, schedule,
            ablation, out_dir):
    """Upscale an existing image (generated or real)."""
    img = load_image(input_path)
    if plan.endswith("x") and plan[:-1].isdigit():
        factor = int(plan[:-1])
        targets, h, w_px = [], img.height, img.width
        while factor > 1:
            h, w_px = h * 2, w_px * 2
            targets.append((h, w_px))
            factor //= 2
    else:
        targets = _parse_plan(plan)
    be = _make_backend(backend, remote_url, img.height)
    stage_plan = _build_stage_plan(targets, w, wd, tau, alpha, mode, wavelet,
                                   skip_orientation, patch, batch, steps,
                                   schedule, sigma_min, sigma_max)
    stage_plan = apply_ablation(stage_plan, ablation)
    out, manifest = run_pipeline(stage_plan, be, seed, condition, out_dir=out_dir,
                                 base_image=img)
    click.echo(f"final {out.height}x{out.width} -> {manifest.outputs[-1]}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, path_type=Path),
              help="Image (.png/.ppm) or raw field (.fld) to invert.")
@click.option("--condition", default="0", show_default=True)
@click.option("--seed", default=0, type=int, hidden=True)
@click.option("--backend", default="analytic", type=click.Choice(["analytic", "remote"]))
@click.option("--remote-url", default=None)
@click.option("--steps", default=50, show_default=True)
@click.option("--sigma-min", default=0.01, show_default=True)
@click.option("--sigma-max", default=10.0, show_default=True)
@click.option("--schedule", default="karras_rho7", type=click.Choice(list(KINDS)))
@click.option("--out", "out_dir", default="inversion", show_default=True,
              type=click.Path(path_type=Path))
def invert(input_path, condition, seed, backend, remote_url, steps, sigma_min, sigma_max,
           schedule, out_dir):
    """DDIM-invert an image to its noise latent, archiving the trajectory."""
    if input_path.suffix == ".fld":
        latent = load_field(input_path)
        be = _make_backend(backend, remote_url, latent.height)
    else:
        img = load_image(input_path)
        be = _make_backend(backend, remote_url, img.height)
        latent = be.encode(img.to_field())
    sched = build_schedule(schedule, steps, sigma_min, sigma_max)
    out_dir.mkdir(parents=True, exist_ok=True)
    record = ddim_invert(latent, sched, be, condition, store_dir=out_dir)
    (out_dir / "manifest.json").write_text(json.dumps(
        {"sigmas": [float(s) for s in record.sigmas], "steps": record.step_count,
         "condition": str(condition)}, indent=2))
    click.echo(f"{record.step_count + 1} latents -> {out_dir}")


@main.command("inspect-bands")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--wavelet", default="sym4", show_default=True, type=click.Choice(["sym4", "haar"]))
@click.option("--out", "out_dir", default="bands", show_default=True,
              type=click.Path(path_type=Path))
def inspect_bands(input_path, wavelet, out_dir):
    """Write each sub-band as a min-max normalized image."""
    img = load_image(input_path)
    bands = dwt2(img.to_field(), get_filter(wavelet))
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in ("L", "H", "V", "D"):
        band = getattr(bands, name).data
        lo, hi = float(band.min()), float(band.max())
        scaled = (band - lo) / (hi - lo) if hi > lo else np.zeros_like(band)
        save_image(ImageBuffer(scaled.transpose(1, 2, 0)), out_dir / f"band_{name}.png")
        click.echo(f"band_{name}.png range [{lo:.4f}, {hi:.4f}]")


@main.command("psnr")
@click.argument("image_a", type=click.Path(exists=True, path_type=Path))
@click.argument("image_b", type=click.Path(exists=True, path_type=Path))
def psnr_cmd(image_a, image_b):
    """Peak signal-to-noise ratio between two images, in dB."""
    a, b = load_image(image_a), load_image(image_b)
    if (a.height, a.width) != (b.height, b.width):
        b = lanczos_resize(b, a.height, a.width)
    click.echo(f"{psnr(a, b):.3f} dB")


@main.command()
@click.option("--run", "run_dir", required=True, type=click.Path(exists=True, path_type=Path),
              help="Directory holding manifest.json and stage images.")
@click.option("--out", "out_dir", default=None, type=click.Path(path_type=Path))
def report(run_dir, out_dir):
    """Render metrics.csv and figures for a finished run."""
    from .report import build_report

    written = build_report(run_dir, out_dir or run_dir / "report")
    for kind, path in written.items():
        click.echo(f"{kind}: {path}")


@main.command()
@click.option("--canvas", required=True, help="Canvas size, e.g. 128 or 128x96.")
@click.option("--patch", default=64, show_default=True, type=int)
def layout(canvas, patch):
    """Dump a patch layout as JSON."""
    (size,) = _parse_plan(canvas)
    click.echo(plan_layout(size, (patch, patch)).to_json())


if __name__ == "__main__":
    main()
