"""Full pipeline orchestration: base generation, progressive detail
stages (upscale, encode, patch-wise inversion, guided patch sampling,
decode), ablation arms, and reproducible run manifests."""

from __future__ import annotations

import hashlib
import json
import tempfile
import time
from dataclasses import dataclass, field as dc_field, replace
from pathlib import Path

import numpy as np

from .denoise import AnalyticBackend, GaussianMixture, RemoteBackend
from .fields import Field, Rng, gaussian_field
from .guidance import GuidanceConfig, skip_residual_mix
from .imaging import ImageBuffer, decode_latent, encode_latent, lanczos_resize, save_image
from .sampler import TrajectoryRecord, ddim_invert, ddim_sample, ddim_step, guided_prediction
from .schedules import build_schedule
from .tiling import extract, accumulate, plan_layout, seam_statistic, stream_batches

DEFAULT_SIGMA_MAX = 10.0
DEFAULT_SIGMA_MIN = 0.01
TRAJECTORY_MEMORY_BUDGET = 512 * 2**20
ABLATION_ARMS = ("full", "standard_cfg", "low_band_only", "no_inversion", "one_shot")


@dataclass(frozen=True)
class StageConfig:
    """One detail stage. Sizes are latent-space pixels (identical to
    image pixels on the analytic backend)."""

    target: tuple[int, int]
    guidance: GuidanceConfig = dc_field(default_factory=GuidanceConfig)
    steps: int = 50
    schedule_kind: str = "karras_rho7"
    sigma_min: float = DEFAULT_SIGMA_MIN
    sigma_max: float = DEFAULT_SIGMA_MAX
    patch: tuple[int, int] = (64, 64)
    batch_size: int = 4
    invert: bool = True
    trajectory_storage: str = "auto"  # auto | memory | disk

    def __post_init__(self):
        th, tw = self.target
        if min(th, tw) < 1:
            raise ValueError(f"stage target must be positive, got {self.target}")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.trajectory_storage not in ("auto", "memory", "disk"):
            raise ValueError(f"unknown trajectory storage {self.trajectory_storage!r}")

    def describe(self) -> dict:
        g = self.guidance
        return {
            "target": list(self.target),
            "steps": self.steps,
            "schedule": self.schedule_kind,
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "patch": list(self.patch),
            "batch_size": self.batch_size,
            "invert": self.invert,
            "guidance": {
                "w": g.w,
                "w_d": g.w_d,
                "mode": g.mode,
                "wavelet": g.filter.name,
                "skip_tau_index": g.skip_tau_index,
                "alpha": g.alpha,
                "skip_orientation": g.skip_orientation,
            },
        }


@dataclass
class RunManifest:
    seed: int
    backend: str
    condition: str | None
    stages: list[dict]
    timings: list[float]
    outputs: list[str]
    hashes: list[str]
    base_hash: str = ""
    final_hash: str = ""

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path) -> "RunManifest":
        return cls(**json.loads(Path(path).read_text()))


def content_hash(img: ImageBuffer) -> str:
    quant = np.round(img.data.astype(np.float64) * 65535.0).astype("<u2")
    h = hashlib.sha256()
    h.update(repr(quant.shape).encode())
    h.update(quant.tobytes())
    return h.hexdigest()


def demo_mixture(channels: int = 3, height: int = 64, width: int = 64) -> GaussianMixture:
    """Deterministic smooth three-component mixture for the analytic backend.

    Means are band-limited cosine landscapes, so Lanczos rescaling and
    the structure-preservation checks behave like natural images.
    """
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij"
    )

    def stack(*planes):
        return Field(np.stack(planes).astype(np.float32))

    r2 = (yy - 0.5) ** 2 + (xx - 0.5) ** 2
    blob = stack(
        0.6 * np.cos(2 * np.pi * np.sqrt(r2)) * np.exp(-4.0 * r2),
        0.5 * np.exp(-6.0 * r2) - 0.2,
        0.4 * np.cos(np.pi * yy) * np.cos(np.pi * xx),
    )
    waves = stack(
        0.5 * np.sin(2 * np.pi * (xx + 0.5 * yy)),
        0.45 * np.sin(2 * np.pi * (1.5 * xx - yy)),
        0.4 * np.cos(2 * np.pi * (0.5 * xx + 1.5 * yy)),
    )
    grid = stack(
        0.35 * np.cos(3 * np.pi * xx) + 0.25 * np.sin(2 * np.pi * yy),
        0.35 * np.cos(3 * np.pi * yy) - 0.15,
        0.3 * np.sin(2 * np.pi * xx) * np.sin(2 * np.pi * yy),
    )
    return GaussianMixture(
        [(0.5, blob, 0.15), (0.3, waves, 0.12), (0.2, grid, 0.18)]
    )


def demo_backend(height: int = 64, width: int = 64) -> AnalyticBackend:
    return AnalyticBackend(demo_mixture(3, height, width))


def generate_base(
    backend,
    condition,
    seed: int,
    native_size: tuple[int, int] | None = None,
    steps: int = 50,
    cfg: GuidanceConfig | None = None,
    sigma_min: float = DEFAULT_SIGMA_MIN,
    sigma_max: float = DEFAULT_SIGMA_MAX,
) -> ImageBuffer:
    """Native-resolution generation: analytic backends sample the ODE
    from seeded noise; remote backends delegate to the service."""
    if isinstance(backend, RemoteBackend):
        if native_size is None:
            health = backend.health()
            res = int(health["native_resolution"])
            native_size = (res, res)
        pixels = backend.generate_base(
            prompt="" if condition is None else str(condition),
            seed=seed,
            width=native_size[1],
            height=native_size[0],
        )
        return ImageBuffer.from_field(pixels)
    shape = backend.latent_shape
    if native_size is not None and tuple(native_size) != shape[1:]:
        raise ValueError(f"analytic backend is fixed at {shape[1:]}, got {native_size}")
    if cfg is None:
        cfg = GuidanceConfig(mode="standard_cfg")
    schedule = build_schedule("karras_rho7", steps, sigma_min, sigma_max)
    noise = gaussian_field(Rng(seed), shape)
    z_t = Field(np.float32(schedule.sigma_max) * noise.data)
    z_0 = ddim_sample(z_t, schedule, backend, cfg, condition)
    return decode_latent(z_0, backend)


def run_stage(
    input_img: ImageBuffer,
    stage: StageConfig,
    backend,
    condition=None,
    seed: int = 0,
    workdir: Path | str | None = None,
) -> tuple[ImageBuffer, dict]:
    """Upscale, encode, invert per patch, resample with guidance and
    skip residuals under per-step canvas re-blending, decode.

    The seed is consulted only by the no-inversion arm, which starts
    patches from fresh noise instead of inverted latents.
    """
    th, tw = stage.target
    if input_img.height >= th or input_img.width >= tw:
        raise ValueError(
            f"stage target {stage.target} must exceed input {(input_img.height, input_img.width)}"
        )
    started = time.perf_counter()
    cfg = stage.guidance
    schedule = build_schedule(stage.schedule_kind, stage.steps, stage.sigma_min, stage.sigma_max)
    sig = schedule.sigmas
    n = schedule.step_count

    upscaled = lanczos_resize(input_img, th, tw)
    z0 = encode_latent(upscaled, backend)
    c = z0.channels
    layout = plan_layout((z0.height, z0.width), stage.patch)
    ph, pw = layout.patch

    trajectories: list[TrajectoryRecord] | None = None
    tempdir = None
    if stage.invert:
        per_run_bytes = (n + 1) * len(layout) * c * ph * pw * 4
        on_disk = stage.trajectory_storage == "disk" or (
            stage.trajectory_storage == "auto" and per_run_bytes > TRAJECTORY_MEMORY_BUDGET
        )
        traj_root = None
        if on_disk:
            if workdir is None:
                tempdir = tempfile.TemporaryDirectory(prefix="hiwave_traj_")
                traj_root = Path(tempdir.name)
            else:
                traj_root = Path(workdir) / "trajectories"
        trajectories = []
        for idx in range(len(layout)):
            store = None if traj_root is None else traj_root / f"patch_{idx:03d}"
            trajectories.append(
                ddim_invert(extract(z0, layout, idx), schedule, backend, condition, store_dir=store)
            )
        acc = np.zeros((c,) + layout.canvas, dtype=np.float32)
        for idx in range(len(layout)):
            accumulate(acc, layout, idx, trajectories[idx].latent_at(0))
        canvas = Field(acc)
    else:
        noise = gaussian_field(Rng(seed), (c,) + layout.canvas)
        canvas = Field(np.float32(schedule.sigma_max) * noise.data)

    for i in range(n):
        acc = np.zeros((c,) + layout.canvas, dtype=np.float32)
        for batch in stream_batches(layout, stage.batch_size):
            for idx in batch:
                zp = extract(canvas, layout, idx)
                if trajectories is not None:
                    zp = skip_residual_mix(zp, trajectories[idx].latent_at(i), i, n, cfg)
                d = guided_prediction(backend, zp, float(sig[i]), cfg, condition, step_index=i)
                accumulate(acc, layout, idx, ddim_step(zp, float(sig[i]), float(sig[i + 1]), d))
        canvas = Field(acc)

    out = decode_latent(canvas, backend)
    if tempdir is not None:
        tempdir.cleanup()
    seams = seam_statistic(out.data.transpose(2, 0, 1), layout)
    stats = {
        "patches": len(layout),
        "steps": n,
        "seconds": time.perf_counter() - started,
        "seam": seams["seam"],
        "interior": seams["interior"],
    }
    return out, stats


def default_plan(
    targets: list[tuple[int, int]],
    guidance: GuidanceConfig | None = None,
    steps: int = 50,
    patch: tuple[int, int] = (64, 64),
    batch_size: int = 4,
    taus: list[int] | None = None,
    schedule_kind: str = "karras_rho7",
    sigma_min: float = DEFAULT_SIGMA_MIN,
    sigma_max: float = DEFAULT_SIGMA_MAX,
) -> list[StageConfig]:
    """Progressive plan, one stage per target, each doubling the last.

    Per-stage skip thresholds default to the 15/50 then 30/50 ratios,
    scaled to the step budget.
    """
    if guidance is None:
        guidance = GuidanceConfig()
    if taus is None:
        ratios = [0.3, 0.6]
        taus = [
            round((ratios[min(k, len(ratios) - 1)]) * steps) for k in range(len(targets))
        ]
    if len(taus) < len(targets):
        taus = list(taus) + [taus[-1]] * (len(targets) - len(taus))
    plan = []
    for k, tgt in enumerate(targets):
        plan.append(
            StageConfig(
                target=tuple(tgt),
                guidance=replace(guidance, skip_tau_index=int(taus[k])),
                steps=steps,
                schedule_kind=schedule_kind,
                sigma_min=sigma_min,
                sigma_max=sigma_max,
                patch=patch,
                batch_size=batch_size,
            )
        )
    return plan


def apply_ablation(plan: list[StageConfig], arm: str) -> list[StageConfig]:
    """Rewrite a plan into one of the appendix comparison arms."""
    if arm not in ABLATION_ARMS:
        raise ValueError(f"unknown ablation arm {arm!r}, expected one of {ABLATION_ARMS}")
    if arm == "full":
        return list(plan)
    if arm == "one_shot":
        last = plan[-1]
        return [last]
    out = []
    for stage in plan:
        if arm == "standard_cfg":
            out.append(replace(stage, guidance=replace(stage.guidance, mode="standard_cfg")))
        elif arm == "low_band_only":
            out.append(replace(stage, guidance=replace(stage.guidance, mode="low_band_only")))
        else:  # no_inversion: fresh-noise patches, no trajectory so no skip
            out.append(
                replace(
                    stage,
                    invert=False,
                    guidance=replace(stage.guidance, skip_tau_index=0),
                )
            )
    return out


def run_pipeline(
    plan: list[StageConfig],
    backend,
    seed: int,
    condition=None,
    out_dir: Path | str | None = None,
    base_image: ImageBuffer | None = None,
    base_steps: int = 50,
    base_cfg: GuidanceConfig | None = None,
) -> tuple[ImageBuffer, RunManifest]:
    """Chain detail stages over a generated (or supplied) base image.

    An empty plan returns the base unchanged.  Stage sizes must be
    strictly increasing.
    """
    sizes = [tuple(s.target) for s in plan]
    for prev, cur in zip(sizes, sizes[1:]):
        if cur[0] <= prev[0] or cur[1] <= prev[1]:
            raise ValueError(f"plan sizes must increase, got {prev} then {cur}")

    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)

    if base_image is None:
        base_image = generate_base(backend, condition, seed, steps=base_steps, cfg=base_cfg)
    manifest = RunManifest(
        seed=int(seed),
        backend=backend.describe() if hasattr(backend, "describe") else repr(backend),
        condition=None if condition is None else str(condition),
        stages=[s.describe() for s in plan],
        timings=[],
        outputs=[],
        hashes=[],
        base_hash=content_hash(base_image),
    )

    def emit(img: ImageBuffer, name: str) -> None:
        if out_path is not None:
            p = out_path / name
            save_image(img, p)
            manifest.outputs.append(str(p))
        else:
            manifest.outputs.append(name)

    emit(base_image, "base.png")
    img = base_image
    for k, stage in enumerate(plan):
        img, stats = run_stage(img, stage, backend, condition, seed, workdir=out_path)
        manifest.timings.append(stats["seconds"])
        manifest.hashes.append(content_hash(img))
        manifest.stages[k].update({f"stat_{k2}": v for k2, v in stats.items() if k2 != "seconds"})
        emit(img, f"stage_{k:02d}_{stage.target[0]}x{stage.target[1]}.png")
    manifest.final_hash = content_hash(img)
    if out_path is not None:
        manifest.save(out_path / "manifest.json")
    return img, manifest
