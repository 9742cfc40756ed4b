"""Frequency-guided tiled diffusion sampling with progressive upscaling."""

from .fields import Field, Rng, axpy, gaussian_field, load_field, save_field
from .wavelets import WaveletBands, WaveletFilter, dwt2, get_filter, idwt2
from .schedules import NoiseSchedule, build_schedule
from .denoise import (
    AnalyticBackend,
    DenoiseRequest,
    GaussianMixture,
    RemoteBackend,
    gmm_posterior_mean,
)
from .guidance import (
    GuidanceConfig,
    cfg_frequency_guided,
    cfg_standard,
    low_band_only_guidance,
    skip_residual_mix,
)
from .sampler import TrajectoryRecord, ddim_invert, ddim_sample, ddim_step
from .tiling import PatchLayout, extract, accumulate, plan_layout, stream_batches
from .imaging import ImageBuffer, lanczos_resize, load_image, psnr, save_image
from .pipeline import (
    RunManifest,
    StageConfig,
    apply_ablation,
    default_plan,
    demo_backend,
    generate_base,
    run_pipeline,
    run_stage,
)

__version__ = "0.1.0"

__all__ = [
    "AnalyticBackend",
    "DenoiseRequest",
    "Field",
    "GaussianMixture",
    "GuidanceConfig",
    "ImageBuffer",
    "NoiseSchedule",
    "PatchLayout",
    "RemoteBackend",
    "Rng",
    "RunManifest",
    "StageConfig",
    "TrajectoryRecord",
    "WaveletBands",
    "WaveletFilter",
    "apply_ablation",
    "axpy",
    "build_schedule",
    "cfg_frequency_guided",
    "cfg_standard",
    "ddim_invert",
    "ddim_sample",
    "ddim_step",
    "default_plan",
    "demo_backend",
    "dwt2",
    "extract",
    "accumulate",
    "gaussian_field",
    "generate_base",
    "get_filter",
    "gmm_posterior_mean",
    "idwt2",
    "lanczos_resize",
    "load_field",
    "load_image",
    "low_band_only_guidance",
    "plan_layout",
    "psnr",
    "run_pipeline",
    "run_stage",
    "save_field",
    "save_image",
    "skip_residual_mix",
    "stream_batches",
]
