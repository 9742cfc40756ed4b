"""Deterministic DDIM sampling and inversion of the probability-flow ODE.

Both directions use the same Euler step of the sigma-parameterized
(variance-exploding) ODE, so inversion is just the schedule walked with
sigma increasing.  No randomness is consulted after the starting latent
is fixed.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import Field, ShapeMismatch, load_field, save_field
from .guidance import GuidanceConfig, cfg_frequency_guided, cfg_standard, skip_residual_mix
from .schedules import NoiseSchedule


class SamplingError(RuntimeError):
    """Backend failure wrapped with trajectory position context."""


@dataclass
class TrajectoryRecord:
    """Latents aligned 1:1 with a schedule's sigma grid.

    Entry k sits at noise level sigmas[k], so entry 0 is the fully
    noised z_T and the last entry is the clean input.  Latents live in
    memory or, when a directory is given, as one field file per step.
    """

    sigmas: np.ndarray
    latents: list[Field] | None = None
    directory: Path | None = None

    def __post_init__(self):
        self.sigmas = np.asarray(self.sigmas, dtype=np.float64)
        if (self.latents is None) == (self.directory is None):
            raise ValueError("exactly one of latents or directory must be set")
        if self.latents is not None and len(self.latents) != self.sigmas.size:
            raise ValueError(
                f"{len(self.latents)} latents misaligned with {self.sigmas.size} sigmas"
            )
        if self.directory is not None:
            self.directory = Path(self.directory)

    @property
    def step_count(self) -> int:
        return self.sigmas.size - 1

    @staticmethod
    def step_path(directory: Path, index: int) -> Path:
        return Path(directory) / f"step_{index:04d}.fld"

    def latent_at(self, index: int) -> Field:
        if not 0 <= index < self.sigmas.size:
            raise IndexError(f"step {index} out of range for {self.sigmas.size} entries")
        if self.latents is not None:
            return self.latents[index]
        return load_field(self.step_path(self.directory, index))


def ddim_step(z: Field, sigma_from: float, sigma_to: float, denoised: Field) -> Field:
    """Euler step z' = denoised + (sigma_to/sigma_from) (z - denoised).

    Direction-agnostic: sigma_to above sigma_from renoises, below
    denoises.  A zero sigma_from collapses to the denoised estimate.
    """
    if sigma_from < 0 or sigma_to < 0:
        raise ValueError(f"sigmas must be non-negative, got {sigma_from} -> {sigma_to}")
    if z.shape != denoised.shape:
        raise ShapeMismatch(z.shape, denoised.shape)
    if sigma_from == 0.0:
        return denoised
    if sigma_to == sigma_from:
        return z
    ratio = np.float32(sigma_to / sigma_from)
    return Field(denoised.data + ratio * (z.data - denoised.data))


def guided_prediction(
    backend,
    z: Field,
    sigma: float,
    cfg: GuidanceConfig,
    condition,
    step_index: int | None = None,
) -> Field:
    """Combined denoiser output for one latent at one noise level."""
    from .denoise import DenoiseRequest

    where = "" if step_index is None else f" at step {step_index}"
    try:
        d_cond = backend.denoise(DenoiseRequest(z, sigma, condition))
        if cfg.mode == "conditional_only":
            return d_cond
        d_uncond = backend.denoise(DenoiseRequest(z, sigma, None))
    except Exception as exc:
        raise SamplingError(f"backend failed{where} (sigma={sigma:.6g}): {exc}") from exc
    return cfg_frequency_guided(d_cond, d_uncond, cfg)


def ddim_sample(
    z_T: Field,
    schedule: NoiseSchedule,
    backend,
    cfg: GuidanceConfig,
    condition=None,
    inverted_trajectory: TrajectoryRecord | None = None,
) -> Field:
    """Reverse solve from sigma_max to 0 under the configured guidance.

    When an inversion trajectory is supplied, each step first mixes the
    live latent with its recorded partner (skip residual); the mix is a
    no-op at and past cfg.skip_tau_index.
    """
    sig = schedule.sigmas
    n = schedule.step_count
    if inverted_trajectory is not None and inverted_trajectory.step_count != n:
        raise ValueError(
            f"trajectory has {inverted_trajectory.step_count} steps, schedule has {n}"
        )
    z = z_T
    for i in range(n):
        if inverted_trajectory is not None:
            z = skip_residual_mix(z, inverted_trajectory.latent_at(i), i, n, cfg)
        d = guided_prediction(backend, z, float(sig[i]), cfg, condition, step_index=i)
        z = ddim_step(z, float(sig[i]), float(sig[i + 1]), d)
    return z


def ddim_invert(
    x0_latent: Field,
    schedule: NoiseSchedule,
    backend,
    condition=None,
    guidance_for_inversion: float = 1.0,
    store_dir: Path | str | None = None,
) -> TrajectoryRecord:
    """Forward-time solve recording every latent along the way.

    Walks the schedule with sigma increasing, starting from the clean
    input, and records one latent per grid entry; entry 0 is the
    recovered noise z_T.  Guidance defaults to the plain conditional
    prediction (w = 1), which keeps inversion and conditional resampling
    adjoint.
    """
    from .denoise import DenoiseRequest

    sig = schedule.sigmas
    n = schedule.step_count
    w = float(guidance_for_inversion)

    directory = None
    latents: list[Field] | None = None
    if store_dir is not None:
        directory = Path(store_dir)
        directory.mkdir(parents=True, exist_ok=True)
    else:
        latents = [None] * (n + 1)

    def record(index: int, value: Field) -> None:
        if latents is not None:
            latents[index] = value
        else:
            save_field(value, TrajectoryRecord.step_path(directory, index))

    z = x0_latent
    record(n, z)
    for j in range(n, 0, -1):
        s_from, s_to = float(sig[j]), float(sig[j - 1])
        try:
            d = backend.denoise(DenoiseRequest(z, s_from, condition))
            if w != 1.0:
                d_u = backend.denoise(DenoiseRequest(z, s_from, None))
                d = cfg_standard(d, d_u, w)
        except Exception as exc:
            raise SamplingError(
                f"backend failed at inversion step {j} (sigma={s_from:.6g}): {exc}"
            ) from exc
        z = ddim_step(z, s_from, s_to, d)
        record(j - 1, z)
    return TrajectoryRecord(sigmas=sig, latents=latents, directory=directory)
