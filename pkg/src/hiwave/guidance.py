"""Classifier-free guidance variants and skip-residual mixing.

Standard CFG blends whole predictions.  The frequency-guided variant
splits both predictions with a one-level DWT, keeps the low band of the
conditional prediction verbatim, guides only the detail bands with
strength w_d, and recombines.  Skip residuals pull early-step latents
toward the stored inversion trajectory under a cosine-decay weight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fields import Field, ShapeMismatch
from .wavelets import WaveletBands, WaveletFilter, dwt2, get_filter, idwt2

MODES = ("frequency_guided", "standard_cfg", "low_band_only", "conditional_only")
SKIP_ORIENTATIONS = ("prose", "literal")


@dataclass(frozen=True)
class GuidanceConfig:
    w: float = 7.5
    w_d: float = 7.5
    filter: WaveletFilter = dc_field(default_factory=lambda: get_filter("sym4"))
    mode: str = "frequency_guided"
    skip_tau_index: int = 0
    alpha: float = 3.0
    skip_orientation: str = "prose"

    def __post_init__(self):
        if self.w < 0 or self.w_d < 0:
            raise ValueError("guidance strengths must be non-negative")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {MODES}")
        if self.skip_tau_index < 0:
            raise ValueError("skip_tau_index must be non-negative")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.skip_orientation not in SKIP_ORIENTATIONS:
            raise ValueError(
                f"unknown skip orientation {self.skip_orientation!r}, "
                f"expected one of {SKIP_ORIENTATIONS}"
            )


def _check_shapes(a: Field, b: Field) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(a.shape, b.shape)


def cfg_standard(d_cond: Field, d_uncond: Field, w: float) -> Field:
    """d_uncond + w * (d_cond - d_uncond); w = 1 is unguided."""
    _check_shapes(d_cond, d_uncond)
    return Field(d_uncond.data + np.float32(w) * (d_cond.data - d_uncond.data))


def _band_blend(bc: WaveletBands, bu: WaveletBands, w_d: float, guide_low: bool) -> WaveletBands:
    wd = np.float32(w_d)
    guided = lambda c, u: Field(u.data + wd * (c.data - u.data))
    if guide_low:
        # detail bands pass through from the conditional prediction
        return WaveletBands(guided(bc.L, bu.L), bc.H, bc.V, bc.D, bc.source_shape)
    return WaveletBands(
        bc.L,
        guided(bc.H, bu.H),
        guided(bc.V, bu.V),
        guided(bc.D, bu.D),
        bc.source_shape,
    )


def cfg_frequency_guided(d_cond: Field, d_uncond: Field, cfg: GuidanceConfig) -> Field:
    """Detail-enhancer guidance; other modes dispatch to their formulas.

    frequency_guided: low band copied from d_cond, detail bands guided
    with cfg.w_d, recombined by the inverse transform.
    """
    _check_shapes(d_cond, d_uncond)
    if cfg.mode == "standard_cfg":
        return cfg_standard(d_cond, d_uncond, cfg.w)
    if cfg.mode == "conditional_only":
        return d_cond
    if cfg.mode == "low_band_only":
        return low_band_only_guidance(d_cond, d_uncond, cfg)
    bc = dwt2(d_cond, cfg.filter)
    bu = dwt2(d_uncond, cfg.filter)
    return idwt2(_band_blend(bc, bu, cfg.w_d, guide_low=False), cfg.filter)


def low_band_only_guidance(d_cond: Field, d_uncond: Field, cfg: GuidanceConfig) -> Field:
    """Ablation arm: guide only the low band, detail bands unguided."""
    _check_shapes(d_cond, d_uncond)
    bc = dwt2(d_cond, cfg.filter)
    bu = dwt2(d_uncond, cfg.filter)
    return idwt2(_band_blend(bc, bu, cfg.w_d, guide_low=True), cfg.filter)


def skip_weight(step_index: int, n_steps: int, alpha: float) -> float:
    """Cosine-decay weight c1 = ((1 + cos(pi * i/N)) / 2)^alpha."""
    u = step_index / n_steps
    return ((1.0 + math.cos(math.pi * u)) / 2.0) ** alpha


def skip_residual_mix(
    z_current: Field,
    z_inverted: Field,
    step_index: int,
    n_steps: int,
    cfg: GuidanceConfig,
) -> Field:
    """Convex mix of the live latent with its inversion-trajectory partner.

    Steps at or past cfg.skip_tau_index return z_current untouched.
    Orientation "prose" gives the inverted latent weight c1 (dominant at
    the earliest steps, decaying); "literal" swaps the weights to match
    the printed equation.
    """
    _check_shapes(z_current, z_inverted)
    if not 0 <= step_index < n_steps:
        raise ValueError(f"step index {step_index} out of range for {n_steps} steps")
    if step_index >= cfg.skip_tau_index:
        return z_current
    c1 = skip_weight(step_index, n_steps, cfg.alpha)
    if cfg.skip_orientation == "literal":
        c1 = 1.0 - c1
    mixed = c1 * z_inverted.data.astype(np.float64) + (1.0 - c1) * z_current.data.astype(np.float64)
    return Field(mixed.astype(np.float32))
