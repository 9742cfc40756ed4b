"""Discretized noise schedules shared by reverse sampling and inversion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("karras_rho7", "linear_sigma")
_RHO = 7.0


@dataclass(frozen=True)
class NoiseSchedule:
    """Grid of N+1 levels: sigma_0 = sigma_max > ... > sigma_{N-1} > sigma_N = 0."""

    sigmas: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.sigmas, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("sigmas must be a non-empty 1-d grid")
        if not np.isfinite(arr).all() or (arr < 0).any():
            raise ValueError("sigmas must be finite and non-negative")
        if arr[-1] != 0.0:
            raise ValueError(f"terminal sigma must be exactly 0, got {arr[-1]}")
        if arr.size > 1 and not (np.diff(arr) < 0).all():
            raise ValueError("sigmas must be strictly decreasing")
        arr.setflags(write=False)
        object.__setattr__(self, "sigmas", arr)

    @property
    def step_count(self) -> int:
        return self.sigmas.size - 1

    @property
    def sigma_max(self) -> float:
        return float(self.sigmas[0])

    @property
    def sigma_min(self) -> float:
        if self.sigmas.size < 2:
            raise ValueError("degenerate schedule has no positive level")
        return float(self.sigmas[-2])


def build_schedule(kind: str, n_steps: int, sigma_min: float, sigma_max: float) -> NoiseSchedule:
    """karras_rho7: rho=7 power interpolation; linear_sigma: linear grid.

    Both emit n_steps positive levels from sigma_max down to sigma_min
    followed by a terminal exact zero (n_steps=1 degenerates to
    [sigma_max, 0]).
    """
    if kind not in KINDS:
        raise ValueError(f"unknown schedule kind {kind!r}, expected one of {KINDS}")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if not (0 < sigma_min < sigma_max):
        raise ValueError(f"need 0 < sigma_min < sigma_max, got [{sigma_min}, {sigma_max}]")
    if n_steps == 1:
        levels = np.array([sigma_max], dtype=np.float64)
    elif kind == "karras_rho7":
        t = np.linspace(0.0, 1.0, n_steps)
        inv = sigma_max ** (1.0 / _RHO) + t * (sigma_min ** (1.0 / _RHO) - sigma_max ** (1.0 / _RHO))
        levels = inv**_RHO
    else:
        levels = np.linspace(sigma_max, sigma_min, n_steps)
    return NoiseSchedule(np.concatenate([levels, [0.0]]))
