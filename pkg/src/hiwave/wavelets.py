"""One-level 2D discrete wavelet transform with sym4 and Haar banks.

Analysis uses symmetric half-sample boundary extension with stride-2
downsampling, giving ceil(n/2) coefficients per band along each axis.
Critically sampled symmetric extension is not invertible by plain
synthesis filtering for non-linear-phase banks like sym4, so the inverse
solves the extension-aware linear system exactly: for each length the
analysis operator A is materialized once and its left inverse
(A^T A)^{-1} A^T is cached.  Reconstruction is then exact to rounding
for every size >= 2, odd sizes included.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fields import Field, ShapeMismatch

# Orthonormal (sum = sqrt(2), unit energy) decomposition low-pass taps.
_SYM4_LO = (
    -0.07576571478927333,
    -0.02963552764599851,
    0.49761866763201545,
    0.8037387518059161,
    0.29785779560527736,
    -0.09921954357684722,
    -0.012603967262037833,
    0.0322231006040427,
)
_HAAR_LO = (2.0**-0.5, 2.0**-0.5)


def _qmf(lo: np.ndarray) -> np.ndarray:
    # hi[k] = (-1)^k lo[L-1-k]
    hi = lo[::-1].copy()
    hi[1::2] *= -1.0
    return hi


@dataclass(frozen=True)
class WaveletFilter:
    """Quadrature-mirror filter bank, orthonormal normalization."""

    name: str
    lo_dec: tuple[float, ...]
    hi_dec: tuple[float, ...]
    lo_rec: tuple[float, ...]
    hi_rec: tuple[float, ...]


def _make_filter(name: str, lo: tuple[float, ...]) -> WaveletFilter:
    lo_arr = np.asarray(lo, dtype=np.float64)
    hi_arr = _qmf(lo_arr)
    # Orthogonal banks reconstruct with the time-reversed analysis taps.
    return WaveletFilter(
        name=name,
        lo_dec=tuple(lo_arr),
        hi_dec=tuple(hi_arr),
        lo_rec=tuple(lo_arr[::-1]),
        hi_rec=tuple(hi_arr[::-1]),
    )


_FILTERS = {
    "sym4": _make_filter("sym4", _SYM4_LO),
    "haar": _make_filter("haar", _HAAR_LO),
}


def get_filter(name: str) -> WaveletFilter:
    try:
        return _FILTERS[name]
    except KeyError:
        raise ValueError(f"unknown wavelet {name!r}, expected one of {sorted(_FILTERS)}") from None


def band_length(n: int) -> int:
    return (n + 1) // 2


@lru_cache(maxsize=None)
def _operators(name: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(analysis A: 2m x n, synthesis S: n x 2m) for signal length n."""
    filt = get_filter(name)
    lo = np.asarray(filt.lo_dec)
    hi = np.asarray(filt.hi_dec)
    taps = len(lo)
    m = band_length(n)
    pad = taps
    ext = np.pad(np.eye(n), ((0, 0), (pad, pad)), mode="symmetric")
    # Align windows so the first output taps the half-sample-extended
    # left edge the way stride-2 symmetric-mode filtering does.
    start = pad - (taps // 2 - 1)
    a = np.empty((2 * m, n))
    for k in range(m):
        window = ext[:, start + 2 * k : start + 2 * k + taps]
        a[k] = window @ lo
        a[m + k] = window @ hi
    s = np.linalg.solve(a.T @ a, a.T)
    a.setflags(write=False)
    s.setflags(write=False)
    return a, s


@dataclass(frozen=True)
class WaveletBands:
    """One-level sub-band quadruple. L low; H, V, D detail bands.

    H responds to horizontal edges (high-pass down the height axis),
    V to vertical edges, D to diagonals.  source_shape keeps the exact
    pre-transform spatial size so reconstruction can restore it.
    """

    L: Field
    H: Field
    V: Field
    D: Field
    source_shape: tuple[int, int]

    def __post_init__(self):
        shapes = {self.L.shape, self.H.shape, self.V.shape, self.D.shape}
        if len(shapes) != 1:
            raise ValueError(f"bands must share one shape, got {sorted(shapes)}")
        h, w = self.source_shape
        expect = (self.L.channels, band_length(h), band_length(w))
        if self.L.shape != expect:
            raise ValueError(
                f"band shape {self.L.shape} inconsistent with source {self.source_shape}"
            )

    def map(self, fn) -> "WaveletBands":
        return WaveletBands(fn(self.L), fn(self.H), fn(self.V), fn(self.D), self.source_shape)


def dwt2(x: Field, filt: WaveletFilter) -> WaveletBands:
    """Separable one-level analysis, per channel."""
    h, w = x.height, x.width
    if h < 2 or w < 2:
        raise ValueError(f"spatial size must be at least 2x2, got {h}x{w}")
    a_h, _ = _operators(filt.name, h)
    a_w, _ = _operators(filt.name, w)
    mh, mw = band_length(h), band_length(w)
    # columns first, then rows; float64 internally
    y = np.einsum("ij,cjk,lk->cil", a_h, x.data.astype(np.float64), a_w, optimize=True)
    to_field = lambda block: Field(block.astype(np.float32))
    return WaveletBands(
        L=to_field(y[:, :mh, :mw]),
        H=to_field(y[:, mh:, :mw]),
        V=to_field(y[:, :mh, mw:]),
        D=to_field(y[:, mh:, mw:]),
        source_shape=(h, w),
    )


def idwt2(b: WaveletBands, filt: WaveletFilter) -> Field:
    """Exact inverse of dwt2; output has b.source_shape exactly."""
    h, w = b.source_shape
    _, s_h = _operators(filt.name, h)
    _, s_w = _operators(filt.name, w)
    top = np.concatenate([b.L.data, b.V.data], axis=2)
    bot = np.concatenate([b.H.data, b.D.data], axis=2)
    y = np.concatenate([top, bot], axis=1).astype(np.float64)
    x = np.einsum("ij,cjk,lk->cil", s_h, y, s_w, optimize=True)
    return Field(x.astype(np.float32))


def multiscale_decompose(x: Field, filt: WaveletFilter, levels: int) -> tuple[Field, list[WaveletBands]]:
    """Recursive analysis on the L band; unused by the sampling pipeline.

    Returns the coarsest approximation plus per-level bands ordered
    finest first.
    """
    if levels < 1:
        raise ValueError("levels must be at least 1")
    per_level = []
    approx = x
    for _ in range(levels):
        bands = dwt2(approx, filt)
        per_level.append(bands)
        approx = bands.L
        if approx.height < 2 or approx.width < 2:
            break
    return approx, per_level


def multiscale_reconstruct(approx: Field, per_level: list[WaveletBands], filt: WaveletFilter) -> Field:
    x = approx
    for bands in reversed(per_level):
        if x.shape != bands.L.shape:
            raise ShapeMismatch(bands.L.shape, x.shape)
        rebuilt = WaveletBands(x, bands.H, bands.V, bands.D, bands.source_shape)
        x = idwt2(rebuilt, filt)
    return x
