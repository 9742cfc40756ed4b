"""Image-domain Lanczos resampling, file I/O, and the pixel/latent adapter."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .fields import Field
from .pngio import ImageFormatError, read_png, write_png

LANCZOS_TAPS = 3


@dataclass(frozen=True)
class ImageBuffer:
    """(height, width, channels) float32 pixels clamped to [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected (h, w, c) with c in {{1, 3}}, got shape {np.shape(self.data)}")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite values")
        arr = np.clip(arr, 0.0, 1.0)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def to_field(self) -> Field:
        return Field(np.ascontiguousarray(self.data.transpose(2, 0, 1)))

    @classmethod
    def from_field(cls, f: Field) -> "ImageBuffer":
        return cls(f.data.transpose(1, 2, 0))


def _lanczos_kernel(t: np.ndarray, a: int) -> np.ndarray:
    out = np.sinc(t) * np.sinc(t / a)
    return np.where(np.abs(t) < a, out, 0.0)


@lru_cache(maxsize=None)
def _resample_matrix(n_in: int, n_out: int, a: int) -> np.ndarray:
    """Row-stochastic (n_out, n_in) Lanczos-a weights, edges clamped.

    Source coordinates follow (j + 0.5) * scale - 0.5.  When minifying,
    the kernel is stretched by the scale factor for anti-aliasing.
    """
    scale = n_in / n_out
    support = max(1.0, scale)
    w = np.zeros((n_out, n_in), dtype=np.float64)
    for j in range(n_out):
        center = (j + 0.5) * scale - 0.5
        lo = int(np.ceil(center - a * support))
        hi = int(np.floor(center + a * support))
        taps = np.arange(lo, hi + 1)
        vals = _lanczos_kernel((taps - center) / support, a)
        idx = np.clip(taps, 0, n_in - 1)
        np.add.at(w[j], idx, vals)
        w[j] /= w[j].sum()
    w.setflags(write=False)
    return w


def lanczos_resize(img: ImageBuffer, new_height: int, new_width: int, a: int = LANCZOS_TAPS) -> ImageBuffer:
    """Separable Lanczos-a resampling with per-pixel weight normalization."""
    if new_height < 1 or new_width < 1:
        raise ValueError(f"target size must be positive, got {new_height}x{new_width}")
    wh = _resample_matrix(img.height, new_height, a)
    ww = _resample_matrix(img.width, new_width, a)
    out = np.einsum("ij,jkc,lk->ilc", wh, img.data.astype(np.float64), ww, optimize=True)
    return ImageBuffer(np.clip(out, 0.0, 1.0).astype(np.float32))


def encode_latent(img: ImageBuffer, backend) -> Field:
    """Pixel image to backend latent (VAE encode, or the analytic affine map)."""
    return backend.encode(img.to_field())


def decode_latent(z: Field, backend) -> ImageBuffer:
    """Backend latent to pixel image."""
    return ImageBuffer.from_field(backend.decode(z))


def save_image(img: ImageBuffer, path) -> None:
    """16-bit PNG by extension .png; binary PPM/PGM fallback."""
    path = Path(path)
    quant = np.round(img.data.astype(np.float64) * 65535.0).astype(np.uint16)
    suffix = path.suffix.lower()
    if suffix == ".png":
        write_png(path, quant[:, :, 0] if img.channels == 1 else quant)
    elif suffix in (".ppm", ".pgm"):
        _write_netpbm(path, quant)
    else:
        raise ImageFormatError(f"unsupported image format {suffix!r} (use .png, .ppm, or .pgm)")


def load_image(path) -> ImageBuffer:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".png":
        arr = read_png(path)
        peak = 65535.0 if arr.dtype == np.uint16 else 255.0
    elif suffix in (".ppm", ".pgm"):
        arr, maxval = _read_netpbm(path)
        peak = float(maxval)
    else:
        raise ImageFormatError(f"unsupported image format {suffix!r} (use .png, .ppm, or .pgm)")
    return ImageBuffer(arr.astype(np.float32) / peak)


def _write_netpbm(path: Path, quant: np.ndarray) -> None:
    channels = quant.shape[2]
    if path.suffix.lower() == ".pgm":
        if channels != 1:
            raise ImageFormatError("PGM holds a single channel")
        magic, payload = b"P5", quant[:, :, 0]
    else:
        if channels != 3:
            raise ImageFormatError("PPM holds three channels")
        magic, payload = b"P6", quant
    header = b"%s\n%d %d\n65535\n" % (magic, quant.shape[1], quant.shape[0])
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.astype(">u2").tobytes())


def _read_netpbm(path: Path) -> tuple[np.ndarray, int]:
    raw = path.read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        if pos >= len(raw):
            raise ImageFormatError("truncated netpbm header")
        if raw[pos : pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        if raw[pos : pos + 1].isspace():
            pos += 1
            continue
        end = pos
        while end < len(raw) and not raw[end : end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    pos += 1  # single whitespace after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"unsupported netpbm magic {magic!r}")
    channels = 1 if magic == b"P5" else 3
    if not 0 < maxval < 65536:
        raise ImageFormatError(f"bad maxval {maxval}")
    dtype = ">u2" if maxval > 255 else np.uint8
    count = w * h * channels
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=pos)
    if data.size != count:
        raise ImageFormatError("truncated netpbm payload")
    arr = data.astype(np.uint16).reshape((h, w) if channels == 1 else (h, w, 3))
    return arr, maxval


def psnr(a: ImageBuffer | np.ndarray, b: ImageBuffer | np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; inf for identical inputs."""
    aa = a.data if isinstance(a, ImageBuffer) else np.asarray(a)
    bb = b.data if isinstance(b, ImageBuffer) else np.asarray(b)
    if aa.shape != bb.shape:
        raise ValueError(f"shape mismatch: {aa.shape} vs {bb.shape}")
    mse = float(np.mean((aa.astype(np.float64) - bb.astype(np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak**2 / mse)
