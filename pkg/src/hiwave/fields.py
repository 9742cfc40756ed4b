"""Dense float32 fields, seeded portable RNG, and lossless serialization."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FLDF0001"
_HEADER_LEN = len(MAGIC) + 12


class ShapeMismatch(ValueError):
    """Raised when two fields that must share a shape do not."""

    def __init__(self, expected, actual):
        super().__init__(f"shape mismatch: expected {tuple(expected)}, got {tuple(actual)}")
        self.expected = tuple(expected)
        self.actual = tuple(actual)


class FieldFormatError(ValueError):
    """Raised for malformed field files."""


@dataclass(frozen=True)
class Field:
    """A channels x height x width array of finite float32 values.

    The backing array is made read-only at construction; shape and
    contents never change for a given instance.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 3:
            raise ValueError(f"field must be 3-d (channels, height, width), got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"field dimensions must be positive, got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("field contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, channels: int, height: int, width: int) -> "Field":
        return cls(np.zeros((channels, height, width), dtype=np.float32))

    @classmethod
    def full(cls, channels: int, height: int, width: int, value: float) -> "Field":
        return cls(np.full((channels, height, width), value, dtype=np.float32))

    def copy_data(self) -> np.ndarray:
        """Writable float32 copy of the contents."""
        return np.array(self.data, dtype=np.float32)

    def allclose(self, other: "Field", atol: float = 0.0, rtol: float = 0.0) -> bool:
        return self.shape == other.shape and np.allclose(
            self.data, other.data, atol=atol, rtol=rtol
        )


class Rng:
    """Deterministic normal stream from a fixed, documented recipe.

    Raw bits come from Philox4x64-10 with key (seed, 0) and counter
    starting at zero.  Each 64-bit word maps to a uniform in (0, 1] via
    ``u = ((word >> 11) + 1) * 2**-53``.  Consecutive pairs (u1, u2)
    produce two normals by Box-Muller:

        r  = sqrt(-2 ln u1)
        z0 = r cos(2 pi u2)
        z1 = r sin(2 pi u2)

    emitted in order z0, z1.  Nothing depends on numpy's own Gaussian
    sampler, so any implementation of the recipe reproduces the stream
    bit for bit from the same seed.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self._bits = np.random.Philox(key=seed)

    def normals(self, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be non-negative")
        if count == 0:
            return np.empty(0, dtype=np.float32)
        pairs = (count + 1) // 2
        raw = np.asarray(self._bits.random_raw(2 * pairs), dtype=np.uint64)
        u = ((raw >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0**-53
        u1, u2 = u[0::2], u[1::2]
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(2.0 * np.pi * u2)
        out[1::2] = r * np.sin(2.0 * np.pi * u2)
        return out[:count].astype(np.float32)


def axpy(a: float, x: Field, y: Field) -> Field:
    """a*x + y elementwise."""
    if x.shape != y.shape:
        raise ShapeMismatch(x.shape, y.shape)
    return Field(np.float32(a) * x.data + y.data)


def gaussian_field(rng: Rng, shape) -> Field:
    """I.i.d. standard normal field; deterministic per seed."""
    c, h, w = (int(v) for v in shape)
    if min(c, h, w) < 1:
        raise ValueError(f"shape must be positive, got {(c, h, w)}")
    return Field(rng.normals(c * h * w).reshape(c, h, w))


def save_field(f: Field, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", f.channels, f.height, f.width))
        fh.write(np.ascontiguousarray(f.data, dtype="<f4").tobytes())


def load_field(path) -> Field:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER_LEN:
        raise FieldFormatError(f"truncated header: {len(raw)} bytes")
    if raw[:8] != MAGIC:
        raise FieldFormatError(f"bad magic {raw[:8]!r}, expected {MAGIC!r}")
    c, h, w = struct.unpack("<III", raw[8:_HEADER_LEN])
    if min(c, h, w) < 1:
        raise FieldFormatError(f"non-positive shape in header: {(c, h, w)}")
    expected = _HEADER_LEN + 4 * c * h * w
    if len(raw) != expected:
        raise FieldFormatError(f"payload length mismatch: expected {expected} bytes, got {len(raw)}")
    data = np.frombuffer(raw[_HEADER_LEN:], dtype="<f4").reshape(c, h, w)
    return Field(data.copy())
