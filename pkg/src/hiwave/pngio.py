"""Minimal PNG codec: 8/16-bit grayscale and RGB, no interlacing.

Hand-rolled because the pipeline needs lossless 16-bit RGB writes.
The encoder emits one configurable filter type for all rows; the
decoder handles all five standard filters.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for unsupported or corrupt image files."""


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload))
    )


def _filter_rows(pixels: np.ndarray, bpp: int, filter_type: int) -> bytes:
    """pixels: (h, stride) uint8 rows of raw sample bytes."""
    h, stride = pixels.shape
    shifted = np.zeros_like(pixels)
    shifted[:, bpp:] = pixels[:, :-bpp]
    above = np.zeros_like(pixels)
    above[1:] = pixels[:-1]
    above_shifted = np.zeros_like(pixels)
    above_shifted[1:, bpp:] = pixels[:-1, :-bpp]

    p16 = pixels.astype(np.int16)
    if filter_type == 0:
        coded = pixels
    elif filter_type == 1:
        coded = (p16 - shifted).astype(np.uint8)
    elif filter_type == 2:
        coded = (p16 - above).astype(np.uint8)
    elif filter_type == 3:
        coded = (p16 - (shifted.astype(np.int16) + above) // 2).astype(np.uint8)
    elif filter_type == 4:
        coded = (p16 - _paeth(shifted, above, above_shifted)).astype(np.uint8)
    else:
        raise ValueError(f"unknown filter type {filter_type}")
    head = np.full((h, 1), filter_type, dtype=np.uint8)
    return np.concatenate([head, coded], axis=1).tobytes()


def _paeth(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    a16, b16, c16 = (v.astype(np.int16) for v in (a, b, c))
    p = a16 + b16 - c16
    pa, pb, pc = np.abs(p - a16), np.abs(p - b16), np.abs(p - c16)
    out = np.where((pa <= pb) & (pa <= pc), a16, np.where(pb <= pc, b16, c16))
    return out


def write_png(path, samples: np.ndarray, filter_type: int = 0) -> None:
    """samples: uint8 or uint16, shape (h, w) gray or (h, w, 3) RGB."""
    arr = np.asarray(samples)
    if arr.dtype == np.uint8:
        depth = 8
    elif arr.dtype == np.uint16:
        depth = 16
    else:
        raise ImageFormatError(f"samples must be uint8 or uint16, got {arr.dtype}")
    if arr.ndim == 2:
        color, channels = 0, 1
    elif arr.ndim == 3 and arr.shape[2] == 3:
        color, channels = 2, 3
    else:
        raise ImageFormatError(f"expected (h, w) or (h, w, 3), got shape {arr.shape}")
    h, w = arr.shape[:2]
    if depth == 16:
        row_bytes = np.ascontiguousarray(arr.astype(">u2")).view(np.uint8).reshape(h, -1)
    else:
        row_bytes = np.ascontiguousarray(arr).reshape(h, -1)
    bpp = channels * (depth // 8)
    raw = _filter_rows(row_bytes, bpp, filter_type)
    ihdr = struct.pack(">IIBBBBB", w, h, depth, color, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(SIGNATURE)
        fh.write(_chunk(b"IHDR", ihdr))
        fh.write(_chunk(b"IDAT", zlib.compress(raw, 9)))
        fh.write(_chunk(b"IEND", b""))


def _unfilter_sub(line: np.ndarray, bpp: int) -> np.ndarray:
    lanes = line.reshape(-1, bpp).astype(np.int64)
    return (lanes.cumsum(axis=0) % 256).astype(np.uint8).reshape(-1)


def _unfilter_row(ftype: int, line: np.ndarray, prev: np.ndarray, bpp: int) -> np.ndarray:
    if ftype == 0:
        return line
    if ftype == 1:
        return _unfilter_sub(line, bpp)
    if ftype == 2:
        return line + prev
    out = np.zeros_like(line)
    # Average and Paeth recurse along the row; walk pixel groups.
    for i in range(0, line.size, bpp):
        left = out[i - bpp : i].astype(np.int16) if i >= bpp else np.zeros(bpp, np.int16)
        up = prev[i : i + bpp].astype(np.int16)
        up_left = prev[i - bpp : i].astype(np.int16) if i >= bpp else np.zeros(bpp, np.int16)
        cur = line[i : i + bpp].astype(np.int16)
        if ftype == 3:
            out[i : i + bpp] = (cur + (left + up) // 2).astype(np.uint8)
        elif ftype == 4:
            out[i : i + bpp] = (cur + _paeth(left, up, up_left)).astype(np.uint8)
        else:
            raise ImageFormatError(f"unknown filter type {ftype}")
    return out


def read_png(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:8] != SIGNATURE:
        raise ImageFormatError("not a PNG file (bad signature)")
    pos = 8
    ihdr = None
    idat = bytearray()
    while pos + 12 <= len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        tag = data[pos + 4 : pos + 8]
        payload = data[pos + 8 : pos + 8 + length]
        if len(payload) != length or pos + 12 + length > len(data):
            raise ImageFormatError("truncated chunk")
        (crc,) = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])
        if zlib.crc32(tag + payload) != crc:
            raise ImageFormatError(f"crc mismatch in {tag!r} chunk")
        pos += 12 + length
        if tag == b"IHDR":
            ihdr = payload
        elif tag == b"IDAT":
            idat.extend(payload)
        elif tag == b"IEND":
            break
    if ihdr is None or len(ihdr) != 13:
        raise ImageFormatError("missing or malformed IHDR")
    if not idat:
        raise ImageFormatError("no image data")
    w, h, depth, color, comp, filt, interlace = struct.unpack(">IIBBBBB", ihdr)
    if comp != 0 or filt != 0:
        raise ImageFormatError("unsupported compression or filter method")
    if interlace != 0:
        raise ImageFormatError("interlaced PNG not supported")
    if color not in (0, 2) or depth not in (8, 16):
        raise ImageFormatError(f"unsupported color type {color} / bit depth {depth}")
    if w < 1 or h < 1:
        raise ImageFormatError("empty image")
    channels = 1 if color == 0 else 3
    bpp = channels * (depth // 8)
    stride = w * bpp
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise ImageFormatError(f"corrupt image data: {exc}") from exc
    if len(raw) != h * (stride + 1):
        raise ImageFormatError(f"decompressed size {len(raw)}, expected {h * (stride + 1)}")
    rows = []
    prev = np.zeros(stride, dtype=np.uint8)
    for y in range(h):
        base = y * (stride + 1)
        line = np.frombuffer(raw, np.uint8, stride, offset=base + 1).copy()
        prev = _unfilter_row(raw[base], line, prev, bpp)
        rows.append(prev)
    buf = np.concatenate(rows)
    if depth == 16:
        arr = buf.tobytes()
        out = np.frombuffer(arr, dtype=">u2").astype(np.uint16)
    else:
        out = buf
    shape = (h, w) if channels == 1 else (h, w, 3)
    return out.reshape(shape)
