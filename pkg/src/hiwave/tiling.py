"""Overlapped patch decomposition and seam-free recomposition.

Patches tile the canvas at half-patch stride (50% overlap), the last
row/column clamped so every rectangle stays inside the canvas at full
patch size.  Blend weights are separable shifted Hann windows,
renormalized pixelwise so overlapping weights sum to exactly 1.
Accumulation always runs in patch-index order, which keeps blended
results bitwise independent of batch size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .fields import Field, ShapeMismatch


def _axis_origins(canvas: int, patch: int) -> list[int]:
    if patch > canvas:
        raise ValueError(f"patch {patch} larger than canvas {canvas}")
    if patch == canvas:
        return [0]
    stride = max(1, patch // 2)
    origins = list(range(0, canvas - patch + 1, stride))
    if origins[-1] != canvas - patch:
        origins.append(canvas - patch)
    return origins


def _hann(length: int) -> np.ndarray:
    # shifted so no endpoint weight is exactly zero
    k = np.arange(length, dtype=np.float64)
    return np.sin(np.pi * (k + 0.5) / length) ** 2


@dataclass(frozen=True)
class PatchLayout:
    canvas: tuple[int, int]
    patch: tuple[int, int]
    stride: tuple[int, int]
    rectangles: tuple[tuple[int, int], ...]
    weight_masks: tuple[np.ndarray, ...]

    def __len__(self) -> int:
        return len(self.rectangles)

    def to_json(self) -> str:
        return json.dumps(
            {
                "canvas": list(self.canvas),
                "patch": list(self.patch),
                "stride": list(self.stride),
                "rectangles": [list(r) for r in self.rectangles],
            },
            indent=2,
        )


def plan_layout(canvas, patch) -> PatchLayout:
    """Row-major patch origins at half-patch stride, edges clamped."""
    ch, cw = (int(v) for v in canvas)
    ph, pw = (int(v) for v in patch)
    if min(ch, cw, ph, pw) < 1:
        raise ValueError(f"canvas {canvas} and patch {patch} must be positive")
    ys = _axis_origins(ch, ph)
    xs = _axis_origins(cw, pw)
    rects = tuple((y, x) for y in ys for x in xs)

    base = np.outer(_hann(ph), _hann(pw))
    total = np.zeros((ch, cw), dtype=np.float64)
    for y, x in rects:
        total[y : y + ph, x : x + pw] += base
    masks = tuple(
        np.ascontiguousarray((base / total[y : y + ph, x : x + pw]).astype(np.float32))
        for y, x in rects
    )
    for m in masks:
        m.setflags(write=False)
    return PatchLayout(
        canvas=(ch, cw),
        patch=(ph, pw),
        stride=(max(1, ph // 2), max(1, pw // 2)),
        rectangles=rects,
        weight_masks=masks,
    )


def extract(z: Field, layout: PatchLayout, index: int) -> Field:
    if not 0 <= index < len(layout):
        raise IndexError(f"patch index {index} out of range for {len(layout)} patches")
    if (z.height, z.width) != layout.canvas:
        raise ShapeMismatch((z.channels,) + layout.canvas, z.shape)
    y, x = layout.rectangles[index]
    ph, pw = layout.patch
    return Field(z.data[:, y : y + ph, x : x + pw].copy())


def accumulate(canvas_acc: np.ndarray, layout: PatchLayout, index: int, patch_result: Field) -> None:
    """Add the weight-masked patch into a (c, canvas_h, canvas_w) accumulator.

    After accumulating every patch of the layout, the accumulator holds
    the blended field.  Call in increasing index order; the reduction
    order is part of the bitwise-reproducibility contract.
    """
    if not 0 <= index < len(layout):
        raise IndexError(f"patch index {index} out of range for {len(layout)} patches")
    if canvas_acc.shape[1:] != layout.canvas:
        raise ShapeMismatch((canvas_acc.shape[0],) + layout.canvas, canvas_acc.shape)
    if (patch_result.height, patch_result.width) != layout.patch:
        raise ShapeMismatch((patch_result.channels,) + layout.patch, patch_result.shape)
    y, x = layout.rectangles[index]
    ph, pw = layout.patch
    canvas_acc[:, y : y + ph, x : x + pw] += layout.weight_masks[index] * patch_result.data


def blend_full(layout: PatchLayout, patches: list[Field]) -> Field:
    """Blend one result per patch into a full canvas field."""
    if len(patches) != len(layout):
        raise ValueError(f"got {len(patches)} patches, layout has {len(layout)}")
    c = patches[0].channels
    acc = np.zeros((c,) + layout.canvas, dtype=np.float32)
    for idx, p in enumerate(patches):
        accumulate(acc, layout, idx, p)
    return Field(acc)


def stream_batches(layout: PatchLayout, batch_size: int) -> Iterator[list[int]]:
    """Consecutive patch-index groups of at most batch_size."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    indices = list(range(len(layout)))
    for start in range(0, len(indices), batch_size):
        yield indices[start : start + batch_size]


def seam_statistic(img: np.ndarray, layout: PatchLayout, percentile: float = 98.0) -> dict:
    """Gradient percentiles across patch-boundary lines vs interior lines.

    img is (h, w) or (c, h, w); the statistic is the given percentile of
    absolute finite differences across each line, pooled over channels.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    h, w = layout.canvas
    ys = sorted({y for y, _ in layout.rectangles if y > 0})
    xs = sorted({x for _, x in layout.rectangles if x > 0})

    gy = np.abs(np.diff(arr, axis=1))  # (c, h-1, w), row j is the j|j+1 crossing
    gx = np.abs(np.diff(arr, axis=2))

    seam_vals, interior_vals = [], []
    for j in range(h - 1):
        target = seam_vals if (j + 1 in ys or j in ys) else interior_vals
        target.append(gy[:, j, :].ravel())
    for j in range(w - 1):
        target = seam_vals if (j + 1 in xs or j in xs) else interior_vals
        target.append(gx[:, :, j].ravel())

    def stat(chunks):
        if not chunks:
            return float("nan")
        return float(np.percentile(np.concatenate(chunks), percentile))

    return {"seam": stat(seam_vals), "interior": stat(interior_vals)}
