"""Run reports: metrics CSV plus matplotlib figures rendered to files."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .imaging import ImageBuffer, lanczos_resize, load_image, psnr
from .pipeline import RunManifest
from .wavelets import dwt2, get_filter

plt.rcParams.update(
    {
        "figure.dpi": 110,
        "savefig.bbox": "tight",
        "axes.grid": True,
        "grid.alpha": 0.3,
        "font.size": 9,
    }
)


def _stage_rows(manifest: RunManifest, run_dir: Path) -> tuple[ImageBuffer, list[dict]]:
    images = [p for p in manifest.outputs]
    base = load_image(run_dir / Path(images[0]).name)
    rows = []
    for k, stage in enumerate(manifest.stages):
        img = load_image(run_dir / Path(images[k + 1]).name)
        down = lanczos_resize(img, base.height, base.width)
        seam = float(stage.get("stat_seam", float("nan")))
        interior = float(stage.get("stat_interior", float("nan")))
        rows.append(
            {
                "stage": k,
                "height": stage["target"][0],
                "width": stage["target"][1],
                "steps": stage["steps"],
                "mode": stage["guidance"]["mode"],
                "patches": stage.get("stat_patches", ""),
                "seconds": round(manifest.timings[k], 3) if k < len(manifest.timings) else "",
                "seam_p98": seam,
                "interior_p98": interior,
                "seam_ratio": seam / interior if interior else float("nan"),
                "psnr_down_vs_base_db": round(psnr(down, base), 3),
                "sha256": manifest.hashes[k] if k < len(manifest.hashes) else "",
                "_image": img,
            }
        )
    return base, rows


def build_report(run_dir, out_dir) -> dict:
    """Render metrics.csv and the figure set for one pipeline run."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest.load(run_dir / "manifest.json")
    base, rows = _stage_rows(manifest, run_dir)

    csv_path = out_dir / "metrics.csv"
    columns = [c for c in rows[0] if not c.startswith("_")] if rows else []
    with open(csv_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: v for k, v in row.items() if not k.startswith("_")})

    written = {"metrics": csv_path}
    written["stages"] = _figure_stages(out_dir, base, rows)
    if rows:
        written["metrics_figure"] = _figure_metrics(out_dir, rows)
    written["band_energy"] = _figure_band_energy(out_dir, rows[-1]["_image"] if rows else base)
    return written


def _to_rgb(img: ImageBuffer) -> np.ndarray:
    arr = img.data
    return np.repeat(arr, 3, axis=2) if arr.shape[2] == 1 else arr


def _figure_stages(out_dir: Path, base: ImageBuffer, rows: list[dict]) -> Path:
    n = 1 + len(rows)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.6))
    axes = np.atleast_1d(axes)
    axes[0].imshow(_to_rgb(base))
    axes[0].set_title(f"base {base.height}x{base.width}")
    for ax, row in zip(axes[1:], rows):
        ax.imshow(_to_rgb(row["_image"]))
        ax.set_title(f"stage {row['stage']} {row['height']}x{row['width']}")
    for ax in axes:
        ax.set_xticks([])
        ax.set_yticks([])
        ax.grid(False)
    path = out_dir / "stages.png"
    fig.savefig(path)
    plt.close(fig)
    return path


def _figure_metrics(out_dir: Path, rows: list[dict]) -> Path:
    idx = np.arange(len(rows))
    labels = [f"{r['height']}x{r['width']}" for r in rows]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.0, 3.2))
    ax1.bar(idx, [r["psnr_down_vs_base_db"] for r in rows], color="#4878b0")
    ax1.set_xticks(idx, labels)
    ax1.set_ylabel("PSNR vs base (dB)")
    ax1.set_title("structure preservation")
    width = 0.38
    ax2.bar(idx - width / 2, [r["seam_p98"] for r in rows], width, label="seam")
    ax2.bar(idx + width / 2, [r["interior_p98"] for r in rows], width, label="interior")
    ax2.set_xticks(idx, labels)
    ax2.set_ylabel("p98 |gradient|")
    ax2.set_title("seam vs interior gradients")
    ax2.legend()
    path = out_dir / "metrics.png"
    fig.savefig(path)
    plt.close(fig)
    return path


def _figure_band_energy(out_dir: Path, img: ImageBuffer) -> Path:
    bands = dwt2(img.to_field(), get_filter("sym4"))
    names = ["L", "H", "V", "D"]
    energies = [float((getattr(bands, n).data.astype(np.float64) ** 2).sum()) for n in names]
    fig, ax = plt.subplots(figsize=(4.0, 3.2))
    ax.bar(names, energies, color=["#4878b0", "#e1812c", "#3a923a", "#c03d3e"])
    ax.set_yscale("log")
    ax.set_ylabel("band energy")
    ax.set_title("final image sym4 band energy")
    path = out_dir / "band_energy.png"
    fig.savefig(path)
    plt.close(fig)
    return path
