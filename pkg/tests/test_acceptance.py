"""End-to-end acceptance gates.

One test per contract bullet, each asserting the stated tolerance and
printing the measured value, so `pytest -v tests/test_acceptance.py`
reads as a pass/fail checklist.
"""

import time

import numpy as np
import pytest

from hiwave.denoise import AnalyticBackend, DenoiseRequest, GaussianMixture
from hiwave.fields import Field, Rng
from hiwave.guidance import (
    GuidanceConfig,
    cfg_frequency_guided,
    cfg_standard,
    skip_residual_mix,
    skip_weight,
)
from hiwave.imaging import lanczos_resize, psnr
from hiwave.pipeline import (
    ABLATION_ARMS,
    StageConfig,
    apply_ablation,
    default_plan,
    demo_backend,
    generate_base,
    run_pipeline,
    run_stage,
)
from hiwave.sampler import ddim_invert, ddim_sample, ddim_step, guided_prediction
from hiwave.schedules import build_schedule
from hiwave.tiling import plan_layout
from hiwave.wavelets import dwt2, get_filter, idwt2
from tests.conftest import rand_field
from tests.test_pipeline import smooth_image

COND_ONLY = GuidanceConfig(mode="conditional_only")


def test_wavelet_perfect_reconstruction_sizes_2_to_257():
    started = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = 0.0
    for name in ("sym4", "haar"):
        filt = get_filter(name)
        for n in range(2, 258):
            x = Field(rng.standard_normal((1, n, n)).astype(np.float32))
            back = idwt2(dwt2(x, filt), filt)
            worst = max(worst, float(np.abs(back.data - x.data).max()))
    elapsed = time.perf_counter() - started
    assert worst <= 1e-5, f"worst reconstruction error {worst:.3e}"
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    print(f"PASS wavelet perfect reconstruction: max err {worst:.3e}, {elapsed:.2f}s")


def test_guidance_detail_strength_one_is_conditional():
    dc, du = rand_field(100, 3, 32, 32), rand_field(101, 3, 32, 32)
    out = cfg_frequency_guided(dc, du, GuidanceConfig(w_d=1.0))
    err = float(np.abs(out.data - dc.data).max())
    assert err <= 1e-5, f"w_d=1 deviation {err:.3e}"
    print(f"PASS guidance identity w_d=1: max dev {err:.3e}")


@pytest.mark.parametrize("w_d", [0.0, 1.0, 7.5])
def test_guidance_low_band_comes_from_conditional(w_d):
    dc, du = rand_field(102, 3, 32, 32), rand_field(103, 3, 32, 32)
    cfg = GuidanceConfig(w_d=w_d)
    out = cfg_frequency_guided(dc, du, cfg)
    low_out = dwt2(out, cfg.filter).L.data
    low_cond = dwt2(dc, cfg.filter).L.data
    err = float(np.abs(low_out - low_cond).max())
    assert err <= 1e-5, f"w_d={w_d} low-band deviation {err:.3e}"
    print(f"PASS low band preserved at w_d={w_d}: max dev {err:.3e}")


def test_guidance_standard_mode_is_cfg_formula_bitwise():
    dc, du = rand_field(104, 3, 32, 32), rand_field(105, 3, 32, 32)
    for w in (1.0, 2.5, 7.5):
        out = cfg_frequency_guided(dc, du, GuidanceConfig(w=w, mode="standard_cfg"))
        formula = du.data + np.float32(w) * (dc.data - du.data)
        assert np.array_equal(out.data, formula), f"w={w} not bitwise"
        assert np.array_equal(out.data, cfg_standard(dc, du, w).data)
    print("PASS standard_cfg mode is the guidance formula bitwise")


def test_inversion_round_trip_tolerance_and_monotonicity():
    started = time.perf_counter()
    backend = demo_backend(64, 64)
    x0 = Field(
        np.clip(
            backend.gmm.means[0] + 0.05 * rand_field(106, 3, 64, 64).data, -1.0, 1.0
        ).astype(np.float32)
    )
    errs = {}
    for n in (25, 50, 100, 200):
        sched = build_schedule("karras_rho7", n, 0.01, 10.0)
        traj = ddim_invert(x0, sched, backend, condition=0)
        back = ddim_sample(traj.latent_at(0), sched, backend, COND_ONLY, 0)
        errs[n] = float(np.abs(back.data - x0.data).max())
    elapsed = time.perf_counter() - started
    assert errs[50] < 5e-2, f"N=50 round trip {errs[50]:.4f}"
    pairs = list(errs.values())
    assert all(a >= b for a, b in zip(pairs, pairs[1:])), f"not non-increasing: {errs}"
    assert elapsed < 30.0, f"took {elapsed:.2f}s"
    print(f"PASS inversion round trip: errs {errs}, {elapsed:.2f}s")


def test_linear_ode_matches_closed_form_at_first_order():
    s0, sa, sb = 0.3, 7.0, 0.5
    backend = AnalyticBackend(
        GaussianMixture([(1.0, Field.zeros(1, 8, 8), s0)])
    )
    z0 = rand_field(107, 1, 8, 8)
    exact = z0.data * np.sqrt((s0**2 + sb**2) / (s0**2 + sa**2))
    errs = []
    for n in (10, 20, 40, 80, 160):
        grid = np.linspace(sa ** (1 / 7.0), sb ** (1 / 7.0), n + 1) ** 7.0
        z = z0
        for k in range(n):
            d = backend.denoise(DenoiseRequest(z, float(grid[k])))
            z = ddim_step(z, float(grid[k]), float(grid[k + 1]), d)
        errs.append(float(np.abs(z.data - exact).max() / np.abs(exact).max()))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert all(1.4 < r < 2.6 for r in ratios), f"errs {errs}, ratios {ratios}"
    print(f"PASS linear-ODE first order: errs {[f'{e:.2e}' for e in errs]}")


def test_tiling_partition_of_unity():
    worst = 0.0
    for canvas in ((128, 128), (100, 96), (65, 67), (64, 64), (257, 191)):
        layout = plan_layout(canvas, (64, 64))
        ph, pw = layout.patch
        total = np.zeros(canvas, dtype=np.float64)
        for (y, x), mask in zip(layout.rectangles, layout.weight_masks):
            total[y : y + ph, x : x + pw] += mask
        worst = max(worst, float(np.abs(total - 1.0).max()))
    assert worst <= 1e-6, f"partition deviation {worst:.3e}"
    print(f"PASS tiling partition of unity: max dev {worst:.3e}")


def test_tiling_batch_size_invariance_bitwise(tiny_backend):
    inp = smooth_image(108, 8, 8)
    outs = []
    for bs in (1, 2, 9):
        stage = StageConfig(
            target=(16, 16),
            guidance=GuidanceConfig(skip_tau_index=1),
            steps=3,
            patch=(8, 8),
            batch_size=bs,
        )
        out, _ = run_stage(inp, stage, tiny_backend, condition=0)
        outs.append(out.data)
    assert np.array_equal(outs[0], outs[1]) and np.array_equal(outs[0], outs[2])
    print("PASS tiling batch-size invariance: bitwise across batch sizes 1, 2, 9")


def test_tiling_single_patch_equals_untiled_bitwise(tiny_backend):
    inp = smooth_image(109, 4, 4)
    cfg = GuidanceConfig(w_d=7.5, skip_tau_index=2)
    stage = StageConfig(target=(8, 8), guidance=cfg, steps=4, patch=(8, 8))
    tiled, _ = run_stage(inp, stage, tiny_backend, condition=0)

    from hiwave.imaging import decode_latent, encode_latent

    sched = build_schedule("karras_rho7", 4, stage.sigma_min, stage.sigma_max)
    z = encode_latent(lanczos_resize(inp, 8, 8), tiny_backend)
    traj = ddim_invert(z, sched, tiny_backend, 0)
    z = traj.latent_at(0)
    for i in range(4):
        z = skip_residual_mix(z, traj.latent_at(i), i, 4, cfg)
        d = guided_prediction(tiny_backend, z, float(sched.sigmas[i]), cfg, 0, step_index=i)
        z = ddim_step(z, float(sched.sigmas[i]), float(sched.sigmas[i + 1]), d)
    untiled = decode_latent(z, tiny_backend)
    assert np.array_equal(tiled.data, untiled.data)
    print("PASS tiling single patch: bitwise equal to untiled sampling")


def test_pipeline_reproduces_upscaled_base():
    backend = demo_backend(64, 64)
    base = generate_base(backend, 0, seed=11, steps=50)
    small = lanczos_resize(base, 32, 32)
    stage = StageConfig(
        target=(64, 64),
        guidance=GuidanceConfig(mode="conditional_only", skip_tau_index=0),
        steps=200,
        patch=(64, 64),
    )
    out, _ = run_stage(small, stage, backend, condition=0)
    reference = lanczos_resize(small, 64, 64)
    got = psnr(out, reference)
    assert got >= 40.0, f"reproduction PSNR {got:.2f} dB"
    print(f"PASS pipeline reproduction: PSNR {got:.2f} dB (>= 40)")


def test_structure_preservation_two_stage_upscale():
    started = time.perf_counter()
    backend = demo_backend(64, 64)
    plan = default_plan([(128, 128), (256, 256)], steps=50)
    final, manifest = run_pipeline(plan, backend, seed=4, condition=0)
    elapsed = time.perf_counter() - started

    base_hw = (64, 64)
    base = generate_base(backend, 0, seed=4, steps=50)
    down = lanczos_resize(final, *base_hw)
    got = psnr(down, base)
    assert got >= 28.0, f"structure PSNR {got:.2f} dB"
    for stage in manifest.stages:
        seam, interior = stage["stat_seam"], stage["stat_interior"]
        assert seam <= 1.5 * interior, f"seam {seam:.4f} vs interior {interior:.4f}"
    assert elapsed < 60.0, f"took {elapsed:.2f}s"
    ratios = [s["stat_seam"] / s["stat_interior"] for s in manifest.stages]
    print(
        f"PASS structure preservation: PSNR {got:.2f} dB, "
        f"seam ratios {[f'{r:.2f}' for r in ratios]}, {elapsed:.1f}s"
    )


def test_skip_residual_untouched_and_convex():
    cfg = GuidanceConfig(skip_tau_index=10, alpha=3.0)
    current, inverted = rand_field(110), rand_field(111)
    # at or past the threshold the latent passes through untouched
    for i in (10, 11, 49):
        assert skip_residual_mix(current, inverted, i, 50, cfg) is current
    # below the threshold the mix stays inside the elementwise envelope
    for i in (0, 3, 9):
        out = skip_residual_mix(current, inverted, i, 50, cfg)
        lo = np.minimum(current.data, inverted.data) - 1e-6
        hi = np.maximum(current.data, inverted.data) + 1e-6
        assert ((out.data >= lo) & (out.data <= hi)).all(), f"envelope broken at i={i}"
    # both orientations selectable; step 0 pins the mix to its extreme
    prose = skip_residual_mix(current, inverted, 0, 50, cfg)
    assert np.array_equal(prose.data, inverted.data)
    literal_cfg = GuidanceConfig(skip_tau_index=10, alpha=3.0, skip_orientation="literal")
    literal = skip_residual_mix(current, inverted, 0, 50, literal_cfg)
    assert np.array_equal(literal.data, current.data)
    assert skip_weight(0, 50, 3.0) == pytest.approx(1.0)
    print("PASS skip residual: pass-through at i>=tau, convex envelope, both orientations")


def test_ablation_arms_complete_with_distinct_hashes(tiny_backend):
    base = smooth_image(112, 8, 8)
    plan = default_plan([(12, 12), (16, 16)], steps=3, patch=(8, 8))
    hashes = {}
    for arm in ABLATION_ARMS:
        _, manifest = run_pipeline(
            apply_ablation(plan, arm), tiny_backend, seed=13, condition=0, base_image=base
        )
        hashes[arm] = manifest.final_hash
    others = {arm: h for arm, h in hashes.items() if arm != "full"}
    assert all(h != hashes["full"] for h in others.values()), hashes
    assert len(set(hashes.values())) == len(hashes), hashes
    print(f"PASS ablation arms: {len(hashes)} arms, all hashes distinct")
