"""Acceptance criteria, each checked at its stated tolerance.

Every test records exactly one PASS/FAIL line, printed in the terminal
summary under "acceptance criteria".
"""

import math
import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from _shapes import bitten_disc, disc_mask, image_from_mask, notched_square, polygon_mask
from test_features import naive_intensity
from torchpilot.config import load_config
from torchpilot.control import lyapunov
from torchpilot.features import Calibration, IntensityParams, calibrate, pool_convexity, raw_intensity
from torchpilot.harness import Mode, Sensor, normalize, run_experiment
from torchpilot.imgproc import Color, QuantizedImage, RgbImage, extract_contours, polygon_area, quantize
from torchpilot.plant import NO_NOISE, NoiseConfig, PlantState, PlateSpec, RenderConfig, render

THICK = (0.375, 0.5)


@pytest.fixture(scope="module")
def suite():
    cfg = load_config()
    exps = replace(cfg, suite=True).experiments()
    t0 = time.perf_counter()
    results = {(e.mode, e.plate.thickness): run_experiment(e) for e in exps}
    return results, time.perf_counter() - t0


@pytest.mark.criterion("1 parameter fidelity")
def test_01_parameter_fidelity(criterion):
    cfg = load_config()
    c, i = cfg.controller, cfg.intensity
    got = {
        "k": c.gain, "c*": cfg.c_star, "i*": cfg.i_star, "v_max": c.v_max, "a_max": c.a_max,
        "sigma_x": i.sigma_x, "sigma_y": i.sigma_y, "weights": (i.w_red, i.w_green, i.w_blue),
        "i_sat": i.i_sat, "lambda": cfg.lam,
    }
    want = {
        "k": 200, "c*": 0.95, "i*": 0.25, "v_max": 2.0, "a_max": 0.8, "sigma_x": 30, "sigma_y": 30,
        "weights": (0.01, 0.04, 0.16), "i_sat": 10, "lambda": 0.5,
    }
    bad = {k: got[k] for k in want if got[k] != want[k]}
    criterion.check(not bad, f"mismatches: {bad}" if bad else "all 10 constants exact")


@pytest.mark.criterion("2 controlled-mode success")
def test_02_controlled_success(criterion, suite):
    results, elapsed = suite
    ratios = {t: results[(Mode.CONTROLLED, t)].success_ratio for t in (0.25, 0.375, 0.5)}
    ok = elapsed < 60 and all(r == 1.0 for r in ratios.values())
    criterion.check(ok, f"suite {elapsed:.1f}s (< 60 s), controlled ratios {ratios}")


@pytest.mark.criterion("3 failure-mode directionality")
def test_03_failure_directionality(criterion, suite):
    results, _ = suite
    slow = {t: results[(Mode.SLOW, t)].success_ratio for t in (0.25, 0.375, 0.5)}
    fast = {t: results[(Mode.FAST, t)].success_ratio for t in THICK}
    ok = slow[0.25] == 1.0 and all(slow[t] < 1 for t in THICK) and all(fast[t] < 1 for t in THICK)
    criterion.check(ok, f"slow {slow}, fast {fast}")


def _tracking(results):
    worst_err, worst_v, worst_a = 0.0, 0.0, 0.0
    params = load_config().controller
    for t in (0.25, 0.375, 0.5):
        r = results[(Mode.CONTROLLED, t)]
        comb = r.combustion_records()
        late = [rec for rec in comb if rec.t - r.combustion_start > 10.0]
        assert late, "run shorter than the 10 s settling window"
        worst_err = max(worst_err, max(abs(rec.s - rec.s_star) for rec in late))
        n = normalize(r, params)
        mask = np.array([rec.phase.value == "combustion" for rec in r.telemetry])
        worst_v = max(worst_v, float(np.abs(n["velocity"][mask]).max()))
        worst_a = max(worst_a, float(np.abs(n["accel"][mask]).max()))
    return worst_err, worst_v, worst_a


@pytest.mark.criterion("4a tracking |s-s*|<=0.05 after 10 s, normalised velocity < 1")
def test_04a_tracking_and_velocity(criterion, suite):
    err, v, _ = _tracking(suite[0])
    criterion.check(err <= 0.05 and v < 1.0, f"max |s-s*| {err:.4f}, max |v|/v_max {v:.3f}")


@pytest.mark.criterion("4b normalised acceleration < 1")
def test_04b_acceleration_never_saturates(criterion, suite):
    _, _, a = _tracking(suite[0])
    criterion.check(a < 1.0, f"max |a|/a_max {a:.3f}")


@pytest.mark.criterion("5 Lyapunov descent")
def test_05_lyapunov_descent(criterion):
    cfg = replace(load_config(), noise=NO_NOISE, harness=replace(load_config().harness, sensor=Sensor.IDEAL.value))
    base = cfg.experiment()
    plate = replace(base.plate, tau=0.1)
    rng = np.random.default_rng(2024)
    worst = -math.inf
    for v0 in rng.uniform(0.0, cfg.controller.v_max, 20):
        exp = replace(base, plate=plate, initial_velocity_ratio=v0 / plate.v_star)
        r = run_experiment(exp)
        recs = [rec for rec in r.combustion_records() if rec.t - r.combustion_start > 2.0]
        v = np.array([lyapunov(rec.s_star - rec.s) for rec in recs])
        worst = max(worst, float(np.diff(v).max()))
    criterion.check(worst <= 1e-6, f"largest step-over-step increase of V {worst:.2e} (tol 1e-6), 20 runs")


@pytest.mark.criterion("6 intensity oracle equivalence")
def test_06_intensity_oracle(criterion):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        h, w = rng.integers(8, 48, size=2)
        codes = rng.integers(0, 4, size=(h, w))
        cal = Calibration((float(rng.uniform(0, w)), float(rng.uniform(0, h))), 1.0)
        params = IntensityParams(sigma_x=float(rng.uniform(2, 40)), sigma_y=float(rng.uniform(2, 40)))
        exact = naive_intensity(codes, cal, params)
        fast = raw_intensity(QuantizedImage(codes), cal, params)
        worst = max(worst, abs(fast - exact) / exact if exact else abs(fast))
    criterion.check(worst < 1e-9, f"max relative error {worst:.1e} over 100 frames")


def _c(mask):
    contours = extract_contours(image_from_mask(mask), Color.BLUE)
    return pool_convexity(max(contours, key=polygon_area))


@pytest.mark.criterion("7 convexity suite")
def test_07_convexity(criterion):
    discs = {r: _c(disc_mask((100, 100), (50, 50), r)) for r in (10, 20, 40)}
    shape = (128, 128)
    notched = _c(polygon_mask(shape, notched_square(40, center=(64, 64))))
    # invariance is checked on a curved, pool-like defect shape
    blob = _c(bitten_disc(shape, 24))
    rot = [_c(bitten_disc(shape, 24, angle=k * math.pi / 4 + 0.3)) for k in range(8)]
    scaled = [_c(bitten_disc(shape, 24 * f)) for f in (0.5, 2.0)]
    spread = max(abs(x - blob) / blob for x in rot + scaled)
    order = [_c(polygon_mask(shape, notched_square(40, d, center=(64, 64)))) for d in (0.55, 0.25, 0.0)]
    ok = (
        min(discs.values()) >= 0.98
        and abs(notched - 0.75) <= 0.02
        and spread < 0.02
        and order[0] < order[1] < order[2]
    )
    criterion.check(
        ok,
        f"discs {', '.join(f'{v:.4f}' for v in discs.values())}; notch {notched:.4f}; "
        f"rotation/scale spread {spread:.2%}; ordering {', '.join(f'{v:.3f}' for v in order)}",
    )


@pytest.mark.criterion("8 quantisation")
def test_08_quantization(criterion):
    rng = np.random.default_rng(8)
    frames = [RgbImage(rng.integers(0, 256, size=(40, 50, 3))) for _ in range(20)]
    plate = PlateSpec.standard(0.375)
    state = replace(PlantState.initial(plate), pool_heat=0.6, bypass_engaged=True, torch_position=3.0)
    frames += [render(state, False, NoiseConfig(spark_probability=1.0), s) for s in range(10)]
    frames += [render(state, True, NoiseConfig(), s) for s in range(5)]
    ok = True
    for f in frames:
        q = quantize(f)
        ok &= set(np.unique(q.codes)) <= {0, 1, 2, 3}
        ok &= sum(q.count(c) for c in Color) == f.width * f.height
        ok &= quantize(q.to_rgb()) == q
    criterion.check(ok, f"{len(frames)} frames: codes, partition, fixed point")


@pytest.mark.criterion("9 calibration")
def test_09_calibration(criterion):
    cfg = RenderConfig()
    params = IntensityParams()
    state = PlantState.initial(PlateSpec.standard(0.375))
    frames = [quantize(render(state, True, NoiseConfig(), seed)) for seed in range(10)]
    cal = calibrate(frames, params)
    off = math.dist(cal.centroid, cfg.flame_center)
    single = calibrate(frames[:1], params)
    rel = raw_intensity(frames[0], single, params) / single.baseline_intensity
    ok = off < 1.0 and cal.baseline_intensity > 0 and abs(rel - 1.0) <= 1e-6
    criterion.check(ok, f"centroid off by {off:.3f} px, I_cal {cal.baseline_intensity:.3f}, re-measured {rel:.9f}")


@pytest.mark.criterion("10 determinism")
def test_10_determinism(criterion, tmp_path):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        subprocess.run(
            [sys.executable, "-m", "torchpilot.cli", "run", "--seed", "42", "--dump-frames", "--out", str(out)],
            check=True,
        )
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    same = all((outs[0] / f).read_bytes() == (outs[1] / f).read_bytes() for f in files)
    other = sorted(p.relative_to(outs[1]) for p in outs[1].rglob("*") if p.is_file())
    n_frames = sum(f.suffix == ".ppm" for f in files)
    criterion.check(same and files == other and n_frames > 0, f"{len(files)} files compared ({n_frames} frames)")
