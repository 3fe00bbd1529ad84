"""Refit ``POOL_TABLE`` in torchpilot.plant.

For each heat knot, pick the pool radius and notch depth whose noiseless
render reads back a chosen (convexity, intensity) pair through the default
pipeline. The targets pass through (0.95, 0.25) at heat 0.6 and keep
``(c + i) / 2 == heat``, so the measured state tracks pool heat.

    python scripts/fit_pool_table.py
"""

from dataclasses import replace

import numpy as np

from torchpilot.features import IntensityParams, calibrate, measure
from torchpilot.imgproc import quantize
from torchpilot.plant import NO_NOISE, PlantState, RenderConfig, render

KNOTS = np.round(np.arange(0.10, 1.0001, 0.05), 2)


def targets(h):
    if h >= 0.6:
        c = 0.95 + 0.03 * (h - 0.6) / 0.4
    else:
        i = 0.25 - 0.45 * (0.6 - h)
        c = 2 * h - i
    return c, min(2 * h - c, 1.0)


def sharpness(h):
    # smooth lobes near and above nominal heat, narrow spokes when starved
    return float(np.interp(h, [0.4, 0.6], [0.3, 1.0]))


def read_back(cfg, cal, params, radius, depth, sharp):
    probe = replace(cfg, pool_table=((0.0, radius, depth, sharp), (1.0, radius, depth, sharp)))
    frame = quantize(render(PlantState(pool_heat=0.5), False, NO_NOISE, 0, probe))
    f = measure(frame, cal, params, 0.5).features
    return (f.convexity, f.intensity) if f else (0.0, 0.0)


def bisect(fn, lo, hi, target, increasing, iters=30):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if (fn(mid) < target) == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def main():
    cfg = RenderConfig()
    params = IntensityParams()
    cal = calibrate([quantize(render(PlantState(), True, NO_NOISE, 0, cfg))], params)
    rows = [(0.0, 0.0, 0.0, 0.3)]
    radius, depth = 20.0, 0.5
    for h in KNOTS:
        c_t, i_t = targets(h)
        p = sharpness(h)
        for _ in range(6):
            radius = bisect(lambda r: read_back(cfg, cal, params, r, depth, p)[1], 4.0, 60.0, i_t, True)
            depth = bisect(lambda d: read_back(cfg, cal, params, radius, d, p)[0], 0.0, 0.99, c_t, False)
        c, i = read_back(cfg, cal, params, radius, depth, p)
        print(f"# h={h:.2f} target=({c_t:.3f}, {i_t:.3f}) got=({c:.3f}, {i:.3f}) s={(c + i) / 2:.4f}")
        rows.append((float(h), round(radius, 3), round(depth, 4), round(p, 3)))
    print("POOL_TABLE = (")
    for r in rows:
        print(f"    ({r[0]:.2f}, {r[1]:.3f}, {r[2]:.4f}, {r[3]:.3f}),")
    print(")")


if __name__ == "__main__":
    main()
