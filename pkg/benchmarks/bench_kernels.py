"""Compare the compiled and pure-numpy kernels, then time one through-focus point.

    python benchmarks/bench_kernels.py [--size 256] [--repeat 20]

The end-to-end timing uses whichever backend ``lfretina.kernels`` picked at
import; run once more with LFRETINA_PURE_PYTHON=1 to time the fallback.
"""

import argparse
import timeit

import numpy as np

from lfretina import _kernels_py, kernels
from lfretina.eye_model import average_eye, load_population
from lfretina.optics import RetinalGrid, RetinaSimulator

try:
    from lfretina import _kernels_cy
except ImportError:
    _kernels_cy = None


def _inputs(n, rng):
    m = n // 3
    amp = rng.random((m, m))
    w = rng.normal(size=(m, m)) * 0.1
    z20 = rng.normal(size=(m, m))
    z40 = rng.normal(size=(m, m))
    field = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    k = np.arange(n) - n // 2
    index = np.rint(np.hypot(k[None, :], k[:, None])).astype(np.int64)
    ramp = np.exp(-2j * np.pi * rng.random(n))
    return amp, w, z20, z40, field, index, ramp


def bench(impl, n, repeat, rng):
    amp, w, z20, z40, field, index, ramp = _inputs(n, rng)
    block = np.empty(amp.shape, dtype=complex)
    acc = np.zeros((n, n))
    out = np.zeros((n, n), dtype=complex)
    mag = np.abs(field)
    cases = {
        "pupil_block": lambda: impl.pupil_block(amp, w, z20, z40, 0.1, -0.01, 11.4, block),
        "accumulate_intensity": lambda: impl.accumulate_intensity(acc, field, 0.5),
        "radial_bin": lambda: impl.radial_bin(mag, index, n // 2),
        "shifted_sum": lambda: impl.shifted_sum(out, field, ramp, ramp),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    py = bench(_kernels_py, args.size, args.repeat, np.random.default_rng(0))
    cy = bench(_kernels_cy, args.size, args.repeat, np.random.default_rng(0)) if _kernels_cy else {}
    print(f"kernel timings, {args.size}x{args.size} grid (best of {args.repeat}, ms)")
    print(f"{'kernel':<22}{'numpy':>10}{'cython':>10}{'speedup':>9}")
    for name, t in py.items():
        c = cy.get(name)
        cs = f"{c * 1e3:10.3f}{t / c:8.1f}x" if c else f"{'n/a':>10}{'':>9}"
        print(f"{name:<22}{t * 1e3:10.3f}{cs}")

    eye = average_eye(load_population(), 3.0)
    sim = RetinaSimulator(eye, 0.5, 3.0, range(400, 701, 10), RetinalGrid(args.size, 1.0))
    for k in (1, 2, 3, 4):
        def point():
            sim._cache.clear()
            sim.retinal_otf(k, 2.0, 2.0)

        point()
        t = min(timeit.repeat(point, number=1, repeat=3))
        print(f"one through-focus point, k={k} ({kernels.BACKEND}): {t * 1e3:8.1f} ms")


if __name__ == "__main__":
    main()
