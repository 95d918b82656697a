#!/usr/bin/env python3
"""Benchmark the compiled detector kernels against the numpy fallback.

Usage: python benchmarks/bench_backends.py [--uses N]

Times each kernel on representative instance sizes (per-call microseconds)
and runs a small end-to-end SER sweep under both backends via subprocesses.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from mimodet import _pykernels
from mimodet.modem import build_constellation

try:
    from mimodet import _ckernels
except ImportError:
    _ckernels = None


def _instances(n, nr, nt, m, snr_db, seed):
    rng = np.random.default_rng(seed)
    c = build_constellation(m)
    sigma2 = nt / 10 ** (snr_db / 10)
    out = []
    for _ in range(n):
        h = np.sqrt(0.5) * (rng.standard_normal((nr, nt)) + 1j * rng.standard_normal((nr, nt)))
        x = rng.integers(0, m, nt)
        w = np.sqrt(sigma2 / 2) * (rng.standard_normal(nr) + 1j * rng.standard_normal(nr))
        out.append((h @ c.points[x] + w, h))
    return out, c, sigma2


def _time(fn, instances, reps):
    t0 = time.perf_counter()
    for _ in range(reps):
        for y, h in instances:
            fn(y, h)
    return (time.perf_counter() - t0) / (reps * len(instances)) * 1e6


def bench(uses):
    cases = [
        ("linear_soft (4,4)", 4, 4, 4, 12.0, lambda mod, c, s2: lambda y, h: mod.linear_soft(y, h, s2)),
        ("linear_soft (6,12)", 6, 12, 16, 12.0, lambda mod, c, s2: lambda y, h: mod.linear_soft(y, h, s2)),
        ("ml 4-QAM nt=4", 4, 4, 4, 12.0, lambda mod, c, s2: lambda y, h: mod.ml_search(y, h, c.points)),
        ("ml 16-QAM nt=3", 3, 3, 16, 14.0, lambda mod, c, s2: lambda y, h: mod.ml_search(y, h, c.points)),
        ("sphere 4-QAM nt=4", 4, 4, 4, 12.0,
         lambda mod, c, s2: lambda y, h: mod.sphere_search(y, h, c.pam_levels, c.side)),
        ("sphere 16-QAM nt=3", 3, 3, 16, 14.0,
         lambda mod, c, s2: lambda y, h: mod.sphere_search(y, h, c.pam_levels, c.side)),
        ("vblast-zf (4,4)", 4, 4, 4, 12.0, lambda mod, c, s2: lambda y, h: mod.vblast(y, h, 0.0, c.points, False)),
        ("vblast-mmse (6,12)", 6, 12, 16, 12.0, lambda mod, c, s2: lambda y, h: mod.vblast(y, h, s2, c.points, True)),
    ]
    print(f"{'kernel':24s} {'python us':>10s} {'cython us':>10s} {'speedup':>8s}")
    for name, nt, nr, m, snr, make in cases:
        instances, c, s2 = _instances(uses, nr, nt, m, snr, seed=hash(name) & 0xFFFF)
        t_py = _time(make(_pykernels, c, s2), instances, reps=1)
        if _ckernels is None:
            print(f"{name:24s} {t_py:10.1f} {'n/a':>10s} {'n/a':>8s}")
            continue
        t_cy = _time(make(_ckernels, c, s2), instances, reps=5)
        print(f"{name:24s} {t_py:10.1f} {t_cy:10.1f} {t_py / t_cy:7.1f}x")


def bench_end_to_end():
    script = (
        "import time; from mimodet.sim import SimulationConfig, estimate_ser; "
        "from mimodet.detect import DetectorSpec; import mimodet.kernels as k; "
        "cfg = SimulationConfig(nt=4, nr=4, modulation='4qam', "
        "detectors=tuple(DetectorSpec(n) for n in ('zf','mmse','ml','vblast-zf','vblast-mmse')), "
        "snr_grid_db=(12.0,), max_channel_uses=5000, min_errors=0, seed=1); "
        "t0 = time.perf_counter(); estimate_ser(cfg); "
        "print(f'{k.backend()}: {(time.perf_counter()-t0)/5000*1e6:.0f} us/channel use')"
    )
    print("\nend-to-end (4,4) 4-QAM, 5 detectors, 5000 uses:")
    for backend in ("cython", "python"):
        env = dict(os.environ, MIMODET_BACKEND=backend)
        r = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True)
        print(" ", (r.stdout.strip() or r.stderr.strip().splitlines()[-1]))


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--uses", type=int, default=300, help="instances per kernel case")
    args = ap.parse_args()
    bench(args.uses)
    bench_end_to_end()
