"""Compare the compiled kernels with their pure-Python twins.

    python benchmarks/bench_kernels.py [--repeat N] [--size PX]

Kernel rows time each function directly from both modules.  Stage rows run
whole pipeline stages in a fresh interpreter per backend, selected with
``GRAINMORPH_PURE_PYTHON``, since the library binds its kernels at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from grainmorph import _pykernels as py

try:
    from grainmorph import _ckernels as ck
except ImportError:
    ck = None

STAGE_SCRIPT = r"""
import json, sys, time
from grainmorph import (PcnnParams, build_skeleton, constrained_delaunay, extract_contours,
                        kernels, pcnn_smooth, spectral_segment, synthetic, triangle_mean_grey)
size, repeat = int(sys.argv[1]), int(sys.argv[2])
img = synthetic.micrograph(size, max(4, size // 6), seed=0)
cs = extract_contours(spectral_segment(img))
mesh = constrained_delaunay(cs)
def best(fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    return min(times)
print(json.dumps({
    "backend": kernels.BACKEND,
    "cdt": best(lambda: constrained_delaunay(cs)),
    "triangle_mean_grey": best(lambda: triangle_mean_grey(mesh, img)),
    "pcnn_smooth": best(lambda: pcnn_smooth(img, PcnnParams(mode="smooth"))),
    "triangles": len(mesh),
}))
"""


def kernel_inputs(rng, n):
    pts = rng.integers(0, 257, (n, 8)) / 4.0
    grey = rng.integers(0, 256, (96, 96)).astype(np.uint8)
    tris = rng.integers(0, 385, (2000, 3, 2)) / 4.0
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    flip = (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    labels = (np.arange(96)[:, None] // 3 + np.arange(96)[None, :] // 5).astype(np.int64)
    sizes = np.bincount(labels.ravel()).astype(np.int64)
    return pts.tolist(), grey, tris, labels, sizes


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    pts, grey, tris, labels, sizes = kernel_inputs(rng, 20000)

    def cases(mod):
        return {
            "orient2d x20000": lambda: [mod.orient2d(*p[:6]) for p in pts],
            "incircle x20000": lambda: [mod.incircle(*p) for p in pts],
            "triangle_pixel_stats 2000 tris": lambda: mod.triangle_pixel_stats(tris, grey),
            "smooth_representatives 96x96": lambda: mod.smooth_representatives(grey, labels,
                                                                             sizes, 1),
        }

    rows = []
    pc = cases(py)
    cc = cases(ck) if ck else {}
    for name in pc:
        t_py = min(timeit.repeat(pc[name], number=1, repeat=repeat))
        t_c = min(timeit.repeat(cc[name], number=1, repeat=repeat)) if ck else float("nan")
        rows.append((name, t_c, t_py))
    return rows


def bench_stages(size, repeat):
    results = {}
    for flag in ("0", "1"):
        env = dict(os.environ, GRAINMORPH_PURE_PYTHON=flag)
        out = subprocess.run([sys.executable, "-c", STAGE_SCRIPT, str(size), str(repeat)],
                             env=env, capture_output=True, text=True, check=True)
        r = json.loads(out.stdout)
        results[r["backend"]] = r
    c, p = results.get("cython", {}), results["python"]
    tris = p["triangles"]
    return [(f"{k} ({size}px, {tris} triangles)" if k == "cdt" else f"{k} ({size}px)",
             c.get(k, float("nan")), p[k]) for k in ("cdt", "triangle_mean_grey", "pcnn_smooth")]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--size", type=int, default=128, help="synthetic micrograph side")
    args = ap.parse_args(argv)
    if ck is None:
        print("compiled kernels not built; only the pure-Python column is meaningful")
    rows = bench_kernels(args.repeat) + bench_stages(args.size, args.repeat)
    width = max(len(r[0]) for r in rows)
    print(f"{'benchmark':<{width}}  {'cython s':>10}  {'python s':>10}  {'speed-up':>8}")
    for name, tc, tp in rows:
        print(f"{name:<{width}}  {tc:>10.4f}  {tp:>10.4f}  {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
