"""Compiled and pure-Python kernels must agree exactly."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grainmorph import _pykernels as py
from _util import frac_incircle, frac_orient

ck = pytest.importorskip("grainmorph._ckernels")

quarter = st.integers(-400, 400).map(lambda k: k / 4.0)
wide = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.one_of(quarter, wide), min_size=8, max_size=8))
def test_predicates_agree_with_exact(v):
    a, b, c, d = v[0:2], v[2:4], v[4:6], v[6:8]
    o = frac_orient(a, b, c)
    assert py.orient2d(*a, *b, *c) == o == ck.orient2d(*a, *b, *c)
    i = frac_incircle(a, b, c, d)
    assert py.incircle(*a, *b, *c, *d) == i == ck.incircle(*a, *b, *c, *d)


def test_near_degenerate_predicates():
    # nearly collinear points that defeat naive double evaluation
    a, b = (0.5, 0.5), (12.0, 12.0)
    for k in range(1, 200):
        c = (24.0, 24.0 + k * 2.0 ** -50)
        assert py.orient2d(*a, *b, *c) == frac_orient(a, b, c) == ck.orient2d(*a, *b, *c)
    quad = [(0, 0), (3, 0), (2, 2), (0, 1)]
    assert frac_incircle(*quad[:3], quad[3]) == 0
    assert py.incircle(0, 0, 3, 0, 2, 2, 0, 1) == 0 == ck.incircle(0, 0, 3, 0, 2, 2, 0, 1)


def test_triangle_pixel_stats_agree():
    rng = np.random.default_rng(0)
    grey = rng.integers(0, 256, (12, 15)).astype(np.uint8)
    tris = rng.integers(0, 61, (80, 3, 2)) / 4.0
    # orient every triangle counterclockwise in the y-down frame
    for t in tris:
        if frac_orient(*t) < 0:
            t[[1, 2]] = t[[2, 1]]
    s1, c1 = py.triangle_pixel_stats(tris, grey)
    s2, c2 = ck.triangle_pixel_stats(tris, grey)
    assert np.array_equal(s1, s2) and np.array_equal(c1, c2)


def test_triangle_pixel_stats_brute_force():
    grey = np.arange(20, dtype=np.uint8).reshape(4, 5) * 10
    tri = np.array([[[0.0, 0.0], [5.0, 0.0], [0.0, 4.0]]])
    for mod in (py, ck):
        s, c = mod.triangle_pixel_stats(tri, grey)
        want = [(i, j) for j in range(4) for i in range(5)
                if frac_orient((5, 0), (0, 4), (i + 0.5, j + 0.5)) >= 0]
        assert c[0] == len(want)
        assert s[0] == sum(int(grey[j, i]) for i, j in want)


def test_smooth_representatives_agree():
    rng = np.random.default_rng(5)
    for _ in range(5):
        grey = rng.integers(0, 256, (14, 17)).astype(np.uint8)
        labels = rng.integers(0, 6, grey.shape).astype(np.int64)
        # relabel to 4-connected-ish blocks so groups have varied sizes
        labels[:7] = 0
        sizes = np.bincount(labels.ravel(), minlength=6).astype(np.int64)
        for r in (1, 2):
            assert np.array_equal(py.smooth_representatives(grey, labels, sizes, r),
                                  ck.smooth_representatives(grey, labels, sizes, r))


def test_backend_selection_env():
    code = "import grainmorph.kernels as k; print(k.BACKEND)"
    env = dict(os.environ, GRAINMORPH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
    env["GRAINMORPH_PURE_PYTHON"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "cython"


def test_pipeline_identical_under_both_backends():
    code = ("import numpy as np; from grainmorph import *; from grainmorph import synthetic;"
            "img = synthetic.micrograph(64, 6, seed=2);"
            "sm = pcnn_smooth(img, PcnnParams(mode='smooth'));"
            "cs = extract_contours(spectral_segment(sm)); m = constrained_delaunay(cs);"
            "gm = triangle_mean_grey(m, img);"
            "print(sm.pixels.tobytes().hex(), m.to_text(),"
            " ' '.join(f'{g:.17g}' for g in gm.grey))")
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, GRAINMORPH_PURE_PYTHON=flag)
        r = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        outs.append(r.stdout)
    assert outs[0] == outs[1]


@pytest.mark.parametrize("scale", [2.0 ** -1070, 2.0 ** -600, 2.0 ** -300, 2.0 ** 300, 2.0 ** 600])
def test_predicates_extreme_magnitudes(scale):
    rng = np.random.default_rng(1)
    for _ in range(50):
        v = (rng.integers(-8, 9, 8) * scale).tolist()
        a, b, c, d = v[0:2], v[2:4], v[4:6], v[6:8]
        for mod in (py, ck):
            assert mod.orient2d(*a, *b, *c) == frac_orient(a, b, c)
            assert mod.incircle(*a, *b, *c, *d) == frac_incircle(a, b, c, d)


def test_predicates_accept_numpy_scalars():
    v = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.2, 0.2])
    for mod in (py, ck):
        assert mod.orient2d(*v[:6]) == 1
        assert mod.incircle(*v) == 1
