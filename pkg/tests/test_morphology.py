import math
import warnings
from collections import Counter

import numpy as np
import pytest

from grainmorph import synthetic
from grainmorph.cat import build_skeleton, prune_skeleton
from grainmorph.contour import Contour, ContourSet, extract_contours
from grainmorph.morphology import (GreyMesh, ParticleStats, SceneStats, SeparationConfig,
                                   SeparationIncompleteWarning, classify_blobs,
                                   equivalent_diameter, fluctuation, longest_chord,
                                   orientation_degrees, particle_statistics, remove_holes,
                                   scene_statistics, separate_grains, torso_fluctuation,
                                   triangle_mean_grey)
from grainmorph.cat import ChainComplex
from grainmorph.raster import GreyImage
from grainmorph.tessellate import TriMesh, _neighbors, constrained_delaunay
from _util import directed_edges, frac_orient, polygon, random_mask, separate_image


def one_triangle_mesh(pts, w=3, h=3):
    tris = np.array([[0, 1, 2]])
    return TriMesh(np.array(pts, float), tris, _neighbors(tris), np.ones((1, 3), bool),
                   np.zeros(1), w, h)


# -- triangle greys ---------------------------------------------------------

def test_uniform_triangle_grey():
    img = GreyImage(np.full((3, 3), 200, np.uint8))
    gm = triangle_mean_grey(one_triangle_mesh([(0, 0), (3, 0), (0, 3)]), img)
    assert gm.grey.tolist() == [200.0]


def test_two_centres_average():
    arr = np.full((3, 3), 7, np.uint8)
    arr[0, 0], arr[0, 1] = 100, 200
    tri = [(0, 0), (3, 0), (0, 1.5)]
    centres = [(i + 0.5, j + 0.5) for j in range(3) for i in range(3)
               if all(frac_orient(tri[k], tri[(k + 1) % 3], (i + 0.5, j + 0.5)) >= 0
                      for k in range(3))]
    assert centres == [(0.5, 0.5), (1.5, 0.5)]
    gm = triangle_mean_grey(one_triangle_mesh(tri), GreyImage(arr))
    assert gm.grey.tolist() == [150.0]


def test_sliver_takes_centroid_pixel():
    arr = np.arange(9, dtype=np.uint8).reshape(3, 3) * 10
    tri = [(1.1, 1.1), (1.3, 1.1), (1.1, 1.3)]
    gm = triangle_mean_grey(one_triangle_mesh(tri), GreyImage(arr))
    assert gm.grey.tolist() == [arr[1, 1]]


def test_grey_matches_rasterisation_oracle():
    rng = np.random.default_rng(0)
    m = random_mask(rng, 16, 8)
    arr = rng.integers(0, 256, m.shape).astype(np.uint8)
    mesh = constrained_delaunay(extract_contours(m))
    gm = triangle_mean_grey(mesh, GreyImage(arr))
    V = mesh.vertices.tolist()
    sums = Counter()
    counts = Counter()
    for j in range(m.shape[0]):
        for i in range(m.shape[1]):
            c = (i + 0.5, j + 0.5)
            for t, tri in enumerate(mesh.triangles.tolist()):
                if all(frac_orient(V[tri[k]], V[tri[(k + 1) % 3]], c) >= 0 for k in range(3)):
                    sums[t] += int(arr[j, i])
                    counts[t] += 1
                    break
    for t in range(len(mesh)):
        if counts[t]:
            assert gm.grey[t] == sums[t] / counts[t]
        else:
            cx, cy = mesh.centroids()[t]
            assert gm.grey[t] == arr[min(int(cy), m.shape[0] - 1), min(int(cx), m.shape[1] - 1)]


# -- fluctuation ------------------------------------------------------------

def test_fluctuation_examples():
    assert fluctuation([200, 195, 188]) == 12
    assert fluctuation([200, 120]) == 80
    assert fluctuation([200, 195, 188], "max-step") == 7
    with pytest.raises(ValueError):
        fluctuation([1, 2], "other")


def test_single_triangle_torso():
    c = ChainComplex("torso", (1,), (0, 2), 0)
    gm = GreyMesh(None, np.array([150.0, 150.0, 150.0]))
    assert torso_fluctuation(c, gm) == 0
    gm = GreyMesh(None, np.array([150.0, 190.0, 140.0]))
    assert torso_fluctuation(c, gm) == 50


def test_config_validation():
    with pytest.raises(ValueError):
        SeparationConfig(threshold=-1)
    with pytest.raises(ValueError):
        SeparationConfig(max_passes=0)
    with pytest.raises(ValueError):
        SeparationConfig(fluctuation="mean")


# -- separation -------------------------------------------------------------

def test_uniform_blob_unchanged():
    cs, refined = separate_image(synthetic.disc(10))
    assert refined == cs
    cs, refined = separate_image(synthetic.dumbbell(200, 200))
    assert refined == cs


def test_dumbbell_two_grains():
    cs, refined = separate_image(synthetic.dumbbell(200, 120))
    assert cs.outer_count() == 1
    assert refined.outer_count() == 2
    assert abs(refined.total_area() - cs.total_area()) <= 1e-9 * cs.total_area()


def test_dumbbell_close_greys_one_grain():
    cs, refined = separate_image(synthetic.dumbbell(200, 185))
    assert refined.outer_count() == 1


def test_cut_chords_appear_twice_reversed():
    cs, refined = separate_image(synthetic.dumbbell(200, 120))
    orig = Counter(directed_edges(cs))
    new = Counter(directed_edges(refined))
    extra = new - orig
    assert extra
    for (p, q), n in extra.items():
        assert n == 1 and new[(q, p)] == 1
    # every original boundary edge survives
    assert not (orig - new)


def test_threshold_monotone():
    img = synthetic.dumbbell(200, 120)
    counts = [separate_image(img, t)[1].outer_count() for t in range(0, 260, 10)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[3] == 2 and counts[-1] == 1


def test_separation_idempotent():
    img = synthetic.dumbbell(200, 120)
    _, refined = separate_image(img)
    mesh = constrained_delaunay(refined)
    again = separate_grains(triangle_mean_grey(mesh, img), build_skeleton(mesh))
    assert again == refined


def ladder():
    pts = [(x, 0) for x in range(13)] + [(x, 1) for x in range(12, -1, -1)]
    arr = np.zeros((1, 12), np.uint8)
    arr[0, :4], arr[0, 4:8], arr[0, 8:] = 250, 180, 110
    cs = polygon(pts, 12, 1)
    mesh = constrained_delaunay(cs)
    return cs, mesh, triangle_mean_grey(mesh, GreyImage(arr))


def test_multi_pass_and_warning():
    cs, mesh, gm = ladder()
    skel = build_skeleton(mesh)
    assert [c.kind for c in skel.complexes] == ["free"]
    with pytest.warns(SeparationIncompleteWarning):
        one = separate_grains(gm, skel, SeparationConfig(max_passes=1))
    assert one.outer_count() == 2
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        full = separate_grains(gm, skel, SeparationConfig(max_passes=2))
    assert full.outer_count() == 3
    assert full.total_area() == cs.total_area() == 12.0


def test_max_step_mode():
    cs, mesh, gm = ladder()
    skel = build_skeleton(mesh)
    out = separate_grains(gm, skel, SeparationConfig(threshold=75, fluctuation="max-step"))
    assert out.outer_count() == 1
    out = separate_grains(gm, skel, SeparationConfig(threshold=70, fluctuation="max-step"))
    assert out.outer_count() == 3


def test_workers_same_result():
    img = synthetic.micrograph(96, 12, seed=1)
    from grainmorph import build_skeleton as bs, spectral_segment
    cs = extract_contours(spectral_segment(img))
    mesh = constrained_delaunay(cs)
    gm = triangle_mean_grey(mesh, img)
    a = separate_grains(gm, bs(mesh), SeparationConfig(workers=1))
    b = separate_grains(gm, bs(mesh), SeparationConfig(workers=2))
    assert a == b


# -- holes ------------------------------------------------------------------

def ring_set():
    m = np.ones((5, 5), bool)
    m[2, 2] = False
    return extract_contours(m)


def test_grain_hole_removed():
    cs = ring_set()
    out = remove_holes(cs, ["grain"])
    assert [c.kind for c in out] == ["outer"]
    assert out[0] == cs[0]


def test_binder_hole_kept():
    cs = ring_set()
    assert remove_holes(cs, ["binder"]) == cs


def test_no_holes_identity():
    cs = extract_contours(np.eye(4, dtype=bool))
    assert remove_holes(cs, ["grain"]) == cs


def test_hole_with_island_kept():
    m = np.ones((7, 7), bool)
    m[1:6, 1:6] = False
    m[3, 3] = True
    cs = extract_contours(m)
    out = remove_holes(cs, ["grain", "grain"])
    assert out == cs
    with pytest.raises(ValueError):
        remove_holes(cs, ["grain"])


def test_classify_blobs():
    arr = np.full((10, 20), 30, np.uint8)
    arr[2:5, 2:5] = 90
    arr[2:5, 10:14] = 200
    img = GreyImage(arr)
    cs = extract_contours(arr > 50)
    mesh = constrained_delaunay(cs)
    assert classify_blobs(triangle_mean_grey(mesh, img)) == ["binder", "grain"]


# -- particle statistics -----------------------------------------------------

def stats_of(points, category="grain", tau=1.0):
    cs = polygon(points)
    mesh = constrained_delaunay(cs)
    return particle_statistics(mesh, prune_skeleton(build_skeleton(mesh), tau), category)


def test_unit_square():
    s = stats_of([(0, 0), (1, 0), (1, 1), (0, 1)])
    assert s.area == 1.0 and (s.cx, s.cy) == (0.5, 0.5)
    assert s.orientation == 0.0
    assert s.holes == 0


def test_rectangle_four_by_one():
    s = stats_of([(0, 0), (4, 0), (4, 1), (0, 1)])
    assert s.area == 4.0
    assert s.orientation == 0.0
    assert s.length >= s.width
    assert abs(s.width - 1.0) <= 0.2


@pytest.mark.parametrize("deg", [0.0, 15.0, 30.0, 60.0, 90.0, 135.0, 170.0])
def test_rotated_rectangle_orientation(deg):
    t = math.radians(deg)
    u = np.array([math.cos(t), math.sin(t)])
    v = np.array([-math.sin(t), math.cos(t)])
    c = np.array([20.0, 20.0])
    pts = [c - 5 * u - v, c + 5 * u - v, c + 5 * u + v, c - 5 * u + v]
    s = stats_of([tuple(p) for p in pts])
    diff = (s.orientation - deg + 90) % 180 - 90
    assert abs(diff) < 1e-9
    assert 0 <= s.orientation < 180


def test_orientation_isotropic():
    assert orientation_degrees(2.0, 2.0, 0.0) == 0.0
    assert orientation_degrees(1.0, 3.0, 0.0) == 90.0


def convex_chord_sweep(q, pts, n=200000):
    """Longest chord through ``q`` of a convex polygon, by a dense sweep of
    directions; each chord is clipped against every edge half-plane."""
    p = np.asarray(pts, float)
    e = np.roll(p, -1, axis=0) - p
    nrm = np.column_stack([e[:, 1], -e[:, 0]])  # outward for positive orientation
    ang = np.linspace(0, np.pi, n, endpoint=False)
    d = np.column_stack([np.cos(ang), np.sin(ang)])
    num = ((p - q) * nrm).sum(axis=1)          # >= 0 for interior q
    den = d @ nrm.T
    with np.errstate(divide="ignore"):
        t = num / den
    hi = np.where(den > 0, t, np.inf).min(axis=1)
    lo = np.where(den < 0, t, -np.inf).max(axis=1)
    return float((hi - lo).max())


def test_single_node_metrics():
    n = 12
    pts = [(20 + 10 * math.cos(2 * math.pi * k / n), 20 + 10 * math.sin(2 * math.pi * k / n))
           for k in range(n)]
    cs = polygon(pts)
    mesh = constrained_delaunay(cs)
    pruned = prune_skeleton(build_skeleton(mesh), 1.0)
    assert len(pruned.nodes) == 1
    s = particle_statistics(mesh, pruned, "grain")
    assert abs(s.area - 300.0) < 1e-9
    sweep = convex_chord_sweep(pruned.nodes[0], pts)
    assert sweep - 1e-9 <= s.length <= sweep + 1e-6
    assert abs(s.width - 4 * 300.0 / (math.pi * s.length)) < 1e-9
    assert s.length >= s.width


def test_longest_chord_square():
    seg = np.array([[0, 0, 2, 0], [2, 0, 2, 2], [2, 2, 0, 2], [0, 2, 0, 0]], float)
    assert abs(longest_chord((1.0, 1.0), seg) - 2 * math.sqrt(2)) < 1e-12


def test_area_matches_refined_contour():
    img = synthetic.dumbbell(200, 120)
    _, refined = separate_image(img)
    mesh = constrained_delaunay(refined, validate=False)
    pruned = prune_skeleton(build_skeleton(mesh))
    for b, (k, holes) in enumerate(refined.blobs()):
        s = particle_statistics(mesh, pruned, "grain", b)
        want = sum(abs(float(np.sum(p[:, 0] * np.roll(p[:, 1], -1) - np.roll(p[:, 0], -1) * p[:, 1]))) / 2
                   * (1 if refined[j].kind == "outer" else -1)
                   for j in [k] + holes for p in [refined[j].points])
        assert abs(s.area - want) <= 1e-9 * want


def test_particle_dict_round_trip():
    s = ParticleStats(3, "binder", 1.5, 2.0, 0.75, 1.0, 2.0, 45.0, 1)
    assert s.as_dict()["class"] == "binder"
    assert ParticleStats.from_dict(s.as_dict()) == s


# -- scene statistics ---------------------------------------------------------

def test_scene_fraction():
    img = GreyImage(np.zeros((10, 10), np.uint8))
    p = ParticleStats(0, "grain", 75.0, 10.0, 7.5, 5, 5, 0.0, 0)
    sc = scene_statistics([p], img)
    assert sc.grain_area_fraction == 0.75 and sc.grain_count == 1
    assert sc.histogram == tuple([0] * 4 + [1])  # diameter 9.77 falls in [8, 10)


def test_scene_empty():
    sc = scene_statistics([], GreyImage(np.zeros((4, 4), np.uint8)))
    assert (sc.grain_count, sc.binder_count, sc.grain_area_fraction) == (0, 0, 0.0)
    assert sc.histogram == ()


def test_scene_counts_grains_only():
    img = GreyImage(np.zeros((10, 10), np.uint8))
    ps = [ParticleStats(0, "grain", 10.0, 1, 1, 0, 0, 0, 0),
          ParticleStats(1, "binder", 50.0, 1, 1, 0, 0, 0, 0)]
    sc = scene_statistics(ps, img)
    assert (sc.grain_count, sc.binder_count, sc.grain_area_fraction) == (1, 1, 0.1)
    assert SceneStats.from_dict(sc.as_dict()) == sc


def test_equivalent_diameter():
    assert abs(equivalent_diameter(math.pi * 4) - 4.0) < 1e-12
