import csv
import io
import json
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grainmorph import synthetic
from grainmorph.cat import build_skeleton, prune_skeleton
from grainmorph.contour import Contour, ContourSet, extract_contours
from grainmorph.morphology import (GreyMesh, ParticleStats, SceneStats, triangle_mean_grey)
from grainmorph.report import (CSV_COLUMNS, LAYERS, RenderSpec, emit_stats, parse_stats_json,
                               render_svg)
from grainmorph.segmentation import spectral_segment
from grainmorph.tessellate import constrained_delaunay
from _util import polygon


def full_scene():
    img = synthetic.dumbbell()
    mask = spectral_segment(img)
    cs = extract_contours(mask)
    mesh = constrained_delaunay(cs)
    skel = build_skeleton(mesh)
    return {"image": img, "mask": mask, "contours": cs, "mesh": mesh,
            "grey": triangle_mean_grey(mesh, img), "skeleton": skel,
            "pruned": prune_skeleton(skel)}


def groups(svg):
    return re.findall(r'<g id="([^"]+)"', svg)


def test_unit_square_path():
    cs = ContourSet([Contour([(0, 0), (1, 0), (1, 1), (0, 1)])], 2, 2)
    svg = render_svg({"contours": cs}, RenderSpec(layers=("contours",)))
    paths = re.findall(r' d="([^"]+)"', svg)
    assert len(paths) == 1
    d = paths[0]
    assert d.startswith("M ") and d.endswith(" Z")
    assert d.count("L ") == 3  # three lines plus the closing segment


def test_grey_triangle_fills():
    cs = polygon([(0, 0), (2, 0), (2, 2), (0, 2)], 2, 2)
    mesh = constrained_delaunay(cs)
    gm = GreyMesh(mesh, np.array([100.0, 200.0]))
    svg = render_svg({"grey": gm}, RenderSpec(layers=("grey-triangles",)))
    assert re.findall(r'fill="(rgb[^"]+)"', svg) == ["rgb(100,100,100)", "rgb(200,200,200)"]
    assert svg.count("<polygon") == 2


def test_deterministic_and_all_layers():
    a = render_svg(full_scene(), RenderSpec(layers=LAYERS))
    b = render_svg(full_scene(), RenderSpec(layers=LAYERS))
    assert a == b
    assert groups(a) == list(LAYERS)
    assert a.count("data:image/png;base64,") == 2


def test_layer_independence():
    scene = full_scene()
    full = render_svg(scene, RenderSpec(layers=LAYERS))
    parts = full.split("\n")
    for k, name in enumerate(LAYERS):
        less = render_svg(scene, RenderSpec(layers=LAYERS[:k] + LAYERS[k + 1:]))
        assert less.split("\n") == parts[:2 + k] + parts[3 + k:]


def test_missing_artifact_and_bad_layer():
    with pytest.raises(ValueError):
        render_svg({"contours": ContourSet([], 2, 2)}, RenderSpec(layers=("mesh",)))
    with pytest.raises(ValueError):
        RenderSpec(layers=("nope",))
    with pytest.raises(ValueError):
        RenderSpec(layers=())


def test_pruned_single_node_drawn_as_circle():
    import math
    pts = [(20 + 10 * math.cos(2 * math.pi * k / 12), 20 + 10 * math.sin(2 * math.pi * k / 12))
           for k in range(12)]
    mesh = constrained_delaunay(polygon(pts, 40, 40))
    pruned = prune_skeleton(build_skeleton(mesh))
    svg = render_svg({"pruned": pruned, "mesh": mesh}, RenderSpec(layers=("skeleton-pruned",)))
    assert svg.count("<circle") == 1 and "<line" not in svg


SCENE = SceneStats(1, 0, 0.25, (0, 1), 2.0)


def test_empty_csv_is_header():
    assert emit_stats(SceneStats(0, 0, 0.0), [], "csv") == ",".join(CSV_COLUMNS) + "\n"


def test_one_particle_csv():
    p = ParticleStats(0, "grain", 2.0 / 3.0, 1.0, 0.5, 1.25, 2.5, 12.3456789, 0)
    text = emit_stats(SCENE, [p], "csv")
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 1
    assert rows[0]["area"] == "0.666667"
    assert rows[0]["orientation"] == "12.3457"
    assert rows[0]["class"] == "grain" and rows[0]["id"] == "0"


finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)
particles = st.builds(ParticleStats, st.integers(0, 10 ** 6), st.sampled_from(["grain", "binder"]),
                      finite, finite, finite, finite, finite, st.floats(0, 179.99), st.integers(0, 9))


@settings(max_examples=60, deadline=None)
@given(st.lists(particles, max_size=6, unique_by=lambda p: p.id),
       st.integers(0, 50), st.integers(0, 50), st.floats(0, 1),
       st.lists(st.integers(0, 20), max_size=8))
def test_json_round_trip(ps, g, b, f, hist):
    scene = SceneStats(g, b, f, tuple(hist), 2.0)
    doc = emit_stats(scene, ps, "json")
    s2, p2 = parse_stats_json(doc)
    assert s2 == scene
    assert p2 == sorted(ps, key=lambda p: p.id)
    json.loads(doc)


def test_unknown_format():
    with pytest.raises(ValueError):
        emit_stats(SCENE, [], "xml")
