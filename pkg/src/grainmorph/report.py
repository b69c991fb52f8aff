"""SVG overlays and statistics files."""
from __future__ import annotations

import base64
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .morphology import ParticleStats, SceneStats

LAYERS = ("image", "mask", "contours", "mesh", "grey-triangles",
          "skeleton-unpruned", "skeleton-pruned")

DEFAULT_PALETTE = {
    "outer": "#d62728",
    "hole": "#1f77b4",
    "mesh": "#2ca02c",
    "skeleton-unpruned": "#ff7f0e",
    "skeleton-pruned": "#9467bd",
}

CSV_COLUMNS = ("id", "class", "area", "length", "width", "cx", "cy", "orientation", "holes")


@dataclass(frozen=True)
class RenderSpec:
    layers: tuple = ("image", "contours", "skeleton-pruned")
    stroke_width: float = 0.08
    node_radius: float = 0.25
    scale: float = 4.0
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("at least one layer must be selected")
        unknown = [name for name in layers if name not in LAYERS]
        if unknown:
            raise ValueError(f"unknown layers {unknown}; choose from {', '.join(LAYERS)}")
        object.__setattr__(self, "layers", layers)


def _f(v) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _png_data_uri(pixels: np.ndarray) -> str:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


def _closed_path(points) -> str:
    pts = list(points)
    head = f"M {_f(pts[0][0])} {_f(pts[0][1])}"
    rest = " ".join(f"L {_f(x)} {_f(y)}" for x, y in pts[1:])
    return f"{head} {rest} Z" if rest else f"{head} Z"


def _image_layer(name, pixels, width, height, opacity=1.0):
    return (f'<g id="{name}"><image x="0" y="0" width="{width}" height="{height}" '
            f'opacity="{opacity}" preserveAspectRatio="none" '
            f'xlink:href="{_png_data_uri(pixels)}"/></g>')


def _skeleton_layer(name, skel, colour, spec):
    parts = [f'<g id="{name}" stroke="{colour}" stroke-width="{spec.stroke_width}" '
             f'fill="{colour}">']
    nodes = skel.nodes
    for a, b, _ in skel.segments:
        (x0, y0), (x1, y1) = nodes[a], nodes[b]
        parts.append(f'<line x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x1)}" y2="{_f(y1)}"/>')
    touched = np.zeros(len(nodes), dtype=bool)
    touched[skel.segments[:, :2].ravel()] = True
    for k in np.nonzero(~touched)[0]:
        x, y = nodes[k]
        parts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{_f(spec.node_radius)}"/>')
    parts.append("</g>")
    return "".join(parts)


def render_svg(scene: dict, spec: RenderSpec = RenderSpec()) -> str:
    """Layered SVG of pipeline artifacts in image coordinates.

    ``scene`` may hold ``image`` (GreyImage), ``mask`` (BinaryImage),
    ``contours`` (ContourSet), ``mesh`` (TriMesh), ``grey`` (GreyMesh),
    ``skeleton`` and ``pruned`` (CatSkeleton).  Every selected layer needs
    its artifact.  Output is deterministic for identical inputs.
    """
    needs = {"image": "image", "mask": "mask", "contours": "contours", "mesh": "mesh",
             "grey-triangles": "grey", "skeleton-unpruned": "skeleton",
             "skeleton-pruned": "pruned"}
    missing = [name for name in spec.layers if scene.get(needs[name]) is None]
    if missing:
        raise ValueError(f"no artifact for layers {missing}")
    width = height = None
    for key in ("image", "mask"):
        if scene.get(key) is not None:
            width, height = scene[key].width, scene[key].height
            break
    if width is None:
        for key in ("contours", "mesh"):
            obj = scene.get(key)
            if obj is not None and getattr(obj, "width", 0):
                width, height = obj.width, obj.height
                break
    if width is None and scene.get("grey") is not None:
        width, height = scene["grey"].mesh.width, scene["grey"].mesh.height
    if not width:
        raise ValueError("cannot determine the image frame")
    pal = spec.palette
    sw = spec.stroke_width
    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
           f'version="1.1" width="{_f(width * spec.scale)}" height="{_f(height * spec.scale)}" '
           f'viewBox="0 0 {width} {height}">']
    for name in spec.layers:
        if name == "image":
            out.append(_image_layer(name, scene["image"].pixels, width, height))
        elif name == "mask":
            mask = np.where(scene["mask"].mask, 255, 0).astype(np.uint8)
            out.append(_image_layer(name, mask, width, height, 0.5))
        elif name == "contours":
            parts = [f'<g id="contours" fill="none" stroke-width="{sw}">']
            for c in scene["contours"]:
                parts.append(f'<path class="{c.kind}" stroke="{pal[c.kind]}" '
                             f'd="{_closed_path(c.points)}"/>')
            parts.append("</g>")
            out.append("".join(parts))
        elif name == "mesh":
            mesh = scene["mesh"]
            parts = [f'<g id="mesh" fill="none" stroke="{pal["mesh"]}" stroke-width="{sw / 2}">']
            for p in mesh.triangle_points():
                parts.append('<polygon points="' + " ".join(f"{_f(x)},{_f(y)}" for x, y in p)
                             + '"/>')
            parts.append("</g>")
            out.append("".join(parts))
        elif name == "grey-triangles":
            gm = scene["grey"]
            parts = ['<g id="grey-triangles" stroke="none">']
            for p, g in zip(gm.mesh.triangle_points(), gm.grey):
                v = int(np.clip(np.rint(g), 0, 255))
                parts.append('<polygon points="' + " ".join(f"{_f(x)},{_f(y)}" for x, y in p)
                             + f'" fill="rgb({v},{v},{v})"/>')
            parts.append("</g>")
            out.append("".join(parts))
        elif name == "skeleton-unpruned":
            out.append(_skeleton_layer(name, scene["skeleton"], pal[name], spec))
        else:
            out.append(_skeleton_layer(name, scene["pruned"], pal[name], spec))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _g6(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.6g}"


def emit_stats(scene: SceneStats, particles, fmt: str = "csv") -> str:
    """Statistics document.

    ``csv`` holds one row per particle with columns
    ``id,class,area,length,width,cx,cy,orientation,holes`` (six significant
    digits).  ``json`` holds ``{"scene": ..., "particles": [...]}`` at full
    precision so that :func:`parse_stats_json` restores it exactly.
    """
    particles = sorted(particles, key=lambda p: p.id)
    if fmt == "csv":
        lines = [",".join(CSV_COLUMNS)]
        for p in particles:
            d = p.as_dict()
            lines.append(",".join(d[c] if c == "class" else _g6(d[c]) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"
    if fmt == "json":
        doc = {"scene": scene.as_dict(), "particles": [p.as_dict() for p in particles]}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown statistics format {fmt!r}")


def parse_stats_json(text: str):
    doc = json.loads(text)
    return (SceneStats.from_dict(doc["scene"]),
            [ParticleStats.from_dict(p) for p in doc["particles"]])
