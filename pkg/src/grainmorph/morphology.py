"""Grey-attributed meshes, grain separation and particle statistics."""
from __future__ import annotations

import math
import warnings
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .cat import CatSkeleton, chain_decompose, classify_triangles
from .contour import ContourSet, assemble
from .geometry import shoelace, winding_number
from .raster import GreyImage
from .segmentation import BINDER_BAND, SpectralBand
from .tessellate import TriMesh, constrained_delaunay

FLUCTUATION_MODES = ("range", "max-step")


class SeparationIncompleteWarning(UserWarning):
    """Cuts were still pending when the pass limit was reached."""


@dataclass(eq=False)
class GreyMesh:
    mesh: TriMesh
    grey: np.ndarray
    image: GreyImage = None

    def blob_mean(self, b: int) -> float:
        """Area-weighted mean grey of blob ``b``."""
        ts = self.mesh.blob_triangles(b)
        a = self.mesh.areas()[ts]
        return float(np.dot(a, self.grey[ts]) / a.sum())


@dataclass(frozen=True)
class SeparationConfig:
    threshold: float = 30.0
    max_passes: int = 8
    fluctuation: str = "range"
    workers: int = 1

    def __post_init__(self):
        if not 0 <= self.threshold <= 255:
            raise ValueError(f"cut threshold must lie in [0, 255], got {self.threshold}")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")
        if self.fluctuation not in FLUCTUATION_MODES:
            raise ValueError(f"unknown fluctuation mode {self.fluctuation!r}")


def triangle_mean_grey(mesh: TriMesh, img: GreyImage) -> GreyMesh:
    """Mean grey of the pixel centres inside each triangle.

    A centre on a shared edge counts for the lower-numbered triangle.
    Triangles that contain no centre take the grey of the pixel holding
    their centroid (clamped to the image).
    """
    pix = img.pixels
    if len(mesh) == 0:
        return GreyMesh(mesh, np.zeros(0), img)
    sums, counts = kernels.triangle_pixel_stats(np.ascontiguousarray(mesh.triangle_points()), pix)
    grey = np.empty(len(mesh))
    has = counts > 0
    grey[has] = sums[has] / counts[has]
    cen = mesh.centroids()[~has]
    i = np.clip(np.floor(cen[:, 0]).astype(np.int64), 0, pix.shape[1] - 1)
    j = np.clip(np.floor(cen[:, 1]).astype(np.int64), 0, pix.shape[0] - 1)
    grey[~has] = pix[j, i]
    return GreyMesh(mesh, grey, img)


def _chain_sequence(c):
    """Triangles along a complex, bounding junctions included, so that
    ``c.chords[i]`` separates ``seq[i]`` and ``seq[i + 1]``."""
    if c.kind == "torso":
        return [c.ends[0], *c.triangles, c.ends[1]]
    if c.kind == "limb":
        return [c.ends[0], *c.triangles]
    if c.cyclic:
        return [*c.triangles, c.triangles[0]]
    return list(c.triangles)


def fluctuation(values, mode: str = "range") -> float:
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 0:
        return 0.0
    if mode == "range":
        return float(v.max() - v.min())
    if mode == "max-step":
        return float(np.abs(np.diff(v)).max()) if len(v) > 1 else 0.0
    raise ValueError(f"unknown fluctuation mode {mode!r}")


def torso_fluctuation(complex_, gm: GreyMesh, mode: str = "range") -> float:
    """Grey spread over a complex's triangles and its bounding junctions."""
    return fluctuation(gm.grey[_chain_sequence(complex_)], mode)


def _plan_cuts(mesh: TriMesh, complexes, grey, cfg: SeparationConfig):
    """Chords to cut, as ``(blob, chord)``; each one splits its component."""
    internal = mesh.internal()
    nbrs = mesh.neighbors
    tris = mesh.triangles
    cut = set()
    accepted = []

    def crossable(t, k):
        if not internal[t, k]:
            return False
        u, v = tris[t, k], tris[t, (k + 1) % 3]
        return ((u, v) if u < v else (v, u)) not in cut

    for c in complexes:
        if c.kind not in ("torso", "free") or not c.chords:
            continue
        seq = _chain_sequence(c)
        g = grey[seq]
        if fluctuation(g, cfg.fluctuation) < cfg.threshold:
            continue
        i = int(np.argmax(np.abs(np.diff(g))))
        a, b = seq[i], seq[i + 1]
        chord = tuple(int(q) for q in c.chords[i])
        if chord in cut:
            continue
        cut.add(chord)
        # keep the cut only if it disconnects a from b
        seen = {a}
        queue = deque([a])
        joined = False
        while queue and not joined:
            t = queue.popleft()
            for k in range(3):
                if crossable(t, k):
                    n = int(nbrs[t, k])
                    if n == b:
                        joined = True
                        break
                    if n not in seen:
                        seen.add(n)
                        queue.append(n)
        if joined:
            cut.discard(chord)
        else:
            accepted.append((c.blob, chord))
    return accepted


def _component_loops(mesh: TriMesh, blob: int, cut: set):
    """Boundary loops ``[(outer, [holes...]), ...]`` of the pieces of ``blob``
    left after removing the ``cut`` chords."""
    tris = mesh.triangles
    nbrs = mesh.neighbors
    internal = mesh.internal()
    ids = mesh.blob_triangles(blob).tolist()

    def is_boundary(t, k):
        if not internal[t, k]:
            return True
        u, v = tris[t, k], tris[t, (k + 1) % 3]
        return ((u, v) if u < v else (v, u)) in cut

    comp = {}
    ncomp = 0
    for t0 in ids:
        if t0 in comp:
            continue
        comp[t0] = ncomp
        stack = [t0]
        while stack:
            t = stack.pop()
            for k in range(3):
                if not is_boundary(t, k):
                    n = int(nbrs[t, k])
                    if n not in comp:
                        comp[n] = ncomp
                        stack.append(n)
        ncomp += 1

    visited = set()
    loops = [[] for _ in range(ncomp)]
    for t0 in ids:
        for k0 in range(3):
            if (t0, k0) in visited or not is_boundary(t0, k0):
                continue
            verts = []
            t, k = t0, k0
            while (t, k) not in visited:
                visited.add((t, k))
                verts.append(int(tris[t, k]))
                # rotate about the edge's end vertex to the next boundary edge
                kk = (k + 1) % 3
                while not is_boundary(t, kk):
                    n = int(nbrs[t, kk])
                    k2 = mesh.shared_edge(n, t)
                    t, kk = n, (k2 + 1) % 3
                k = kk
            loops[comp[t0]].append(mesh.vertices[verts])
    out = []
    for group in loops:
        outers = [p for p in group if shoelace(p) > 0]
        holes = [p for p in group if shoelace(p) < 0]
        if len(outers) != 1:
            raise RuntimeError(f"piece has {len(outers)} outer boundaries")
        out.append((outers[0], holes))
    return out


def _analyse_piece(piece, image: GreyImage, cfg: SeparationConfig):
    cs = assemble([piece], image.width, image.height)
    mesh = constrained_delaunay(cs, validate=False)
    complexes = chain_decompose(mesh, classify_triangles(mesh))
    gm = triangle_mean_grey(mesh, image)
    cuts = _plan_cuts(mesh, complexes, gm.grey, cfg)
    if not cuts:
        return None
    return _component_loops(mesh, 0, {c for _, c in cuts})


def separate_grains(gm: GreyMesh, skel: CatSkeleton,
                    cfg: SeparationConfig = SeparationConfig()) -> ContourSet:
    """Cut blobs across chords where the grey level jumps.

    Every torso or free complex whose grey fluctuation reaches the threshold
    is cut at the chord with the largest grey step along it.  Pieces that
    were cut are re-tessellated and examined again, up to ``max_passes``
    passes in total.  Without any cut the input contours come back unchanged.
    """
    mesh = gm.mesh
    image = gm.image
    cuts = _plan_cuts(mesh, skel.complexes, gm.grey, cfg)
    by_blob = {}
    for b, chord in cuts:
        by_blob.setdefault(b, set()).add(chord)
    final = []
    pending = []
    for b in range(mesh.n_blobs):
        pieces = _component_loops(mesh, b, by_blob.get(b, set()))
        (pending if b in by_blob else final).extend(pieces)

    executor = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None

    def analyse(pieces):
        if executor is not None:
            return list(executor.map(_analyse_piece, pieces, [image] * len(pieces),
                                     [cfg] * len(pieces)))
        return [_analyse_piece(p, image, cfg) for p in pieces]

    try:
        # pass 1 used the given mesh; later passes re-tessellate cut pieces
        for _ in range(cfg.max_passes - 1):
            if not pending:
                break
            nxt = []
            for piece, res in zip(pending, analyse(pending)):
                if res is None:
                    final.append(piece)
                else:
                    nxt.extend(res)
            pending = nxt
        unfinished = [p for p, res in zip(pending, analyse(pending)) if res is not None]
    finally:
        if executor is not None:
            executor.shutdown()
    final.extend(pending)
    if unfinished:
        warnings.warn(f"grain separation stopped after {cfg.max_passes} passes with "
                      f"{len(unfinished)} pieces still to cut", SeparationIncompleteWarning,
                      stacklevel=2)
    return assemble(final, mesh.width, mesh.height)


def remove_holes(cs: ContourSet, classes) -> ContourSet:
    """Drop the holes of grain-class blobs.

    ``classes`` lists ``"grain"`` or ``"binder"`` per blob, in blob order.
    A hole that encloses another contour of the set is kept so that blobs
    never overlap.
    """
    blobs = cs.blobs()
    if len(classes) != len(blobs):
        raise ValueError(f"expected {len(blobs)} classes, got {len(classes)}")
    outers = [cs[k] for k, _ in blobs]
    starts = np.array([o.points[0] for o in outers]) if outers else np.zeros((0, 2))
    loops = []
    for (k, holes), cls in zip(blobs, classes):
        keep = []
        for h in holes:
            pts = cs[h].points
            if cls == "grain":
                lo, hi = pts.min(axis=0), pts.max(axis=0)
                inside = np.nonzero(np.all((starts > lo) & (starts < hi), axis=1))[0]
                if not any(winding_number(*starts[m], pts) != 0 for m in inside):
                    continue
            keep.append(pts)
        loops.append((cs[k].points, keep))
    return assemble(loops, cs.width, cs.height)


@dataclass(frozen=True)
class ParticleStats:
    id: int
    category: str
    area: float
    length: float
    width: float
    cx: float
    cy: float
    orientation: float
    holes: int

    def as_dict(self) -> dict:
        d = asdict(self)
        d["class"] = d.pop("category")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ParticleStats":
        d = dict(d)
        d["category"] = d.pop("class")
        return cls(**d)


def _second_moments(pts: np.ndarray, areas: np.ndarray, centre):
    p = pts - centre
    x, y = p[..., 0], p[..., 1]
    sxx = (x ** 2).sum(axis=1) + x[:, 0] * x[:, 1] + x[:, 1] * x[:, 2] + x[:, 2] * x[:, 0]
    syy = (y ** 2).sum(axis=1) + y[:, 0] * y[:, 1] + y[:, 1] * y[:, 2] + y[:, 2] * y[:, 0]
    sxy = (2 * (x * y).sum(axis=1) + x[:, 0] * y[:, 1] + x[:, 1] * y[:, 0]
           + x[:, 0] * y[:, 2] + x[:, 2] * y[:, 0] + x[:, 1] * y[:, 2] + x[:, 2] * y[:, 1])
    return (float(np.dot(areas, sxx)) / 6.0, float(np.dot(areas, syy)) / 6.0,
            float(np.dot(areas, sxy)) / 12.0)


def orientation_degrees(mxx: float, myy: float, mxy: float, rtol: float = 1e-12) -> float:
    """Principal-axis angle in ``[0, 180)``; 0 for an isotropic tensor.

    Angles follow the image frame (``y`` down), so they run clockwise on
    screen from the ``+x`` axis.
    """
    scale = abs(mxx) + abs(myy)
    if abs(mxx - myy) <= rtol * scale and abs(mxy) <= rtol * scale:
        return 0.0
    ang = math.degrees(0.5 * math.atan2(2.0 * mxy, mxx - myy)) % 180.0
    return 0.0 if ang >= 180.0 else ang


def _boundary_segments(mesh: TriMesh, tri_ids) -> np.ndarray:
    t = mesh.triangles[tri_ids]
    bnd = ~mesh.internal()[tri_ids]
    a = t[bnd]
    b = np.roll(t, -1, axis=1)[bnd]
    return np.hstack([mesh.vertices[a], mesh.vertices[b]])


def longest_chord(q, segments: np.ndarray, max_directions: int = 2048) -> float:
    """Length of the longest chord through ``q`` among directions aimed at
    the boundary vertices."""
    q = np.asarray(q, dtype=np.float64)
    p = segments[:, :2]
    e = segments[:, 2:] - p
    d = p - q
    norm = np.hypot(d[:, 0], d[:, 1])
    dirs = d[norm > 0] / norm[norm > 0, None]
    if len(dirs) > max_directions:
        ang = np.linspace(0.0, np.pi, max_directions, endpoint=False)
        dirs = np.column_stack([np.cos(ang), np.sin(ang)])
    best = 0.0
    for chunk in np.array_split(dirs, max(1, len(dirs) // 256)):
        den = chunk[:, None, 0] * e[None, :, 1] - chunk[:, None, 1] * e[None, :, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (d[None, :, 0] * e[None, :, 1] - d[None, :, 1] * e[None, :, 0]) / den
            s = (d[None, :, 0] * chunk[:, None, 1] - d[None, :, 1] * chunk[:, None, 0]) / den
        ok = (den != 0) & (s >= 0) & (s <= 1)
        fwd = np.where(ok & (t > 0), t, np.inf).min(axis=1)
        back = np.where(ok & (t < 0), -t, np.inf).min(axis=1)
        chord = fwd + back
        chord = chord[np.isfinite(chord)]
        if len(chord):
            best = max(best, float(chord.max()))
    return best


def particle_statistics(mesh: TriMesh, skel: CatSkeleton, category: str,
                        blob: int = 0, pid: int = 0) -> ParticleStats:
    """Shape measurements of blob ``blob`` from its mesh and pruned skeleton.

    ``width`` is the mean thickness ``area / length`` (capped at ``length``).
    A blob whose skeleton collapsed to one node takes as length the longest
    chord through that node and as width ``4 area / (pi length)``.
    """
    ts = mesh.blob_triangles(blob)
    pts = mesh.vertices[mesh.triangles[ts]]
    areas = mesh.areas()[ts]
    area = float(areas.sum())
    cen = (areas[:, None] * pts.mean(axis=1)).sum(axis=0) / area
    mxx, myy, mxy = _second_moments(pts, areas, cen)
    length = skel.blob_length(blob)
    if length > 0:
        width = min(area / length, length)
    else:
        node = skel.nodes[skel.blob_nodes(blob)[0]]
        length = longest_chord(node, _boundary_segments(mesh, ts))
        width = min(4.0 * area / (math.pi * length), length) if length > 0 else 0.0
    return ParticleStats(pid, category, area, float(length), float(width), float(cen[0]),
                         float(cen[1]), orientation_degrees(mxx, myy, mxy),
                         int(mesh.blob_holes[blob]))


def classify_blobs(gm: GreyMesh, band: SpectralBand = BINDER_BAND):
    """``"grain"`` when a blob's mean grey lies outside the binder band."""
    return ["binder" if band.low <= gm.blob_mean(b) <= band.high else "grain"
            for b in range(gm.mesh.n_blobs)]


@dataclass(frozen=True)
class SceneStats:
    grain_count: int
    binder_count: int
    grain_area_fraction: float
    histogram: tuple = ()
    bin_width: float = 2.0

    def as_dict(self) -> dict:
        d = asdict(self)
        d["histogram"] = list(self.histogram)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneStats":
        d = dict(d)
        d["histogram"] = tuple(d.get("histogram", ()))
        return cls(**d)


def equivalent_diameter(area: float) -> float:
    return 2.0 * math.sqrt(area / math.pi)


def scene_statistics(particles, image: GreyImage, bin_width: float = 2.0) -> SceneStats:
    """Counts, grain area fraction and an equivalent-diameter histogram of
    the grains (bin ``k`` covers ``[k*bin_width, (k+1)*bin_width)``)."""
    grains = [p for p in particles if p.category == "grain"]
    binder = [p for p in particles if p.category == "binder"]
    total = float(image.width * image.height)
    fraction = sum(p.area for p in grains) / total
    counts = []
    for p in grains:
        k = int(equivalent_diameter(p.area) // bin_width)
        if k >= len(counts):
            counts.extend([0] * (k + 1 - len(counts)))
        counts[k] += 1
    return SceneStats(len(grains), len(binder), fraction, tuple(counts), bin_width)
