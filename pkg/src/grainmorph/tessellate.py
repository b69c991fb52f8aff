"""Constrained Delaunay tessellation of contour sets.

Each blob (an outer contour with its holes) is triangulated on its own:

1. Bowyer-Watson insertion of the contour vertices inside a large enclosing
   triangle,
2. recovery of every contour segment by removing the triangles it crosses
   and re-triangulating the two pseudo-polygons on either side,
3. an orientation-seeded flood fill keeps the triangles to the left of the
   directed contour segments (interior of CCW outers, exterior of CW holes),
4. Lawson flips until every unconstrained edge is locally Delaunay, breaking
   cocircular ties toward the diagonal through the lowest vertex index.

No Steiner points are added, so a blob with ``n`` vertices and ``h`` holes
always yields ``n + 2h - 2`` triangles.  Predicates are exact.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .contour import ContourSet, InvalidContourSetError, validate_contour_set
from .kernels import incircle, orient2d


class _Triangulation:
    """Mutable triangulation keyed by directed edges."""

    def __init__(self, xs, ys):
        self.x = xs
        self.y = ys
        self.tri = {}
        self.edge = {}
        self.vtri = {}
        self.next_id = 0
        self.last = None

    def add(self, a, b, c):
        t = self.next_id
        self.next_id += 1
        self.tri[t] = (a, b, c)
        self.edge[(a, b)] = t
        self.edge[(b, c)] = t
        self.edge[(c, a)] = t
        self.vtri[a] = self.vtri[b] = self.vtri[c] = t
        self.last = t
        return t

    def remove(self, t):
        a, b, c = self.tri.pop(t)
        del self.edge[(a, b)], self.edge[(b, c)], self.edge[(c, a)]

    def orient(self, a, b, c):
        x, y = self.x, self.y
        return orient2d(x[a], y[a], x[b], y[b], x[c], y[c])

    def incircle(self, a, b, c, d):
        x, y = self.x, self.y
        return incircle(x[a], y[a], x[b], y[b], x[c], y[c], x[d], y[d])

    def locate(self, p):
        t = self.last if self.last in self.tri else next(iter(self.tri))
        x, y = self.x, self.y
        px, py = x[p], y[p]
        turn = 0
        for _ in range(4 * len(self.tri) + 8):
            a, b, c = self.tri[t]
            edges = ((a, b), (b, c), (c, a))
            turn = (turn + 1) % 3
            for k in range(3):
                u, v = edges[(k + turn) % 3]
                if orient2d(x[u], y[u], x[v], y[v], px, py) < 0:
                    t = self.edge[(v, u)]
                    break
            else:
                return t
        raise RuntimeError("point location did not terminate")

    def insert(self, p):
        t0 = self.locate(p)
        x, y = self.x, self.y
        for q in self.tri[t0]:
            if x[q] == x[p] and y[q] == y[p]:
                raise InvalidContourSetError(f"duplicate vertex at ({x[p]}, {y[p]})")
        cavity = {t0}
        rejected = set()
        stack = [t0]
        boundary = []
        while stack:
            t = stack.pop()
            a, b, c = self.tri[t]
            for u, v in ((a, b), (b, c), (c, a)):
                n = self.edge.get((v, u))
                if n is None or n in rejected:
                    boundary.append((u, v))
                elif n not in cavity:
                    if self.incircle(*self.tri[n], p) > 0:
                        cavity.add(n)
                        stack.append(n)
                    else:
                        rejected.add(n)
                        boundary.append((u, v))
        for t in cavity:
            self.remove(t)
        for u, v in boundary:
            self.add(u, v, p)

    def _triangle_at(self, a):
        t = self.vtri.get(a)
        if t in self.tri and a in self.tri[t]:
            return t
        for t, verts in self.tri.items():
            if a in verts:
                self.vtri[a] = t
                return t
        raise RuntimeError(f"vertex {a} is not in the triangulation")

    def insert_segment(self, a, b):
        if (a, b) in self.edge or (b, a) in self.edge:
            return
        t = self._triangle_at(a)
        for _ in range(len(self.tri) + 1):
            tv = self.tri[t]
            k = tv.index(a)
            u, w = tv[(k + 1) % 3], tv[(k + 2) % 3]
            if self.orient(a, u, b) > 0 and self.orient(a, w, b) < 0:
                break
            t = self.edge[(a, w)]
        else:
            raise RuntimeError(f"segment {a}-{b} leaves its fan")
        crossed = [t]
        left, right = [w], [u]
        while True:
            n = self.edge[(w, u)]
            crossed.append(n)
            tv = self.tri[n]
            xv = tv[(tv.index(w) + 2) % 3]
            if xv == b:
                break
            o = self.orient(a, b, xv)
            if o > 0:
                left.append(xv)
                w = xv
            elif o < 0:
                right.append(xv)
                u = xv
            else:
                raise InvalidContourSetError(
                    f"vertex {xv} lies on constraint segment {a}-{b}")
        for t in crossed:
            self.remove(t)
        self._fill(a, b, left, 1)
        self._fill(a, b, right, -1)

    def _fill(self, a, b, chain, side):
        if not chain:
            return
        best = 0
        for i in range(1, len(chain)):
            if side > 0:
                inside = self.incircle(a, b, chain[best], chain[i]) > 0
            else:
                inside = self.incircle(b, a, chain[best], chain[i]) > 0
            if inside:
                best = i
        c = chain[best]
        self._fill(a, c, chain[:best], side)
        self._fill(c, b, chain[best + 1:], side)
        if side > 0:
            self.add(a, b, c)
        else:
            self.add(b, a, c)

    def third(self, t, u, v):
        for q in self.tri[t]:
            if q != u and q != v:
                return q
        raise RuntimeError("degenerate triangle")


def _legalize(tr: _Triangulation, inside: set, constrained: set):
    """Lawson flips over interior edges; cocircular quads take the diagonal
    through their lowest vertex index."""
    stack = []
    for t in sorted(inside):
        a, b, c = tr.tri[t]
        for u, v in ((a, b), (b, c), (c, a)):
            if u < v and (u, v) not in constrained:
                stack.append((u, v))
    flips = 0
    while stack:
        u, v = stack.pop()
        if (u, v) in constrained:
            continue
        t1 = tr.edge.get((u, v))
        t2 = tr.edge.get((v, u))
        if t1 is None or t2 is None or t1 not in inside or t2 not in inside:
            continue
        c = tr.third(t1, u, v)
        d = tr.third(t2, v, u)
        s = tr.incircle(u, v, c, d)
        if s < 0 or (s == 0 and min(u, v) < min(c, d)):
            continue
        tr.remove(t1)
        tr.remove(t2)
        inside.discard(t1)
        inside.discard(t2)
        inside.add(tr.add(u, d, c))
        inside.add(tr.add(d, v, c))
        flips += 1
        for p, q in ((u, d), (d, v), (v, c), (c, u)):
            stack.append((p, q) if p < q else (q, p))
    return flips


def triangulate_polygon(points, rings):
    """CDT of one polygon-with-holes.

    ``points`` is an ``(n, 2)`` array; ``rings`` lists ``(start, count)`` index
    ranges, the first being the CCW outer boundary and the rest CW holes.
    Returns ``(triangles, constrained_pairs)`` with CCW local-index triangles.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    cx, cy = (lo + hi) / 2.0
    span = float(max(hi - lo)) + 1.0
    xs = pts[:, 0].tolist() + [cx - 64 * span, cx + 64 * span, cx]
    ys = pts[:, 1].tolist() + [cy - 64 * span, cy - 64 * span, cy + 64 * span]
    tr = _Triangulation(xs, ys)
    tr.add(n, n + 1, n + 2)
    for p in range(n):
        tr.insert(p)

    segments = []
    for start, count in rings:
        for k in range(count):
            segments.append((start + k, start + (k + 1) % count))
    constrained = set()
    for a, b in segments:
        tr.insert_segment(a, b)
        constrained.add((a, b) if a < b else (b, a))

    inside = set()
    stack = []
    for a, b in segments:
        t = tr.edge.get((a, b))
        if t is None:
            raise InvalidContourSetError(
                f"segment {a}-{b} has no triangle on its left; check contour orientation")
        if t not in inside:
            inside.add(t)
            stack.append(t)
    while stack:
        t = stack.pop()
        a, b, c = tr.tri[t]
        for u, v in ((a, b), (b, c), (c, a)):
            if (min(u, v), max(u, v)) in constrained:
                continue
            nb = tr.edge.get((v, u))
            if nb is not None and nb not in inside:
                inside.add(nb)
                stack.append(nb)
    for t in inside:
        if max(tr.tri[t]) >= n:
            raise InvalidContourSetError("interior region leaks outside the contours")

    _legalize(tr, inside, constrained)
    tris = []
    for t in inside:
        a, b, c = tr.tri[t]
        k = (a, b, c).index(min(a, b, c))
        tris.append((a, b, c)[k:] + (a, b, c)[:k])
    tris.sort()
    return tris, constrained


@dataclass(eq=False)
class TriMesh:
    """Triangles with adjacency.  Edge ``k`` of triangle ``t`` joins
    ``triangles[t, k]`` and ``triangles[t, (k + 1) % 3]``; ``neighbors[t, k]``
    is the triangle across it (-1 on the mesh boundary)."""

    vertices: np.ndarray
    triangles: np.ndarray
    neighbors: np.ndarray
    constrained: np.ndarray
    blob: np.ndarray
    width: int = 0
    height: int = 0
    blob_holes: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64).reshape(-1, 3)
        self.constrained = np.asarray(self.constrained, dtype=bool).reshape(-1, 3)
        self.blob = np.asarray(self.blob, dtype=np.int64).reshape(-1)
        if self.blob_holes is None:
            self.blob_holes = np.zeros(self.n_blobs, dtype=np.int64)

    @property
    def n_blobs(self) -> int:
        return int(self.blob.max()) + 1 if len(self.blob) else 0

    def __len__(self):
        return len(self.triangles)

    def triangle_points(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def areas(self) -> np.ndarray:
        p = self.triangle_points()
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def centroids(self) -> np.ndarray:
        return self.triangle_points().mean(axis=1)

    def internal(self) -> np.ndarray:
        """Per-edge flag: an unconstrained edge shared with another triangle."""
        return (self.neighbors >= 0) & ~self.constrained

    def edge_vertices(self, t: int, k: int):
        return int(self.triangles[t, k]), int(self.triangles[t, (k + 1) % 3])

    def shared_edge(self, t: int, n: int) -> int:
        """Index ``k`` of the edge of ``t`` that faces ``n``."""
        for k in range(3):
            if self.neighbors[t, k] == n:
                return k
        raise ValueError(f"triangles {t} and {n} are not adjacent")

    def blob_triangles(self, b: int) -> np.ndarray:
        return np.nonzero(self.blob == b)[0]

    def to_text(self) -> str:
        lines = [f"# mesh {self.width} {self.height}"]
        lines += [f"v {x:.6f} {y:.6f}" for x, y in self.vertices]
        for t, (i, j, k) in enumerate(self.triangles):
            c = self.constrained[t].astype(int)
            lines.append(f"t {i} {j} {k} {c[0]} {c[1]} {c[2]} {self.blob[t]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TriMesh":
        verts, tris, cons, blob = [], [], [], []
        width = height = 0
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if len(parts) == 4 and parts[1] == "mesh":
                    width, height = int(parts[2]), int(parts[3])
            elif parts[0] == "v":
                verts.append((float(parts[1]), float(parts[2])))
            elif parts[0] == "t":
                vals = [int(v) for v in parts[1:]]
                tris.append(vals[:3])
                cons.append([bool(v) for v in vals[3:6]])
                blob.append(vals[6])
            else:
                raise ValueError(f"unrecognised mesh record {parts[0]!r}")
        tris = np.asarray(tris, dtype=np.int64).reshape(-1, 3)
        mesh = cls(verts, tris, _neighbors(tris), cons, blob, width, height)
        mesh.blob_holes = _count_holes(mesh)
        return mesh


def _neighbors(tris: np.ndarray) -> np.ndarray:
    owner = {}
    for t, (a, b, c) in enumerate(tris.tolist()):
        owner[(a, b)] = (t, 0)
        owner[(b, c)] = (t, 1)
        owner[(c, a)] = (t, 2)
    nbr = np.full(tris.shape, -1, dtype=np.int64)
    for (a, b), (t, k) in owner.items():
        other = owner.get((b, a))
        if other is not None:
            nbr[t, k] = other[0]
    return nbr


def _count_holes(mesh: TriMesh) -> np.ndarray:
    # Euler: triangles = n + 2h - 2 per blob, n = boundary vertex count
    holes = np.zeros(mesh.n_blobs, dtype=np.int64)
    for b in range(mesh.n_blobs):
        ts = mesh.blob_triangles(b)
        nverts = len(np.unique(mesh.triangles[ts]))
        holes[b] = (len(ts) - nverts + 2) // 2
    return holes


def _blob_job(args):
    points, rings = args
    return triangulate_polygon(points, rings)


def constrained_delaunay(cs: ContourSet, workers: int = 1, validate: bool = True) -> TriMesh:
    """Constrained Delaunay tessellation of every blob in ``cs``.

    Raises :class:`InvalidContourSetError` for self-intersecting or crossing
    contours.  Contours of different blobs may share edges (refined contours
    do), since blobs are tessellated independently.
    """
    if validate:
        problems = validate_contour_set(cs, strict=False)
        if problems:
            raise InvalidContourSetError("invalid contour set: " + "; ".join(problems[:10]))
    jobs = []
    for outer, holes in cs.blobs():
        ring_pts = [cs[outer].points] + [cs[h].points for h in holes]
        rings, start = [], 0
        for p in ring_pts:
            rings.append((start, len(p)))
            start += len(p)
        jobs.append((np.vstack(ring_pts), rings))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_blob_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        results = [_blob_job(j) for j in jobs]

    verts, tris, cons, blob_ids, holes = [], [], [], [], []
    offset = 0
    for b, ((points, rings), (ltris, constrained)) in enumerate(zip(jobs, results)):
        lt = np.asarray(ltris, dtype=np.int64).reshape(-1, 3)
        flags = np.zeros(lt.shape, dtype=bool)
        for t, tri in enumerate(ltris):
            for k in range(3):
                u, v = tri[k], tri[(k + 1) % 3]
                flags[t, k] = (min(u, v), max(u, v)) in constrained
        verts.append(points)
        tris.append(lt + offset)
        cons.append(flags)
        blob_ids.append(np.full(len(lt), b, dtype=np.int64))
        holes.append(len(rings) - 1)
        offset += len(points)
    if not jobs:
        return TriMesh(np.zeros((0, 2)), np.zeros((0, 3)), np.zeros((0, 3)),
                       np.zeros((0, 3), dtype=bool), np.zeros(0), cs.width, cs.height,
                       np.zeros(0, dtype=np.int64))
    all_tris = np.vstack(tris)
    return TriMesh(np.vstack(verts), all_tris, _neighbors(all_tris), np.vstack(cons),
                   np.concatenate(blob_ids), cs.width, cs.height,
                   np.asarray(holes, dtype=np.int64))


def check_locally_delaunay(mesh: TriMesh):
    """Unconstrained interior edges that break the Delaunay condition, as
    sorted ``(u, v)`` vertex pairs.

    An edge fails when the vertex opposite it in the neighbouring triangle
    lies strictly inside the circumcircle, or lies on it while the other
    diagonal of the quad is the canonical one (the diagonal through the
    quad's lowest vertex index).
    """
    bad = []
    v = mesh.vertices.tolist()
    tris = mesh.triangles.tolist()
    nbr = mesh.neighbors.tolist()
    cons = mesh.constrained.tolist()
    for t in range(len(tris)):
        for k in range(3):
            n = nbr[t][k]
            if n < 0 or n < t or cons[t][k]:
                continue
            a, b, c = tris[t]
            u, w = tris[t][k], tris[t][(k + 1) % 3]
            opp = next(q for q in tris[t] if q != u and q != w)
            d = next(q for q in tris[n] if q != u and q != w)
            s = incircle(*v[a], *v[b], *v[c], *v[d])
            if s > 0 or (s == 0 and min(opp, d) < min(u, w)):
                bad.append((min(u, w), max(u, w)))
    return bad
