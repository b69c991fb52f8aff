"""Chordal axis transform of a triangulated blob.

Triangles are classified by their number of internal (unconstrained, shared)
edges.  The skeleton joins the midpoints of internal edges ("chords") across
sleeves, meets at junction centroids and runs out to the apex of each
termination.  Maximal runs of sleeves between junctions/terminations form
chain complexes:

* ``limb``  junction ... termination
* ``torso`` junction ... junction (possibly with no sleeves in between)
* ``free``  termination ... termination, a lone isolated triangle, or a
  closed ring of sleeves around a hole

Junction triangles belong to no complex; they are recorded as end markers.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from .tessellate import TriMesh


class TriangleClass(IntEnum):
    ISOLATED = 0
    TERMINATION = 1
    SLEEVE = 2
    JUNCTION = 3


def classify_triangles(mesh: TriMesh) -> np.ndarray:
    """Per-triangle :class:`TriangleClass` value (its internal-edge count)."""
    return mesh.internal().sum(axis=1).astype(np.int8)


@dataclass(frozen=True)
class ChainComplex:
    kind: str
    triangles: tuple
    ends: tuple          # bounding triangle ids, -1 when there is none
    blob: int
    chords: tuple = ()   # crossed internal edges in walk order, as vertex pairs
    cyclic: bool = False

    def key(self):
        return min(self.triangles + tuple(e for e in self.ends if e >= 0))


def _chord(mesh, t, k):
    u, v = mesh.edge_vertices(t, k)
    return (u, v) if u < v else (v, u)


def _walk(mesh, classes, internal, prev, cur):
    """Follow sleeves from ``prev`` into ``cur``; return (triangles, chords, stop)."""
    tris = []
    chords = [_chord(mesh, prev, mesh.shared_edge(prev, cur))]
    start = prev
    while classes[cur] == TriangleClass.SLEEVE:
        tris.append(cur)
        nxt = None
        for k in range(3):
            n = mesh.neighbors[cur, k]
            if internal[cur, k] and n != prev:
                nxt = int(n)
                break
        chords.append(_chord(mesh, cur, mesh.shared_edge(cur, nxt)))
        prev, cur = cur, nxt
        if cur == start and classes[cur] == TriangleClass.SLEEVE:
            return tris, chords, None
    return tris, chords, cur


def chain_decompose(mesh: TriMesh, classes=None) -> list:
    """Split the triangles of every blob into limb, torso and free complexes."""
    if classes is None:
        classes = classify_triangles(mesh)
    internal = mesh.internal()
    used = np.zeros(len(mesh), dtype=bool)
    out = []
    seen = set()
    for j in np.nonzero(classes == TriangleClass.JUNCTION)[0].tolist():
        for k in range(3):
            n = int(mesh.neighbors[j, k])
            tris, chords, stop = _walk(mesh, classes, internal, j, n)
            if classes[stop] == TriangleClass.TERMINATION:
                out.append(ChainComplex("limb", tuple(tris) + (stop,), (j, stop),
                                        int(mesh.blob[j]), tuple(chords)))
                used[tris] = True
                used[stop] = True
            else:
                key = (min(chords[0], chords[-1]), max(chords[0], chords[-1]))
                if key in seen:
                    continue
                seen.add(key)
                out.append(ChainComplex("torso", tuple(tris), (j, stop),
                                        int(mesh.blob[j]), tuple(chords)))
                used[tris] = True
    for t in range(len(mesh)):
        if used[t] or classes[t] == TriangleClass.JUNCTION:
            continue
        c = classes[t]
        if c == TriangleClass.ISOLATED:
            out.append(ChainComplex("free", (t,), (t, t), int(mesh.blob[t])))
            used[t] = True
        elif c == TriangleClass.TERMINATION:
            k = int(np.nonzero(internal[t])[0][0])
            tris, chords, stop = _walk(mesh, classes, internal, t, int(mesh.neighbors[t, k]))
            out.append(ChainComplex("free", (t,) + tuple(tris) + (stop,), (t, stop),
                                    int(mesh.blob[t]), tuple(chords)))
            used[[t, stop] + tris] = True
    for t in range(len(mesh)):
        if used[t] or classes[t] != TriangleClass.SLEEVE:
            continue
        # a ring of sleeves around a hole, no junction anywhere
        k = int(np.nonzero(internal[t])[0][0])
        n = int(mesh.neighbors[t, k])
        tris, chords, _ = _walk(mesh, classes, internal, t, n)
        ring = [t] + tris
        out.append(ChainComplex("free", tuple(ring), (-1, -1), int(mesh.blob[t]),
                                tuple(chords), cyclic=True))
        used[ring] = True
    out.sort(key=lambda c: c.blob)
    return out


@dataclass(eq=False)
class CatSkeleton:
    """Skeleton graph with per-node local widths.

    ``segments`` rows are ``(a, b, complex)`` indices into ``nodes`` and
    ``complexes``.  ``parent`` gives the hierarchy (-1 for each blob root)
    and ``retained`` marks the complexes kept by pruning.
    """

    nodes: np.ndarray
    widths: np.ndarray
    segments: np.ndarray
    node_blob: np.ndarray
    complexes: list = field(default_factory=list)
    parent: np.ndarray = None
    significance: np.ndarray = None
    retained: np.ndarray = None
    n_blobs: int = 0

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=np.float64).reshape(-1, 2)
        self.widths = np.asarray(self.widths, dtype=np.float64).reshape(-1)
        self.segments = np.asarray(self.segments, dtype=np.int64).reshape(-1, 3)
        self.node_blob = np.asarray(self.node_blob, dtype=np.int64).reshape(-1)
        nc = len(self.complexes)
        if self.parent is None:
            self.parent = np.full(nc, -1, dtype=np.int64)
        if self.significance is None:
            self.significance = np.full(nc, np.inf)
        if self.retained is None:
            self.retained = np.ones(nc, dtype=bool)

    def children(self, c: int):
        return [int(k) for k in np.nonzero(self.parent == c)[0]]

    def roots(self):
        return [int(k) for k in np.nonzero(self.parent < 0)[0]]

    def segment_lengths(self) -> np.ndarray:
        a = self.nodes[self.segments[:, 0]]
        b = self.nodes[self.segments[:, 1]]
        return np.hypot(*(b - a).T)

    def blob_length(self, b: int) -> float:
        sel = self.node_blob[self.segments[:, 0]] == b
        return float(self.segment_lengths()[sel].sum())

    def blob_nodes(self, b: int) -> np.ndarray:
        return np.nonzero(self.node_blob == b)[0]

    def to_text(self) -> str:
        lines = ["# skeleton"]
        lines += [f"n {x:.6f} {y:.6f} {w:.6f}" for (x, y), w in zip(self.nodes, self.widths)]
        lines += [f"s {a} {b} {c}" for a, b, c in self.segments]
        for b in range(self.n_blobs):
            idx = self.blob_nodes(b)
            if len(idx):
                lines.append(f"g {b} {idx.min()} {len(idx)}")
        for k, c in enumerate(self.complexes):
            lines.append(f"c {k} {c.kind} {c.blob} {int(self.retained[k])} {self.parent[k]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CatSkeleton":
        """Parse :meth:`to_text` output.  Complex records keep their kind,
        blob, hierarchy and pruning state but not their triangles."""
        nodes, widths, segs, groups, comps = [], [], [], [], []
        for line in text.splitlines():
            p = line.split()
            if not p or p[0] == "#":
                continue
            if p[0] == "n":
                nodes.append((float(p[1]), float(p[2])))
                widths.append(float(p[3]))
            elif p[0] == "s":
                segs.append(tuple(int(v) for v in p[1:4]))
            elif p[0] == "g":
                groups.append(tuple(int(v) for v in p[1:4]))
            elif p[0] == "c":
                comps.append((p[2], int(p[3]), bool(int(p[4])), int(p[5])))
            else:
                raise ValueError(f"unrecognised skeleton record {p[0]!r}")
        node_blob = np.full(len(nodes), -1, dtype=np.int64)
        for b, first, count in groups:
            node_blob[first:first + count] = b
        complexes = [ChainComplex(kind, (), (-1, -1), blob) for kind, blob, _, _ in comps]
        n_blobs = max([g[0] + 1 for g in groups] + [c.blob + 1 for c in complexes] + [0])
        return cls(nodes, widths, segs, node_blob, complexes,
                   np.array([c[3] for c in comps], dtype=np.int64),
                   None, np.array([c[2] for c in comps], dtype=bool), n_blobs)


class _NodeTable:
    def __init__(self):
        self.index = {}
        self.points = []
        self.widths = []
        self.blobs = []

    def get(self, key, point, width, blob):
        k = self.index.get(key)
        if k is None:
            k = len(self.points)
            self.index[key] = k
            self.points.append(point)
            self.widths.append(width)
            self.blobs.append(blob)
        return k


def _hierarchy(complexes, n_blobs):
    """Per blob BFS tree over complexes sharing a junction."""
    by_junction = {}
    for k, c in enumerate(complexes):
        if c.kind in ("limb", "torso"):
            for j in set(c.ends) if c.kind == "torso" else (c.ends[0],):
                by_junction.setdefault(j, []).append(k)
    parent = np.full(len(complexes), -1, dtype=np.int64)
    by_blob = {}
    for k, c in enumerate(complexes):
        by_blob.setdefault(c.blob, []).append(k)
    roots = {}
    for b, members in by_blob.items():
        torsos = [k for k in members if complexes[k].kind == "torso"]
        pool = torsos or members
        root = min(pool, key=lambda k: (-len(complexes[k].triangles), complexes[k].key()))
        roots[b] = root
        seen = {root}
        queue = deque([root])
        while queue:
            k = queue.popleft()
            c = complexes[k]
            juncs = [] if c.kind == "free" else sorted(set(c.ends if c.kind == "torso" else c.ends[:1]))
            nbrs = sorted({m for j in juncs for m in by_junction[j] if m not in seen},
                          key=lambda m: complexes[m].key())
            for m in nbrs:
                seen.add(m)
                parent[m] = k
                queue.append(m)
    return parent, roots


def _cycle_torsos(complexes):
    """Torsos that are not bridges of the junction multigraph."""
    adj = {}
    for k, c in enumerate(complexes):
        if c.kind == "torso":
            a, b = c.ends
            adj.setdefault(a, []).append((b, k))
            adj.setdefault(b, []).append((a, k))
    disc, low = {}, {}
    bridges = set()
    counter = 0
    for root in sorted(adj):
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        stack = [(root, -1, iter(adj[root]))]
        while stack:
            v, via, it = stack[-1]
            advanced = False
            for w, e in it:
                if e == via:
                    continue
                if w in disc:
                    low[v] = min(low[v], disc[w])
                else:
                    disc[w] = low[w] = counter
                    counter += 1
                    stack.append((w, e, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                if stack:
                    u = stack[-1][0]
                    low[u] = min(low[u], low[v])
                    if low[v] > disc[u]:
                        bridges.add(via)
    return {k for k, c in enumerate(complexes) if c.kind == "torso" and k not in bridges}


def build_skeleton(mesh: TriMesh, classes=None, complexes=None) -> CatSkeleton:
    """Unpruned chordal axis skeleton of ``mesh``."""
    if classes is None:
        classes = classify_triangles(mesh)
    if complexes is None:
        complexes = chain_decompose(mesh, classes)
    v = mesh.vertices
    tris = mesh.triangles
    table = _NodeTable()

    def chord_len(ch):
        return float(math.hypot(*(v[ch[1]] - v[ch[0]])))

    def mid_node(ch, blob):
        return table.get(("m",) + ch, (v[ch[0]] + v[ch[1]]) / 2.0, chord_len(ch), blob)

    def junction_node(j, blob):
        chords = [_chord(mesh, j, k) for k in range(3)]
        width = sum(chord_len(c) for c in chords) / 3.0
        return table.get(("j", j), v[tris[j]].mean(axis=0), width, blob)

    def apex_node(t, ch, blob):
        apex = next(int(q) for q in tris[t] if q not in ch)
        return table.get(("a", t), v[apex].copy(), 0.0, blob)

    segments = []
    significance = np.full(len(complexes), np.inf)
    for ci, c in enumerate(complexes):
        b = c.blob
        if c.kind == "free" and len(c.triangles) == 1:
            t = c.triangles[0]
            p = v[tris[t]]
            width = float(np.mean(np.hypot(*(np.roll(p, -1, axis=0) - p).T)))
            table.get(("i", t), p.mean(axis=0), width, b)
            continue
        path = [mid_node(ch, b) for ch in c.chords]
        if c.cyclic:
            path.append(path[0])
        else:
            s, e = c.ends
            if c.kind in ("limb", "torso"):
                path.insert(0, junction_node(s, b))
            else:
                path.insert(0, apex_node(s, c.chords[0], b))
            if c.kind == "torso":
                path.append(junction_node(e, b))
            else:
                path.append(apex_node(e, c.chords[-1], b))
        for a, bb in zip(path[:-1], path[1:]):
            segments.append((a, bb, ci))
        length = sum(float(math.hypot(*(np.asarray(table.points[q]) - table.points[p])))
                     for p, q in zip(path[:-1], path[1:]))
        if c.kind == "limb":
            significance[ci] = length / chord_len(c.chords[0])
        elif c.kind == "torso":
            significance[ci] = length / max(chord_len(c.chords[0]), chord_len(c.chords[-1]))
    parent, _ = _hierarchy(complexes, mesh.n_blobs)
    return CatSkeleton(np.asarray(table.points).reshape(-1, 2), table.widths, segments,
                       table.blobs, complexes, parent, significance, None, mesh.n_blobs)


def prune_skeleton(skel: CatSkeleton, tau: float = 1.0) -> CatSkeleton:
    """Drop insignificant complexes, leaves first up the hierarchy.

    A complex is removed when its significance is below ``tau`` and all of
    its children in the hierarchy were removed.  Free complexes and torsos on
    a skeleton cycle (around a hole) are always kept.  A blob whose
    complexes are all removed keeps a single node at its root junction.
    """
    if tau < 0:
        raise ValueError(f"significance threshold must be >= 0, got {tau}")
    complexes = skel.complexes
    nc = len(complexes)
    protected = _cycle_torsos(complexes)
    removed = ~skel.retained.copy()
    children = [[] for _ in range(nc)]
    for k in range(nc):
        if skel.parent[k] >= 0:
            children[skel.parent[k]].append(k)
    # post-order over each hierarchy tree
    order = []
    for r in [k for k in range(nc) if skel.parent[k] < 0]:
        stack = [(r, False)]
        while stack:
            k, done = stack.pop()
            if done:
                order.append(k)
            else:
                stack.append((k, True))
                stack.extend((m, False) for m in children[k])
    for k in order:
        removed[k] = removed[k] or (k not in protected and complexes[k].kind != "free"
                      and skel.significance[k] < tau
                      and all(removed[m] for m in children[k]))
    keep_seg = ~removed[skel.segments[:, 2]] if len(skel.segments) else np.zeros(0, dtype=bool)
    segs = skel.segments[keep_seg]
    used = np.zeros(len(skel.nodes), dtype=bool)
    used[segs[:, :2].ravel()] = True
    # isolated-triangle nodes carry no segment but always survive
    seg_nodes = np.zeros(len(skel.nodes), dtype=bool)
    seg_nodes[skel.segments[:, :2].ravel()] = True
    used |= ~seg_nodes
    for b in range(skel.n_blobs):
        members = [k for k in range(nc) if complexes[k].blob == b]
        if members and all(removed[k] for k in members) and not used[skel.node_blob == b].any():
            root = next(k for k in members if skel.parent[k] < 0)
            a, bb, _ = next(s for s in skel.segments if s[2] == root)
            used[a] = True  # every pruned path starts at a junction centroid
    remap = np.cumsum(used) - 1
    nodes = skel.nodes[used]
    segs = np.column_stack([remap[segs[:, 0]], remap[segs[:, 1]], segs[:, 2]]) if len(segs) \
        else np.zeros((0, 3), dtype=np.int64)
    return replace(skel, nodes=nodes, widths=skel.widths[used], segments=segs,
                   node_blob=skel.node_blob[used], retained=~removed)
