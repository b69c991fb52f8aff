"""Dilated, oriented, non-degenerate blob contours.

Each foreground pixel is replaced by the axis-aligned square of side
``1 + 2*delta`` centred on the pixel centre; the contours are the boundary
polygons of the union of those squares.  For ``0 < delta < 0.5`` blobs that
are separated by a background pixel stay apart, diagonal contact merges
blobs, and no two contours can touch.

The union is traced exactly on a refined lattice whose lines sit at
``k - delta`` and ``k + delta`` for every integer ``k``.  Outer contours are
counter-clockwise (positive shoelace area), holes clockwise, so the material
always lies to the left of the direction of travel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import (candidate_pairs, point_on_segment, segment_contact, shoelace,
                       winding_number)
from .segmentation import BinaryImage


class DegenerateContourError(ValueError):
    pass


class InvalidContourSetError(ValueError):
    pass


@dataclass(eq=False)
class Contour:
    points: np.ndarray
    kind: str = "outer"
    parent: int | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 2)
        if self.kind not in ("outer", "hole"):
            raise ValueError(f"unknown contour kind {self.kind!r}")

    def __len__(self):
        return len(self.points)

    def __eq__(self, other):
        if not isinstance(other, Contour):
            return NotImplemented
        return (self.kind == other.kind and self.parent == other.parent
                and np.array_equal(self.points, other.points))

    __hash__ = None


def signed_area(c) -> float:
    """Shoelace area; positive for counter-clockwise traversal."""
    pts = c.points if isinstance(c, Contour) else np.asarray(c, dtype=np.float64)
    if len(pts) < 3:
        raise DegenerateContourError(f"contour needs at least 3 points, got {len(pts)}")
    return shoelace(pts)


@dataclass(eq=False)
class ContourSet:
    contours: list = field(default_factory=list)
    width: int = 0
    height: int = 0

    def __len__(self):
        return len(self.contours)

    def __iter__(self):
        return iter(self.contours)

    def __getitem__(self, k):
        return self.contours[k]

    def __eq__(self, other):
        if not isinstance(other, ContourSet):
            return NotImplemented
        return ((self.width, self.height) == (other.width, other.height)
                and len(self) == len(other)
                and all(a == b for a, b in zip(self.contours, other.contours)))

    __hash__ = None

    def blobs(self):
        """``[(outer_index, [hole_index, ...]), ...]`` in contour order."""
        groups = {}
        order = []
        for k, c in enumerate(self.contours):
            if c.kind == "outer":
                groups[k] = []
                order.append(k)
        for k, c in enumerate(self.contours):
            if c.kind == "hole":
                groups[c.parent].append(k)
        return [(k, groups[k]) for k in order]

    def outer_count(self) -> int:
        return sum(c.kind == "outer" for c in self.contours)

    def total_area(self) -> float:
        return sum(signed_area(c) for c in self.contours)

    def to_text(self) -> str:
        lines = [f"# contours {self.width} {self.height}"]
        for c in self.contours:
            coords = " ".join(f"{x:.6f} {y:.6f}" for x, y in c.points)
            lines.append(f"{c.kind} {len(c.points)} {coords}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ContourSet":
        """Parse :meth:`to_text` output; a hole belongs to the preceding outer."""
        width = height = 0
        contours = []
        last_outer = None
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] == "contours":
                    width, height = int(parts[1]), int(parts[2])
                continue
            parts = line.split()
            kind, n = parts[0], int(parts[1])
            vals = [float(v) for v in parts[2:]]
            if len(vals) != 2 * n:
                raise ValueError(f"line {lineno}: expected {2 * n} coordinates, got {len(vals)}")
            if kind == "outer":
                last_outer = len(contours)
                contours.append(Contour(np.reshape(vals, (n, 2)), "outer"))
            elif kind == "hole":
                if last_outer is None:
                    raise ValueError(f"line {lineno}: hole before any outer contour")
                contours.append(Contour(np.reshape(vals, (n, 2)), "hole", last_outer))
            else:
                raise ValueError(f"line {lineno}: unknown contour kind {kind!r}")
        return cls(contours, width, height)


def canonical_start(points: np.ndarray) -> np.ndarray:
    """Rotate a closed polyline to start at its topmost-leftmost vertex."""
    k = int(np.lexsort((points[:, 0], points[:, 1]))[0])
    return np.roll(points, -k, axis=0)


def assemble(loops, width: int, height: int) -> ContourSet:
    """Build a canonical ContourSet from ``[(outer_points, [hole_points...]), ...]``.

    Blobs are ordered by the topmost-leftmost vertex of their outer contour;
    each outer is followed by its holes in the same order.
    """
    blobs = []
    for outer, holes in loops:
        outer = canonical_start(np.asarray(outer, dtype=np.float64))
        holes = [canonical_start(np.asarray(h, dtype=np.float64)) for h in holes]
        holes.sort(key=lambda p: (p[0, 1], p[0, 0]))
        blobs.append((outer, holes))
    blobs.sort(key=lambda b: (b[0][0, 1], b[0][0, 0]))
    contours = []
    for outer, holes in blobs:
        parent = len(contours)
        contours.append(Contour(outer, "outer"))
        contours.extend(Contour(h, "hole", parent) for h in holes)
    return ContourSet(contours, width, height)


def refined_cover(mask: np.ndarray) -> np.ndarray:
    """Coverage of the refined lattice: cell ``2k+1`` is pixel ``k``'s core,
    cell ``2k`` the strip around grid line ``k``."""
    h, w = mask.shape
    up = np.zeros((2 * h + 1, 2 * w + 1), dtype=bool)
    up[1::2, 1::2] = mask
    return ndimage.binary_dilation(up, structure=np.ones((3, 3), dtype=bool))


def _lattice_coord(m: np.ndarray, delta: float) -> np.ndarray:
    return (m // 2) + np.where(m % 2 == 0, -delta, delta)


def extract_contours(mask, delta: float = 0.25) -> ContourSet:
    """Trace the dilated contours of every blob in ``mask``."""
    if not 0.0 < delta < 0.5:
        raise ValueError(f"dilation must satisfy 0 < delta < 0.5, got {delta}")
    arr = mask.mask if isinstance(mask, BinaryImage) else np.asarray(mask, dtype=bool)
    height, width = arr.shape
    cov = refined_cover(arr)
    if not cov.any():
        return ContourSet([], width, height)
    labels, _ = ndimage.label(cov)
    pad = np.pad(cov, 1)
    inner = pad[1:-1, 1:-1]
    stride = cov.shape[1] + 1

    # (start, end) lattice vertices of each boundary edge, material on the left
    starts, ends, owner = [], [], []
    for mask_e, (sx, sy, ex, ey) in (
            (inner & ~pad[:-2, 1:-1], (0, 0, 1, 0)),   # below
            (inner & ~pad[1:-1, 2:], (1, 0, 1, 1)),    # right
            (inner & ~pad[2:, 1:-1], (1, 1, 0, 1)),    # above
            (inner & ~pad[1:-1, :-2], (0, 1, 0, 0))):  # left
        yy, xx = np.nonzero(mask_e)
        starts.append((yy + sy) * stride + xx + sx)
        ends.append((yy + ey) * stride + xx + ex)
        owner.append(labels[yy, xx])
    starts = np.concatenate(starts)
    ends = np.concatenate(ends)
    owner = np.concatenate(owner)
    edge_of = np.full((cov.shape[0] + 1) * stride, -1, dtype=np.int64)
    edge_of[starts] = np.arange(len(starts))
    succ = edge_of[ends].tolist()
    starts_l = starts.tolist()

    visited = bytearray(len(starts))
    loops_by_blob = {}
    for e0 in range(len(starts_l)):
        if visited[e0]:
            continue
        codes = []
        e = e0
        while not visited[e]:
            visited[e] = 1
            codes.append(starts_l[e])
            e = succ[e]
        codes = np.asarray(codes, dtype=np.int64)
        xs, ys = codes % stride, codes // stride
        # keep only corners: direction changes between incoming and outgoing edge
        dx_in, dy_in = xs - np.roll(xs, 1), ys - np.roll(ys, 1)
        dx_out, dy_out = np.roll(xs, -1) - xs, np.roll(ys, -1) - ys
        corner = (dx_in != dx_out) | (dy_in != dy_out)
        pts = np.column_stack([_lattice_coord(xs[corner], delta),
                               _lattice_coord(ys[corner], delta)])
        entry = loops_by_blob.setdefault(int(owner[e0]), [None, []])
        if shoelace(pts) > 0:
            entry[0] = pts
        else:
            entry[1].append(pts)
    return assemble([tuple(v) for v in loops_by_blob.values()], width, height)


def validate_contour_set(cs: ContourSet, strict: bool = True):
    """Return a list of human-readable problems (empty when valid).

    ``strict`` forbids any contact between contours; otherwise contours of
    different blobs may touch (refined contours share their cut chords) but
    must not cross.
    """
    problems = []
    blob_of = []
    for k, c in enumerate(cs.contours):
        if len(c) < 3:
            problems.append(f"contour {k}: fewer than 3 points")
            blob_of.append(k)
            continue
        area = shoelace(c.points)
        if area == 0:
            problems.append(f"contour {k}: zero area")
        elif (area > 0) != (c.kind == "outer"):
            problems.append(f"contour {k}: {c.kind} has wrong orientation")
        blob_of.append(k if c.kind == "outer" else c.parent)
    if problems:
        return problems
    segs, owner, index, sizes = [], [], [], []
    for k, c in enumerate(cs.contours):
        p = c.points
        q = np.roll(p, -1, axis=0)
        segs.append(np.hstack([p, q]))
        owner += [k] * len(p)
        index += list(range(len(p)))
        sizes.append(len(p))
    if not segs:
        return problems
    segs = np.vstack(segs)
    pts = segs.tolist()
    for a, b in candidate_pairs(segs):
        ca, cb = owner[a], owner[b]
        s, t = pts[a], pts[b]
        kind = segment_contact(s[:2], s[2:], t[:2], t[2:])
        if kind is None:
            continue
        if ca == cb:
            n = sizes[ca]
            ia, ib = index[a], index[b]
            if (ia + 1) % n == ib:
                first, second = s, t
            elif (ib + 1) % n == ia:
                first, second = t, s
            else:
                first = None
            if first is not None:
                # neighbours share one endpoint; any other contact folds back
                if (point_on_segment(first[:2], second[:2], second[2:])
                        or point_on_segment(second[2:], first[:2], first[2:])):
                    problems.append(f"contour {ca}: segments {ia} and {ib} overlap")
                continue
            problems.append(f"contour {ca}: segments {ia} and {ib} intersect")
        elif blob_of[ca] == blob_of[cb] or strict or kind == "cross":
            problems.append(f"contours {ca} and {cb} {'cross' if kind == 'cross' else 'touch'}")
    for k, c in enumerate(cs.contours):
        if c.kind == "hole":
            parent = cs.contours[c.parent]
            x, y = c.points[0]
            if winding_number(x, y, parent.points) != 1:
                problems.append(f"hole {k} is not inside its parent {c.parent}")
    return problems
