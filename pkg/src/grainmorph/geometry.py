"""Small planar-geometry helpers shared by the contour, mesh and skeleton code."""
from __future__ import annotations

from collections import defaultdict
import math

import numpy as np

from .kernels import orient2d


def shoelace(points) -> float:
    pts = np.asarray(points, dtype=np.float64)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def winding_number(px: float, py: float, points) -> int:
    """Winding number of a closed polyline around ``(px, py)`` (0 when on it)."""
    pts = np.asarray(points, dtype=np.float64).tolist()
    wn = 0
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        if y0 <= py:
            if y1 > py and orient2d(x0, y0, x1, y1, px, py) > 0:
                wn += 1
        elif y1 <= py and orient2d(x0, y0, x1, y1, px, py) < 0:
            wn -= 1
    return wn


def on_boundary(px: float, py: float, points) -> bool:
    pts = np.asarray(points, dtype=np.float64).tolist()
    n = len(pts)
    for k in range(n):
        x0, y0 = pts[k]
        x1, y1 = pts[(k + 1) % n]
        if (orient2d(x0, y0, x1, y1, px, py) == 0
                and min(x0, x1) <= px <= max(x0, x1) and min(y0, y1) <= py <= max(y0, y1)):
            return True
    return False


def _on_segment(p, q, r):
    """r is collinear with pq; is it within the closed segment?"""
    return min(p[0], q[0]) <= r[0] <= max(p[0], q[0]) and min(p[1], q[1]) <= r[1] <= max(p[1], q[1])


def point_on_segment(r, p, q) -> bool:
    return (orient2d(p[0], p[1], q[0], q[1], r[0], r[1]) == 0) and _on_segment(p, q, r)


def segment_contact(p1, p2, q1, q2):
    """Classify the intersection of two closed segments.

    Returns ``None`` (disjoint), ``"cross"`` (proper interior crossing) or
    ``"touch"`` (any other contact, including shared endpoints and overlap).
    """
    o1 = orient2d(p1[0], p1[1], p2[0], p2[1], q1[0], q1[1])
    o2 = orient2d(p1[0], p1[1], p2[0], p2[1], q2[0], q2[1])
    o3 = orient2d(q1[0], q1[1], q2[0], q2[1], p1[0], p1[1])
    o4 = orient2d(q1[0], q1[1], q2[0], q2[1], p2[0], p2[1])
    if o1 * o2 < 0 and o3 * o4 < 0:
        return "cross"
    if ((o1 == 0 and _on_segment(p1, p2, q1)) or (o2 == 0 and _on_segment(p1, p2, q2))
            or (o3 == 0 and _on_segment(q1, q2, p1)) or (o4 == 0 and _on_segment(q1, q2, p2))):
        return "touch"
    return None


def candidate_pairs(segments: np.ndarray):
    """Index pairs of segments whose bounding boxes share a uniform-grid cell.

    ``segments`` is ``(n, 4)`` as ``x0 y0 x1 y1``.  Every intersecting pair is
    reported at least once; each pair appears once.
    """
    n = len(segments)
    if n < 2:
        return []
    lo = np.minimum(segments[:, :2], segments[:, 2:])
    hi = np.maximum(segments[:, :2], segments[:, 2:])
    span = hi.max(axis=0) - lo.min(axis=0)
    mean_len = float(np.mean(np.max(hi - lo, axis=1))) or 1.0
    cell = max(mean_len, float(max(span)) / max(math.sqrt(n), 1.0), 1e-9)
    origin = lo.min(axis=0)
    c0 = np.floor((lo - origin) / cell).astype(np.int64)
    c1 = np.floor((hi - origin) / cell).astype(np.int64)
    lo_l = lo.tolist()
    hi_l = hi.tolist()
    buckets = defaultdict(list)
    for k in range(n):
        for cx in range(c0[k, 0], c1[k, 0] + 1):
            for cy in range(c0[k, 1], c1[k, 1] + 1):
                buckets[(cx, cy)].append(k)
    pairs = set()
    for members in buckets.values():
        m = len(members)
        for a in range(m):
            ka = members[a]
            for b in range(a + 1, m):
                kb = members[b]
                la, ha, lb, hb = lo_l[ka], hi_l[ka], lo_l[kb], hi_l[kb]
                if la[0] <= hb[0] and lb[0] <= ha[0] and la[1] <= hb[1] and lb[1] <= ha[1]:
                    pairs.add((ka, kb) if ka < kb else (kb, ka))
    return sorted(pairs)
