"""Pure-Python implementations of the hot kernels.

These mirror ``_ckernels.pyx`` function for function and are used whenever
the compiled extension is unavailable (or ``GRAINMORPH_PURE_PYTHON=1``).
"""
import numpy as np

from ._exact import incircle_exact, orient2d_exact

_EPS = 2.0 ** -53
CCW_ERRBOUND = (3.0 + 16.0 * _EPS) * _EPS
ICC_ERRBOUND = (10.0 + 96.0 * _EPS) * _EPS
# the static error bounds hold only while no product under- or overflows;
# nonzero coordinate differences outside these ranges go to exact arithmetic
CCW_LO, CCW_HI = 2.0 ** -480, 2.0 ** 500
ICC_LO, ICC_HI = 2.0 ** -240, 2.0 ** 250


def _sgn(v):
    return 1 if v > 0.0 else (-1 if v < 0.0 else 0)


def _unsafe(lo, hi, *diffs):
    for d in diffs:
        if d != 0.0 and not lo <= abs(d) <= hi:
            return True
    return False


def orient2d(ax, ay, bx, by, cx, cy):
    """Sign of the orientation of (a, b, c): +1 left turn, -1 right, 0 collinear."""
    acx, bcy, acy, bcx = ax - cx, by - cy, ay - cy, bx - cx
    if _unsafe(CCW_LO, CCW_HI, acx, bcy, acy, bcx):
        return orient2d_exact(ax, ay, bx, by, cx, cy)
    detleft = acx * bcy
    detright = acy * bcx
    det = detleft - detright
    if detleft > 0.0:
        if detright <= 0.0:
            return _sgn(det)
        detsum = detleft + detright
    elif detleft < 0.0:
        if detright >= 0.0:
            return _sgn(det)
        detsum = -detleft - detright
    else:
        return _sgn(det)
    if abs(det) >= CCW_ERRBOUND * detsum:
        return _sgn(det)
    return orient2d_exact(ax, ay, bx, by, cx, cy)


def incircle(ax, ay, bx, by, cx, cy, dx, dy):
    """Sign of d against the circumcircle of the CCW triangle (a, b, c).

    +1 strictly inside, 0 cocircular, -1 outside.
    """
    adx = ax - dx
    bdx = bx - dx
    cdx = cx - dx
    ady = ay - dy
    bdy = by - dy
    cdy = cy - dy
    if _unsafe(ICC_LO, ICC_HI, adx, bdx, cdx, ady, bdy, cdy):
        return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)
    bdxcdy = bdx * cdy
    cdxbdy = cdx * bdy
    alift = adx * adx + ady * ady
    cdxady = cdx * ady
    adxcdy = adx * cdy
    blift = bdx * bdx + bdy * bdy
    adxbdy = adx * bdy
    bdxady = bdx * ady
    clift = cdx * cdx + cdy * cdy
    det = (alift * (bdxcdy - cdxbdy)
           + blift * (cdxady - adxcdy)
           + clift * (adxbdy - bdxady))
    permanent = ((abs(bdxcdy) + abs(cdxbdy)) * alift
                 + (abs(cdxady) + abs(adxcdy)) * blift
                 + (abs(adxbdy) + abs(bdxady)) * clift)
    errbound = ICC_ERRBOUND * permanent
    if det > errbound:
        return 1
    if -det > errbound:
        return -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def triangle_pixel_stats(tri_xy, grey):
    """Sum and count of pixel greys whose centres fall in each triangle.

    Triangles are visited in index order and a pixel centre belongs to the
    first (lowest-index) triangle whose closed region contains it.
    """
    tri_xy = np.asarray(tri_xy, dtype=np.float64)
    grey = np.asarray(grey)
    h, w = grey.shape
    m = tri_xy.shape[0]
    sums = np.zeros(m, dtype=np.float64)
    counts = np.zeros(m, dtype=np.int64)
    owned = np.zeros((h, w), dtype=bool)
    for t in range(m):
        (ax, ay), (bx, by), (cx, cy) = tri_xy[t]
        i0 = max(int(np.ceil(min(ax, bx, cx) - 0.5)), 0)
        i1 = min(int(np.floor(max(ax, bx, cx) - 0.5)), w - 1)
        j0 = max(int(np.ceil(min(ay, by, cy) - 0.5)), 0)
        j1 = min(int(np.floor(max(ay, by, cy) - 0.5)), h - 1)
        if i1 < i0 or j1 < j0:
            continue
        px = np.arange(i0, i1 + 1) + 0.5
        py = np.arange(j0, j1 + 1)[:, None] + 0.5
        inside = ((bx - ax) * (py - ay) - (by - ay) * (px - ax) >= 0.0)
        inside &= ((cx - bx) * (py - by) - (cy - by) * (px - bx) >= 0.0)
        inside &= ((ax - cx) * (py - cy) - (ay - cy) * (px - cx) >= 0.0)
        window = owned[j0:j1 + 1, i0:i1 + 1]
        take = inside & ~window
        if take.any():
            window |= take
            sums[t] = float(grey[j0:j1 + 1, i0:i1 + 1][take].sum(dtype=np.int64))
            counts[t] = int(take.sum())
    return sums, counts


def smooth_representatives(grey, labels, sizes, radius):
    """Median grey of each pixel's pulse group within its linking window.

    Pixels of groups smaller than the full window join the other group in
    their window whose median is closest to their own grey (ties to the
    larger presence, then the smaller label).  The median is
    the lower median, so outputs are always input grey values.
    """
    grey = np.asarray(grey, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    h, w = grey.shape
    full = (2 * radius + 1) ** 2
    out = np.empty_like(grey)
    g = grey.tolist()
    lab = labels.tolist()
    for j in range(h):
        j0, j1 = max(j - radius, 0), min(j + radius + 1, h)
        for i in range(w):
            i0, i1 = max(i - radius, 0), min(i + radius + 1, w)
            own = lab[j][i]
            target = own
            if sizes[own] < full:
                # a noise group joins the neighbouring group closest in grey
                groups = {}
                for jj in range(j0, j1):
                    row = lab[jj]
                    grow = g[jj]
                    for ii in range(i0, i1):
                        if row[ii] != own:
                            groups.setdefault(row[ii], []).append(grow[ii])
                if groups:
                    me = g[j][i]

                    def rank(k):
                        vals = sorted(groups[k])
                        return (abs(vals[(len(vals) - 1) // 2] - me), -len(vals), k)

                    target = min(groups, key=rank)
            vals = []
            for jj in range(j0, j1):
                row = lab[jj]
                grow = g[jj]
                for ii in range(i0, i1):
                    if row[ii] == target:
                        vals.append(grow[ii])
            vals.sort()
            out[j, i] = vals[(len(vals) - 1) // 2]
    return out
