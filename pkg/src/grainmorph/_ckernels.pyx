# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for the contracts."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, ceil, floor
from libc.stdlib cimport malloc, free

from grainmorph._exact import incircle_exact, orient2d_exact

cnp.import_array()

cdef double _EPS = 2.0 ** -53
cdef double CCW_ERRBOUND = (3.0 + 16.0 * _EPS) * _EPS
cdef double ICC_ERRBOUND = (10.0 + 96.0 * _EPS) * _EPS
cdef double CCW_LO = 2.0 ** -480, CCW_HI = 2.0 ** 500
cdef double ICC_LO = 2.0 ** -240, ICC_HI = 2.0 ** 250


cdef inline int _sgn(double v) nogil:
    return (v > 0.0) - (v < 0.0)


cdef inline bint _bad(double d, double lo, double hi) nogil:
    # nonzero difference whose products could under- or overflow
    return d != 0.0 and not (lo <= fabs(d) <= hi)


def orient2d(double ax, double ay, double bx, double by, double cx, double cy):
    cdef double acx = ax - cx, bcy = by - cy, acy = ay - cy, bcx = bx - cx
    if (_bad(acx, CCW_LO, CCW_HI) or _bad(bcy, CCW_LO, CCW_HI)
            or _bad(acy, CCW_LO, CCW_HI) or _bad(bcx, CCW_LO, CCW_HI)):
        return orient2d_exact(ax, ay, bx, by, cx, cy)
    cdef double detleft = acx * bcy
    cdef double detright = acy * bcx
    cdef double det = detleft - detright
    cdef double detsum
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
    if fabs(det) >= CCW_ERRBOUND * detsum:
        return _sgn(det)
    return orient2d_exact(ax, ay, bx, by, cx, cy)


def incircle(double ax, double ay, double bx, double by, double cx, double cy,
             double dx, double dy):
    cdef double adx = ax - dx, bdx = bx - dx, cdx = cx - dx
    cdef double ady = ay - dy, bdy = by - dy, cdy = cy - dy
    if (_bad(adx, ICC_LO, ICC_HI) or _bad(bdx, ICC_LO, ICC_HI) or _bad(cdx, ICC_LO, ICC_HI)
            or _bad(ady, ICC_LO, ICC_HI) or _bad(bdy, ICC_LO, ICC_HI)
            or _bad(cdy, ICC_LO, ICC_HI)):
        return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)
    cdef double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy
    cdef double cdxady = cdx * ady, adxcdy = adx * cdy
    cdef double adxbdy = adx * bdy, bdxady = bdx * ady
    cdef double alift = adx * adx + ady * ady
    cdef double blift = bdx * bdx + bdy * bdy
    cdef double clift = cdx * cdx + cdy * cdy
    cdef double det = (alift * (bdxcdy - cdxbdy)
                       + blift * (cdxady - adxcdy)
                       + clift * (adxbdy - bdxady))
    cdef double permanent = ((fabs(bdxcdy) + fabs(cdxbdy)) * alift
                             + (fabs(cdxady) + fabs(adxcdy)) * blift
                             + (fabs(adxbdy) + fabs(bdxady)) * clift)
    cdef double errbound = ICC_ERRBOUND * permanent
    if det > errbound:
        return 1
    if -det > errbound:
        return -1
    return incircle_exact(ax, ay, bx, by, cx, cy, dx, dy)


def triangle_pixel_stats(tri_xy, grey):
    cdef const double[:, :, ::1] t = np.ascontiguousarray(tri_xy, dtype=np.float64)
    cdef const cnp.uint8_t[:, ::1] g = np.ascontiguousarray(grey, dtype=np.uint8)
    cdef Py_ssize_t m = t.shape[0], h = g.shape[0], w = g.shape[1]
    sums_arr = np.zeros(m, dtype=np.float64)
    counts_arr = np.zeros(m, dtype=np.int64)
    owned_arr = np.zeros((h, w), dtype=np.uint8)
    cdef double[::1] sums = sums_arr
    cdef cnp.int64_t[::1] counts = counts_arr
    cdef cnp.uint8_t[:, ::1] owned = owned_arr
    cdef Py_ssize_t k, i, j, i0, i1, j0, j1
    cdef double ax, ay, bx, by, cx, cy, px, py
    with nogil:
        for k in range(m):
            ax = t[k, 0, 0]; ay = t[k, 0, 1]
            bx = t[k, 1, 0]; by = t[k, 1, 1]
            cx = t[k, 2, 0]; cy = t[k, 2, 1]
            i0 = <Py_ssize_t>ceil(min(ax, min(bx, cx)) - 0.5)
            i1 = <Py_ssize_t>floor(max(ax, max(bx, cx)) - 0.5)
            j0 = <Py_ssize_t>ceil(min(ay, min(by, cy)) - 0.5)
            j1 = <Py_ssize_t>floor(max(ay, max(by, cy)) - 0.5)
            if i0 < 0:
                i0 = 0
            if j0 < 0:
                j0 = 0
            if i1 > w - 1:
                i1 = w - 1
            if j1 > h - 1:
                j1 = h - 1
            for j in range(j0, j1 + 1):
                py = j + 0.5
                for i in range(i0, i1 + 1):
                    if owned[j, i]:
                        continue
                    px = i + 0.5
                    if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < 0.0:
                        continue
                    if (cx - bx) * (py - by) - (cy - by) * (px - bx) < 0.0:
                        continue
                    if (ax - cx) * (py - cy) - (ay - cy) * (px - cx) < 0.0:
                        continue
                    owned[j, i] = 1
                    sums[k] += g[j, i]
                    counts[k] += 1
    return sums_arr, counts_arr


def smooth_representatives(grey, labels, sizes, int radius):
    cdef const cnp.uint8_t[:, ::1] g = np.ascontiguousarray(grey, dtype=np.uint8)
    cdef const cnp.int64_t[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef const cnp.int64_t[::1] sz = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1]
    out_arr = np.empty((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] out = out_arr
    cdef Py_ssize_t full = (2 * radius + 1) * (2 * radius + 1)
    cdef Py_ssize_t i, j, ii, jj, i0, i1, j0, j1, n, a, b, best_n, cnt
    cdef cnp.int64_t own, target, lb, best
    cdef int hist[256]
    cdef int d, best_d, v, seen
    cdef Py_ssize_t k
    cdef cnp.int64_t *cand = <cnp.int64_t *>malloc(full * sizeof(cnp.int64_t))
    cdef int *candv = <int *>malloc(full * sizeof(int))
    cdef int *tmp = <int *>malloc(full * sizeof(int))
    if cand == NULL or candv == NULL or tmp == NULL:
        free(cand)
        free(candv)
        free(tmp)
        raise MemoryError()
    try:
        with nogil:
            for j in range(h):
                j0 = j - radius if j >= radius else 0
                j1 = j + radius + 1 if j + radius + 1 < h else h
                for i in range(w):
                    i0 = i - radius if i >= radius else 0
                    i1 = i + radius + 1 if i + radius + 1 < w else w
                    own = lab[j, i]
                    target = own
                    if sz[own] < full:
                        n = 0
                        for jj in range(j0, j1):
                            for ii in range(i0, i1):
                                lb = lab[jj, ii]
                                if lb != own:
                                    cand[n] = lb
                                    candv[n] = g[jj, ii]
                                    n += 1
                        best = -1
                        best_n = 0
                        best_d = 1000
                        for a in range(n):
                            seen = 0
                            for b in range(a):
                                if cand[b] == cand[a]:
                                    seen = 1
                                    break
                            if seen:
                                continue
                            cnt = 0
                            for b in range(a, n):
                                if cand[b] == cand[a]:
                                    tmp[cnt] = candv[b]
                                    cnt += 1
                            # insertion sort, then the lower median
                            for b in range(1, cnt):
                                v = tmp[b]
                                k = b - 1
                                while k >= 0 and tmp[k] > v:
                                    tmp[k + 1] = tmp[k]
                                    k -= 1
                                tmp[k + 1] = v
                            d = tmp[(cnt - 1) // 2] - g[j, i]
                            if d < 0:
                                d = -d
                            if (d < best_d or (d == best_d and cnt > best_n)
                                    or (d == best_d and cnt == best_n and cand[a] < best)):
                                best_d = d
                                best_n = cnt
                                best = cand[a]
                        if best >= 0:
                            target = best
                    for a in range(256):
                        hist[a] = 0
                    n = 0
                    for jj in range(j0, j1):
                        for ii in range(i0, i1):
                            if lab[jj, ii] == target:
                                hist[g[jj, ii]] += 1
                                n += 1
                    cnt = 0
                    for a in range(256):
                        cnt += hist[a]
                        if cnt >= (n - 1) // 2 + 1:
                            break
                    out[j, i] = <cnp.uint8_t>a
    finally:
        free(cand)
        free(candv)
        free(tmp)
    return out_arr
