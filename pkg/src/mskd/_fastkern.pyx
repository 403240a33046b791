# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: edit distance and interval/box overlap.

Signatures mirror ``mskd._kernels_py``; one of the two modules is
selected at import time by ``mskd.kernels``.
"""

from libc.stdlib cimport free, malloc


def levenshtein(str a, str b):
    """Edit distance between two unicode strings (two-row DP)."""
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la

    cdef Py_UCS4 ca
    cdef Py_ssize_t i, j
    cdef Py_ssize_t cost, best
    cdef Py_ssize_t *prev = <Py_ssize_t *> malloc((lb + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *curr = <Py_ssize_t *> malloc((lb + 1) * sizeof(Py_ssize_t))
    cdef Py_ssize_t *tmp
    if prev == NULL or curr == NULL:
        if prev != NULL:
            free(prev)
        if curr != NULL:
            free(curr)
        raise MemoryError()

    try:
        for j in range(lb + 1):
            prev[j] = j
        for i in range(1, la + 1):
            curr[0] = i
            ca = a[i - 1]
            for j in range(1, lb + 1):
                cost = 0 if ca == <Py_UCS4> b[j - 1] else 1
                best = prev[j - 1] + cost
                if prev[j] + 1 < best:
                    best = prev[j] + 1
                if curr[j - 1] + 1 < best:
                    best = curr[j - 1] + 1
                curr[j] = best
            tmp = prev
            prev = curr
            curr = tmp
        return prev[lb]
    finally:
        free(prev)
        free(curr)


def interval_iou(double a0, double a1, double b0, double b1):
    """IoU of two intervals; 1.0 for identical zero-length points."""
    cdef double inter = min(a1, b1) - max(a0, b0)
    if inter < 0.0:
        inter = 0.0
    cdef double union_ = (a1 - a0) + (b1 - b0) - inter
    if union_ <= 0.0:
        return 1.0 if (a0 == b0 and a1 == b1) else 0.0
    return inter / union_


def box_iou(double ax1, double ay1, double ax2, double ay2,
            double bx1, double by1, double bx2, double by2):
    """IoU of two axis-aligned boxes; 1.0 for identical zero-area boxes."""
    cdef double iw = min(ax2, bx2) - max(ax1, bx1)
    cdef double ih = min(ay2, by2) - max(ay1, by1)
    cdef double inter = 0.0
    if iw > 0.0 and ih > 0.0:
        inter = iw * ih
    cdef double union_ = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    if union_ <= 0.0:
        return 1.0 if (ax1 == bx1 and ay1 == by1 and ax2 == bx2 and ay2 == by2) else 0.0
    return inter / union_
