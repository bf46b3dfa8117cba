# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: frame field composition and confusion search.

Semantics match fluora.kernels._fast_py exactly; see that module for the
contracts. Compiled with -ffp-contract=off so float results stay
bit-identical to numpy.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def compose_frame(int height, int width, int band_top, int band_bot,
                  double[::1] bg, double[::1] tissue, double[::1] emission):
    out = np.empty((height, width, 3), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef int x, y
    cdef double bg0 = bg[0], bg1 = bg[1], bg2 = bg[2]
    cdef double t0 = tissue[0], t1 = tissue[1], t2 = tissue[2]
    for y in range(height):
        if y < band_top or y >= band_bot:
            for x in range(width):
                o[y, x, 0] = bg0
                o[y, x, 1] = bg1
                o[y, x, 2] = bg2
        else:
            for x in range(width):
                o[y, x, 0] = t0
                o[y, x, 1] = t1 + emission[x]
                o[y, x, 2] = t2
    return out


cdef inline bint _rounds_to(long long num, long long den, long long t10) nogil:
    # num/den as a percentage rounds half-up to t10 tenths
    cdef long long lhs = 2000 * num
    return (2 * t10 - 1) * den <= lhs and lhs < (2 * t10 + 1) * den


def search_confusions(long long r10, long long p10, long long a10, long long f10,
                      long long n_max, long long total, long long positives):
    cdef list found = []
    cdef long long n, n_lo, n_hi, s, tp, fp, fn, tn
    if total >= 0:
        n_lo = total
        n_hi = total
    else:
        n_lo = 1
        n_hi = n_max
    for n in range(n_lo, n_hi + 1):
        if n < 1 or n > n_max:
            continue
        for s in range(0, n + 1):
            if not _rounds_to(n - s, n, a10):
                continue
            for tp in range(1, n - s + 1):  # tp >= 1: f1 undefined otherwise
                if positives >= 0 and (tp > positives or tp + s < positives):
                    continue
                if not _rounds_to(2 * tp, 2 * tp + s, f10):
                    continue
                for fp in range(0, s + 1):
                    fn = s - fp
                    if positives >= 0 and tp + fn != positives:
                        continue
                    if not _rounds_to(tp, tp + fn, r10):
                        continue
                    if not _rounds_to(tp, tp + fp, p10):
                        continue
                    tn = n - tp - s
                    found.append((tp, fp, fn, tn))
    return np.array(found, dtype=np.int64).reshape(-1, 4)
