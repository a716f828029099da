# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror :mod:`viasnet.kernels._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, atan2, sqrt, M_PI

cnp.import_array()


def gaussian_splat(xs, ys, int height, int width, double sigma):
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(ys, dtype=np.float64)
    if x.shape[0] != y.shape[0]:
        raise ValueError("xs and ys differ in length")
    out_arr = np.zeros((height, width), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] gx = np.empty(width, dtype=np.float64)
    cdef double[::1] gy = np.empty(height, dtype=np.float64)
    cdef double inv = 1.0 / (2.0 * sigma * sigma)
    cdef Py_ssize_t k, r, c
    cdef double d, gyr
    cdef double* orow
    cdef double* gxp = &gx[0] if width > 0 else NULL
    for k in range(x.shape[0]):
        for c in range(width):
            d = c + 0.5 - x[k]
            gx[c] = exp(-d * d * inv)
        for r in range(height):
            d = r + 0.5 - y[k]
            gy[r] = exp(-d * d * inv)
        for r in range(height):
            gyr = gy[r]
            orow = &out[r, 0]
            for c in range(width):
                orow[c] += gyr * gxp[c]
    return out_arr


def auc_rank(pos, neg):
    cdef double[::1] p = np.sort(np.asarray(pos, dtype=np.float64).ravel())
    cdef double[::1] n = np.sort(np.asarray(neg, dtype=np.float64).ravel())
    cdef Py_ssize_t n_pos = p.shape[0], n_neg = n.shape[0]
    if n_pos == 0 or n_neg == 0:
        raise ValueError("need at least one positive and one negative")
    cdef Py_ssize_t i, lo = 0, hi = 0
    cdef long long twice = 0
    for i in range(n_pos):
        while lo < n_neg and n[lo] < p[i]:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n_neg and n[hi] <= p[i]:
            hi += 1
        twice += 2 * lo + (hi - lo)
    return twice / (2.0 * n_pos * n_neg)


def angular_velocity(t, ux, uy, uz):
    cdef const double[::1] tt = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(ux, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(uy, dtype=np.float64)
    cdef const double[::1] c = np.ascontiguousarray(uz, dtype=np.float64)
    cdef Py_ssize_t n = tt.shape[0], i
    out_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] v = out_arr
    cdef double cx, cy, cz, dot, ang
    for i in range(1, n):
        cx = b[i - 1] * c[i] - c[i - 1] * b[i]
        cy = c[i - 1] * a[i] - a[i - 1] * c[i]
        cz = a[i - 1] * b[i] - b[i - 1] * a[i]
        dot = a[i - 1] * a[i] + b[i - 1] * b[i] + c[i - 1] * c[i]
        ang = atan2(sqrt(cx * cx + cy * cy + cz * cz), dot) * (180.0 / M_PI)
        v[i] = ang / (tt[i] - tt[i - 1])
    if n > 1:
        v[0] = v[1]
    return out_arr


def fixation_runs(velocity, double threshold, int min_samples):
    cdef const double[::1] v = np.ascontiguousarray(velocity, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i, start = -1, k = 0
    out_arr = np.empty((n // 2 + 1, 2), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    for i in range(n + 1):
        if i < n and v[i] < threshold:
            if start < 0:
                start = i
        elif start >= 0:
            if i - start >= min_samples:
                out[k, 0] = start
                out[k, 1] = i - 1
                k += 1
            start = -1
    return out_arr[:k].copy()


def channel_histograms(img, int bins):
    cdef const unsigned char[:, :, ::1] im = np.ascontiguousarray(img, dtype=np.uint8)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], nc = im.shape[2], r, col, ch
    out_arr = np.zeros((nc, bins), dtype=np.int64)
    cdef long long[:, ::1] out = out_arr
    for r in range(h):
        for col in range(w):
            for ch in range(nc):
                out[ch, (im[r, col, ch] * bins) >> 8] += 1
    return out_arr
