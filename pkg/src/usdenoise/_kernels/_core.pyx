# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel core; mirrors usdenoise._kernels.fallback."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, floor

cnp.import_array()


def nlm_filter(cnp.ndarray[cnp.float64_t, ndim=2] padded, int height, int width,
               int patch_radius, int search_radius, double h, double sigma):
    # Per search offset: squared-difference map, separable running-sum box
    # filter for the patch distances (C loops), then NumPy's vectorized exp
    # for the weights.  Same weighting formula as the fallback.
    cdef int m = patch_radius + search_radius
    if padded.shape[0] != height + 2 * m or padded.shape[1] != width + 2 * m:
        raise ValueError("padded image does not match declared margins")
    cdef cnp.ndarray[cnp.float64_t, ndim=2] q = np.ascontiguousarray(padded)
    cdef int k = 2 * patch_radius + 1
    cdef int ext_h = height + 2 * patch_radius
    cdef int ext_w = width + 2 * patch_radius
    cdef cnp.ndarray[cnp.float64_t, ndim=2] sq = np.empty((ext_h, ext_w))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hbox = np.empty((ext_h, width))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d2 = np.empty((height, width))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] colsum = np.empty(width)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] acc = np.zeros((height, width))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] wsum = np.zeros((height, width))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double two_sigma2 = 2.0 * sigma * sigma
    cdef double inv_patch = 1.0 / (k * k)
    cdef int base = m - patch_radius
    cdef int i, j, dy, dx, qi, qj
    cdef double s, diff

    for dy in range(-search_radius, search_radius + 1):
        for dx in range(-search_radius, search_radius + 1):
            for i in range(ext_h):
                qi = base + i
                for j in range(ext_w):
                    qj = base + j
                    diff = q[qi, qj] - q[qi + dy, qj + dx]
                    sq[i, j] = diff * diff
            for i in range(ext_h):
                s = 0.0
                for j in range(k):
                    s += sq[i, j]
                hbox[i, 0] = s
                for j in range(1, width):
                    s += sq[i, j + k - 1] - sq[i, j - 1]
                    hbox[i, j] = s
            for j in range(width):
                s = 0.0
                for i in range(k):
                    s += hbox[i, j]
                colsum[j] = s
                d2[0, j] = s
            for i in range(1, height):
                for j in range(width):
                    colsum[j] += hbox[i + k - 1, j] - hbox[i - 1, j]
                    d2[i, j] = colsum[j]
            w = np.exp(-np.maximum(d2 * inv_patch - two_sigma2, 0.0) * inv_h2)
            for i in range(height):
                qi = m + dy + i
                for j in range(width):
                    acc[i, j] += w[i, j] * q[qi, m + dx + j]
                    wsum[i, j] += w[i, j]
    return np.asarray(acc) / np.asarray(wsum)


def match_blocks(cnp.ndarray[cnp.float64_t, ndim=3] blocks,
                 cnp.ndarray[cnp.int64_t, ndim=1] ref_rows,
                 cnp.ndarray[cnp.int64_t, ndim=1] ref_cols,
                 int search_radius, int k):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] b = np.ascontiguousarray(blocks)
    cdef Py_ssize_t py = b.shape[0], px = b.shape[1], bb = b.shape[2]
    cdef Py_ssize_t nref = ref_rows.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=2] out = np.empty((nref, k), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_d = np.empty(k)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] best_i = np.empty(k, dtype=np.int64)
    cdef Py_ssize_t r, ry, rx, y, x, y0, y1, x0, x1, t, pos, count
    cdef long lin, self_lin
    cdef bint have_self
    cdef double d, diff
    cdef double INF = np.inf

    for r in range(nref):
        ry = ref_rows[r]
        rx = ref_cols[r]
        y0 = ry - search_radius
        if y0 < 0:
            y0 = 0
        y1 = ry + search_radius + 1
        if y1 > py:
            y1 = py
        x0 = rx - search_radius
        if x0 < 0:
            x0 = 0
        x1 = rx + search_radius + 1
        if x1 > px:
            x1 = px
        count = (y1 - y0) * (x1 - x0)
        if count < k:
            raise ValueError(f"only {count} candidate blocks, need {k}")
        for t in range(k):
            best_d[t] = INF
            best_i[t] = -1
        for y in range(y0, y1):
            for x in range(x0, x1):
                d = 0.0
                for t in range(bb):
                    diff = b[y, x, t] - b[ry, rx, t]
                    d += diff * diff
                lin = y * px + x
                # candidates scan in ascending lin, so strict-less insertion
                # reproduces the (distance, position) lexicographic order
                if d < best_d[k - 1]:
                    pos = k - 1
                    while pos > 0 and d < best_d[pos - 1]:
                        best_d[pos] = best_d[pos - 1]
                        best_i[pos] = best_i[pos - 1]
                        pos -= 1
                    best_d[pos] = d
                    best_i[pos] = lin
        # the reference block must be in its own group (full ties in flat
        # regions could otherwise crowd it out)
        self_lin = ry * px + rx
        have_self = False
        for t in range(k):
            if best_i[t] == self_lin:
                have_self = True
                break
        if not have_self:
            best_i[k - 1] = self_lin
        for t in range(k):
            out[r, t] = best_i[t]
    return out


def deposit_pulses(cnp.ndarray[cnp.float64_t, ndim=1] tau,
                   cnp.ndarray[cnp.float64_t, ndim=1] amp,
                   cnp.ndarray[cnp.float64_t, ndim=1] phase,
                   double fs, double f0, double sigma_t, int n_samples,
                   int half_width):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] trace = np.zeros(n_samples)
    cdef Py_ssize_t s, n = tau.shape[0]
    cdef long c, kk, lo, hi
    cdef double dt, g, inv2s2 = 1.0 / (2.0 * sigma_t * sigma_t)
    cdef double w0 = 2.0 * np.pi * f0

    for s in range(n):
        c = <long>floor(tau[s] * fs)
        lo = c - half_width
        hi = c + half_width
        if lo < 0:
            lo = 0
        if hi >= n_samples:
            hi = n_samples - 1
        for kk in range(lo, hi + 1):
            dt = kk / fs - tau[s]
            g = exp(-dt * dt * inv2s2)
            trace[kk] += amp[s] * g * cos(w0 * dt + phase[s])
    return trace


def das_sum(cnp.ndarray[cnp.float64_t, ndim=2] rf,
            cnp.ndarray[cnp.float64_t, ndim=2] sample_idx):
    cdef Py_ssize_t n_el = rf.shape[0], n_s = rf.shape[1]
    cdef Py_ssize_t n_px = sample_idx.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_px)
    cdef Py_ssize_t e, p
    cdef long i0
    cdef double f, x

    for e in range(n_el):
        for p in range(n_px):
            x = sample_idx[e, p]
            i0 = <long>floor(x)
            if i0 >= 0 and i0 + 1 < n_s:
                f = x - i0
                out[p] += rf[e, i0] * (1.0 - f) + rf[e, i0 + 1] * f
    return out
