# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementations of the hot kernels.

Same contracts as convdesc.kernels._py; see that module for the
reference semantics. Accumulation is float64, storage float32.
"""

from libc.math cimport floor

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d(const cnp.float32_t[:, :, ::1] inp,
           const cnp.float32_t[:, :, :, ::1] weights,
           const cnp.float32_t[::1] biases,
           pads):
    cdef Py_ssize_t h = inp.shape[0], w = inp.shape[1], cin = inp.shape[2]
    cdef Py_ssize_t k = weights.shape[0]
    cdef Py_ssize_t kh = weights.shape[1], kw = weights.shape[2]
    cdef Py_ssize_t pt = pads[0], pb = pads[1], pl = pads[2], pr = pads[3]
    cdef Py_ssize_t out_h = h + pt + pb - kh + 1
    cdef Py_ssize_t out_w = w + pl + pr - kw + 1
    out_arr = np.empty((out_h, out_w, k), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t oy, ox, kk, ky, kx, c, iy, ix
    cdef double acc
    for oy in range(out_h):
        for ox in range(out_w):
            for kk in range(k):
                acc = biases[kk]
                for ky in range(kh):
                    iy = oy + ky - pt
                    if iy < 0 or iy >= h:
                        continue
                    for kx in range(kw):
                        ix = ox + kx - pl
                        if ix < 0 or ix >= w:
                            continue
                        for c in range(cin):
                            acc += weights[kk, ky, kx, c] * inp[iy, ix, c]
                out[oy, ox, kk] = <cnp.float32_t>acc
    return out_arr


def maxpool2(const cnp.float32_t[:, :, ::1] inp):
    cdef Py_ssize_t h = inp.shape[0], w = inp.shape[1], c = inp.shape[2]
    cdef Py_ssize_t oh = h // 2, ow = w // 2
    out_arr = np.empty((oh, ow, c), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t y, x, ch
    cdef cnp.float32_t m, v
    for y in range(oh):
        for x in range(ow):
            for ch in range(c):
                m = inp[2 * y, 2 * x, ch]
                v = inp[2 * y, 2 * x + 1, ch]
                if v > m:
                    m = v
                v = inp[2 * y + 1, 2 * x, ch]
                if v > m:
                    m = v
                v = inp[2 * y + 1, 2 * x + 1, ch]
                if v > m:
                    m = v
                out[y, x, ch] = m
    return out_arr


def hlac_counts(const cnp.uint8_t[:, ::1] bits,
                const cnp.int64_t[:, :, ::1] offsets,
                const cnp.int64_t[::1] sizes):
    cdef Py_ssize_t h = bits.shape[0], w = bits.shape[1]
    cdef Py_ssize_t n_masks = sizes.shape[0]
    out_arr = np.zeros(n_masks, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef Py_ssize_t m, y, x, j, size
    cdef cnp.int64_t count
    cdef cnp.uint8_t prod
    for m in range(n_masks):
        size = sizes[m]
        count = 0
        for y in range(1, h - 1):
            for x in range(1, w - 1):
                prod = 1
                for j in range(size):
                    prod &= bits[y + offsets[m, j, 0], x + offsets[m, j, 1]]
                count += prod
        out[m] = count
    return out_arr


def sift_histograms(const cnp.float32_t[:, ::1] mag,
                    const cnp.float32_t[:, ::1] ori,
                    Py_ssize_t patch,
                    Py_ssize_t step):
    cdef Py_ssize_t h = mag.shape[0], w = mag.shape[1]
    cdef Py_ssize_t ny = (h - patch) // step + 1
    cdef Py_ssize_t nx = (w - patch) // step + 1
    cdef double cell = patch / 4.0
    cdef double two_pi = 6.283185307179586476925286766559
    out_arr = np.zeros((ny * nx, 128), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] hist = out_arr

    # spatial soft-assignment is identical for every patch
    c0_arr = np.empty(patch, dtype=np.int64)
    w1_arr = np.empty(patch, dtype=np.float64)
    cdef cnp.int64_t[::1] c0 = c0_arr
    cdef cnp.float64_t[::1] w1 = w1_arr
    cdef Py_ssize_t i
    cdef double f
    for i in range(patch):
        f = (i + 0.5) / cell - 0.5
        c0[i] = <cnp.int64_t>floor(f)
        w1[i] = f - floor(f)

    cdef Py_ssize_t py, px, n, ly, lx, sy, sx, cy, cx, ob0, ob1
    cdef double m, fo, wo1, wy, wx, base
    n = 0
    for py in range(ny):
        for px in range(nx):
            for ly in range(patch):
                for lx in range(patch):
                    m = mag[py * step + ly, px * step + lx]
                    if m == 0.0:
                        continue
                    fo = ori[py * step + ly, px * step + lx] * (8.0 / two_pi)
                    ob0 = <Py_ssize_t>floor(fo)
                    wo1 = fo - floor(fo)
                    ob0 = ob0 % 8
                    ob1 = (ob0 + 1) % 8
                    for sy in range(2):
                        cy = c0[ly] + sy
                        if cy < 0 or cy > 3:
                            continue
                        wy = w1[ly] if sy == 1 else 1.0 - w1[ly]
                        for sx in range(2):
                            cx = c0[lx] + sx
                            if cx < 0 or cx > 3:
                                continue
                            wx = w1[lx] if sx == 1 else 1.0 - w1[lx]
                            base = m * wy * wx
                            hist[n, (cy * 4 + cx) * 8 + ob0] += base * (1.0 - wo1)
                            hist[n, (cy * 4 + cx) * 8 + ob1] += base * wo1
            n += 1
    return out_arr.astype(np.float32)
