# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels. Same contracts as ``_pykernels``; plain loops, no BLAS."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def conv2d_forward(double[:, :, ::1] x, double[:, :, :, ::1] w,
                   double[::1] b, int stride, int pad):
    cdef int k = w.shape[0]
    cdef int h = x.shape[0], wd = x.shape[1], cin = x.shape[2]
    cdef int cout = w.shape[3]
    cdef int ho = (h + 2 * pad - k) // stride + 1
    cdef int wo = (wd + 2 * pad - k) // stride + 1
    out = np.empty((ho, wo, cout))
    cdef double[:, :, ::1] y = out
    cdef int i, j, o, a, c, d, si, sj
    cdef double acc
    for i in range(ho):
        for j in range(wo):
            for o in range(cout):
                acc = b[o]
                for a in range(k):
                    si = i * stride + a - pad
                    if si < 0 or si >= h:
                        continue
                    for c in range(k):
                        sj = j * stride + c - pad
                        if sj < 0 or sj >= wd:
                            continue
                        for d in range(cin):
                            acc += x[si, sj, d] * w[a, c, d, o]
                y[i, j, o] = acc
    return out


def conv2d_input_grad(double[:, :, ::1] gy, double[:, :, :, ::1] w,
                      int stride, int pad, int in_h, int in_w):
    cdef int k = w.shape[0]
    cdef int ho = gy.shape[0], wo = gy.shape[1], cout = gy.shape[2]
    cdef int cin = w.shape[2]
    out = np.zeros((in_h, in_w, cin))
    cdef double[:, :, ::1] gx = out
    cdef int i, j, o, a, c, d, si, sj
    cdef double g
    for i in range(ho):
        for j in range(wo):
            for o in range(cout):
                g = gy[i, j, o]
                for a in range(k):
                    si = i * stride + a - pad
                    if si < 0 or si >= in_h:
                        continue
                    for c in range(k):
                        sj = j * stride + c - pad
                        if sj < 0 or sj >= in_w:
                            continue
                        for d in range(cin):
                            gx[si, sj, d] += g * w[a, c, d, o]
    return out


def conv2d_param_grad(double[:, :, ::1] x, double[:, :, ::1] gy,
                      int stride, int pad, int k):
    cdef int h = x.shape[0], wd = x.shape[1], cin = x.shape[2]
    cdef int ho = gy.shape[0], wo = gy.shape[1], cout = gy.shape[2]
    gw_arr = np.zeros((k, k, cin, cout))
    gb_arr = np.zeros(cout)
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef int i, j, o, a, c, d, si, sj
    cdef double g
    for i in range(ho):
        for j in range(wo):
            for o in range(cout):
                g = gy[i, j, o]
                gb[o] += g
                for a in range(k):
                    si = i * stride + a - pad
                    if si < 0 or si >= h:
                        continue
                    for c in range(k):
                        sj = j * stride + c - pad
                        if sj < 0 or sj >= wd:
                            continue
                        for d in range(cin):
                            gw[a, c, d, o] += x[si, sj, d] * g
    return gw_arr, gb_arr


def correlate_maps(double[:, :, ::1] fmap, double[:, ::1] kernels):
    cdef int h = fmap.shape[0], w = fmap.shape[1], d = fmap.shape[2]
    cdef int p = kernels.shape[0]
    out = np.empty((p, h, w))
    cdef double[:, :, ::1] maps = out
    cdef int i, j, q, e
    cdef double acc
    for q in range(p):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for e in range(d):
                    acc += fmap[i, j, e] * kernels[q, e]
                maps[q, i, j] = acc
    return out


def box3_sum(double[:, :, ::1] maps):
    cdef int b = maps.shape[0], h = maps.shape[1], w = maps.shape[2]
    out = np.zeros((b, h, w))
    cdef double[:, :, ::1] dst = out
    cdef int q, i, j, a, c, si, sj
    cdef double acc
    for q in range(b):
        for i in range(h):
            for j in range(w):
                acc = 0.0
                for a in range(-1, 2):
                    si = i + a
                    if si < 0 or si >= h:
                        continue
                    for c in range(-1, 2):
                        sj = j + c
                        if sj < 0 or sj >= w:
                            continue
                        acc += maps[q, si, sj]
                dst[q, i, j] = acc
    return out
