# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel kernels. Semantics mirror ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, sqrt, floor, M_PI

cnp.import_array()

cdef double RAD2DEG = 180.0 / M_PI


def lbp_plane(const unsigned char[:, ::1] g):
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1], y, x
    cdef int c, code
    out = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            c = g[y, x]
            code = 0
            if g[y - 1, x - 1] >= c: code |= 1
            if g[y - 1, x] >= c: code |= 2
            if g[y - 1, x + 1] >= c: code |= 4
            if g[y, x + 1] >= c: code |= 8
            if g[y + 1, x + 1] >= c: code |= 16
            if g[y + 1, x] >= c: code |= 32
            if g[y + 1, x - 1] >= c: code |= 64
            if g[y, x - 1] >= c: code |= 128
            o[y, x] = code
    return out


def hog_cell_histograms(const unsigned char[:, ::1] g, int cell, int bins):
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1]
    cdef Py_ssize_t ncy = h // cell, ncx = w // cell
    cdef Py_ssize_t y, x, xl, xr, yu, yd, base
    cdef double gx, gy, mag, ang, pos, frac, bw = 180.0 / bins
    cdef long b0, lo, hi
    hist = np.zeros(ncy * ncx * bins, dtype=np.float64)
    cdef double[::1] hv = hist
    for y in range(ncy * cell):
        yu = y - 1 if y > 0 else 0
        yd = y + 1 if y < h - 1 else h - 1
        for x in range(ncx * cell):
            xl = x - 1 if x > 0 else 0
            xr = x + 1 if x < w - 1 else w - 1
            gx = <double>g[y, xr] - <double>g[y, xl]
            gy = <double>g[yd, x] - <double>g[yu, x]
            mag = sqrt(gx * gx + gy * gy)
            ang = atan2(gy, gx) * RAD2DEG
            if ang < 0.0:
                ang = ang + 180.0
            if ang >= 180.0:
                ang = ang - 180.0
            pos = ang / bw - 0.5
            frac = floor(pos)
            b0 = <long>frac
            frac = pos - frac
            lo = b0 % bins
            if lo < 0:
                lo += bins
            hi = (b0 + 1) % bins
            if hi < 0:
                hi += bins
            base = ((y // cell) * ncx + (x // cell)) * bins
            hv[base + lo] += (1.0 - frac) * mag
            hv[base + hi] += frac * mag
    return hist.reshape(ncy, ncx, bins)
