"""Numpy implementations of the per-pixel kernels (fallback backend).

Must agree with ``_ckernels.pyx``; both accumulate histogram votes in
row-major pixel order so the float sums match bit for bit.
"""

import math

import numpy as np

# (dy, dx) of neighbour i, clockwise from the top-left
NEIGHBOURS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))

_RAD2DEG = 180.0 / math.pi

# libm atan2, as the compiled kernel uses; numpy's SIMD arctan2 can differ by an ulp
_atan2 = np.frompyfunc(math.atan2, 2, 1)


def lbp_plane(gray: np.ndarray) -> np.ndarray:
    g = np.asarray(gray, dtype=np.int16)
    h, w = g.shape
    out = np.zeros((h, w), dtype=np.uint8)
    centre = g[1:-1, 1:-1]
    code = np.zeros_like(centre, dtype=np.int32)
    for i, (dy, dx) in enumerate(NEIGHBOURS):
        nb = g[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        code |= (nb >= centre).astype(np.int32) << i
    out[1:-1, 1:-1] = code
    return out


def gradients(gray: np.ndarray):
    """Central differences with replicated borders; returns (gx, gy) as float64."""
    g = np.asarray(gray, dtype=np.float64)
    padded = np.pad(g, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return gx, gy


def hog_cell_histograms(gray: np.ndarray, cell: int, bins: int) -> np.ndarray:
    g = np.asarray(gray)
    h, w = g.shape
    ncy, ncx = h // cell, w // cell
    gx, gy = gradients(g)
    gx = gx[: ncy * cell, : ncx * cell]
    gy = gy[: ncy * cell, : ncx * cell]
    mag = np.sqrt(gx * gx + gy * gy)
    ang = _atan2(gy, gx).astype(np.float64) * _RAD2DEG
    ang = np.where(ang < 0.0, ang + 180.0, ang)
    ang = np.where(ang >= 180.0, ang - 180.0, ang)
    bin_width = 180.0 / bins
    pos = ang / bin_width - 0.5
    b0 = np.floor(pos)
    frac = pos - b0
    b0 = b0.astype(np.int64)
    lo = np.mod(b0, bins)
    hi = np.mod(b0 + 1, bins)
    rows = np.arange(ncy * cell) // cell
    cols = np.arange(ncx * cell) // cell
    cell_idx = (rows[:, None] * ncx + cols[None, :]) * bins
    idx = np.stack([cell_idx + lo, cell_idx + hi], axis=-1).ravel()
    wts = np.stack([(1.0 - frac) * mag, frac * mag], axis=-1).ravel()
    hist = np.bincount(idx, weights=wts, minlength=ncy * ncx * bins)
    return hist.reshape(ncy, ncx, bins)
