"""Numba ``@njit`` build of the hot kernels.

Signatures match `numpy_impl`. All reductions accumulate left to right in
plain loops, no fastmath, so results are deterministic for a given input.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def channel_moments(pixels: np.ndarray) -> np.ndarray:
    h, w, c = pixels.shape
    out = np.zeros((c, 3), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for k in range(c):
                v = pixels[i, j, k]
                out[k, 0] += v
                out[k, 1] += j * v
                out[k, 2] += i * v
    return out


@njit(cache=True)
def centroid_backprop(h, w, cx, cy, inv_mass, coeff_x, coeff_y):
    c = cx.shape[0]
    out = np.empty((h, w, c), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            for k in range(c):
                out[i, j, k] = inv_mass[k] * (
                    coeff_x[k] * (j - cx[k]) + coeff_y[k] * (i - cy[k])
                )
    return out


@njit(cache=True)
def sq_diff_sum(a, b):
    af = a.ravel()
    bf = b.ravel()
    acc = 0.0
    for i in range(af.shape[0]):
        d = af[i] - bf[i]
        acc += d * d
    return acc


@njit(cache=True)
def masked_sq_diff_sum(a, b, mask):
    h, w, c = a.shape
    acc = 0.0
    for i in range(h):
        for j in range(w):
            m = mask[i, j]
            for k in range(c):
                d = m * (a[i, j, k] - b[i, j, k])
                acc += d * d
    return acc


@njit(cache=True)
def diff_grad(a, b, scale):
    return scale * (a - b)


@njit(cache=True)
def masked_diff_grad(a, b, mask, scale):
    h, w, c = a.shape
    out = np.empty((h, w, c), dtype=np.float64)
    for i in range(h):
        for j in range(w):
            m2 = mask[i, j] * mask[i, j]
            for k in range(c):
                out[i, j, k] = scale * m2 * (a[i, j, k] - b[i, j, k])
    return out


@njit(cache=True)
def render_blobs(x, y, peak, h, w, sigma):
    n = x.shape[0]
    out = np.empty((h, w, n), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma * sigma)
    for i in range(h):
        for j in range(w):
            for k in range(n):
                dx = j - x[k]
                dy = i - y[k]
                out[i, j, k] = peak[k] * np.exp(-(dx * dx + dy * dy) * inv)
    return out


@njit(cache=True)
def add_soft_segment(img, x0, y0, x1, y1, intensity, sigma):
    h, w = img.shape
    vx = x1 - x0
    vy = y1 - y0
    len2 = vx * vx + vy * vy
    inv = 1.0 / (2.0 * sigma * sigma)
    for i in range(h):
        for j in range(w):
            if len2 == 0.0:
                dx = j - x0
                dy = i - y0
            else:
                t = ((j - x0) * vx + (i - y0) * vy) / len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
                dx = j - x0 - t * vx
                dy = i - y0 - t * vy
            img[i, j] += intensity * np.exp(-(dx * dx + dy * dy) * inv)
