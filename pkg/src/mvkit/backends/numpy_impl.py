"""Pure-numpy build of the hot kernels.

Reference semantics for the numba build in `numba_impl`; both must keep
identical signatures. Coordinate convention everywhere: ``x`` is the column
index, ``y`` the row index of an ``(H, W, C)`` pixel array.
"""

from __future__ import annotations

import numpy as np


def channel_moments(pixels: np.ndarray) -> np.ndarray:
    """Per-channel raw moments of an (H, W, C) array.

    Returns a (C, 3) array of [total mass, sum of x*I, sum of y*I].
    """
    h, w, _ = pixels.shape
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    out = np.empty((pixels.shape[2], 3), dtype=np.float64)
    out[:, 0] = np.einsum("hwc->c", pixels)
    out[:, 1] = np.einsum("hwc,w->c", pixels, xs)
    out[:, 2] = np.einsum("hwc,h->c", pixels, ys)
    return out


def centroid_backprop(
    h: int,
    w: int,
    cx: np.ndarray,
    cy: np.ndarray,
    inv_mass: np.ndarray,
    coeff_x: np.ndarray,
    coeff_y: np.ndarray,
) -> np.ndarray:
    """Pixel gradient of per-channel centroid losses.

    out[y, x, c] = inv_mass[c] * (coeff_x[c]*(x - cx[c]) + coeff_y[c]*(y - cy[c]))

    where coeff absorbs the upstream derivative w.r.t. the centroid.
    """
    xs = np.arange(w, dtype=np.float64)[None, :, None]
    ys = np.arange(h, dtype=np.float64)[:, None, None]
    return inv_mass * (coeff_x * (xs - cx) + coeff_y * (ys - cy))


def sq_diff_sum(a: np.ndarray, b: np.ndarray) -> float:
    d = (a - b).ravel()
    return float(d @ d)


def masked_sq_diff_sum(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    d = (mask[:, :, None] * (a - b)).ravel()
    return float(d @ d)


def diff_grad(a: np.ndarray, b: np.ndarray, scale: float) -> np.ndarray:
    """Scaled elementwise difference, the gradient of weighted squared-difference terms."""
    return scale * (a - b)


def masked_diff_grad(a: np.ndarray, b: np.ndarray, mask: np.ndarray, scale: float) -> np.ndarray:
    return scale * (mask * mask)[:, :, None] * (a - b)


def render_blobs(x: np.ndarray, y: np.ndarray, peak: np.ndarray, h: int, w: int, sigma: float) -> np.ndarray:
    """Isotropic Gaussian blob per channel: out[:, :, j] peaks at (x[j], y[j])."""
    xs = np.arange(w, dtype=np.float64)[None, :, None]
    ys = np.arange(h, dtype=np.float64)[:, None, None]
    d2 = (xs - x) ** 2 + (ys - y) ** 2
    return peak * np.exp(-d2 / (2.0 * sigma * sigma))


def add_soft_segment(
    img: np.ndarray,
    x0: float,
    y0: float,
    x1: float,
    y1: float,
    intensity: float,
    sigma: float,
) -> None:
    """Add a Gaussian-cross-section line segment to an (H, W) image in place."""
    h, w = img.shape
    xs = np.arange(w, dtype=np.float64)[None, :]
    ys = np.arange(h, dtype=np.float64)[:, None]
    vx = x1 - x0
    vy = y1 - y0
    len2 = vx * vx + vy * vy
    if len2 == 0.0:
        d2 = (xs - x0) ** 2 + (ys - y0) ** 2
    else:
        t = np.clip(((xs - x0) * vx + (ys - y0) * vy) / len2, 0.0, 1.0)
        d2 = (xs - x0 - t * vx) ** 2 + (ys - y0 - t * vy) ** 2
    img += intensity * np.exp(-d2 / (2.0 * sigma * sigma))
