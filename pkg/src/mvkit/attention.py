"""View-weighted attention fusion, AdaLIN, and attention-map alignment.

The fusion path scores each view's key against a main-view query with a
learnable per-view weight and softmax-blends the values. The alignment path
treats the temporal and multi-view attention maps as operators in a
quadratic consistency energy; one gradient step on that energy is the
latent update, and the additive joint map is its first-order surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import AttentionMap
from .rng import generator

NONEXPANSIVE_MARGIN = 1e-6


def _check_finite(name, a):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")


def softmax(scores: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (max subtraction)."""
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def mv_attention(q, keys, values, omega):
    """Fuse per-view value tokens with view-weighted softmax attention.

    alpha[m] = softmax_m(omega[m] * <q, keys[m]>), fused = sum_m alpha[m] * values[m].

    Returns (fused, alpha); alpha is nonnegative and sums to 1.
    """
    q = np.asarray(q, dtype=np.float64)
    keys = np.atleast_2d(np.asarray(keys, dtype=np.float64))
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    omega = np.asarray(omega, dtype=np.float64)
    if q.ndim != 1:
        raise ValueError("q must be a single d-vector")
    m, d = keys.shape
    if values.shape != (m, d) or q.shape != (d,) or omega.shape != (m,):
        raise ValueError(
            f"shape mismatch: q {q.shape}, keys {keys.shape}, values {values.shape}, omega {omega.shape}"
        )
    if m < 1:
        raise ValueError("need at least one view")
    for name, a in (("q", q), ("keys", keys), ("values", values), ("omega", omega)):
        _check_finite(name, a)
    if np.any(omega <= 0.0):
        raise ValueError("omega entries must be > 0")
    alpha = softmax(omega * (keys @ q))
    fused = alpha @ values
    return fused, alpha


@dataclass(frozen=True)
class AdaLinParams:
    """Per-channel affine plus the instance/layer blend factor.

    rho = 1 is pure instance normalization, rho = 0 pure layer
    normalization; out-of-range rho values are clamped.
    """

    gamma: float | np.ndarray = 1.0
    beta: float | np.ndarray = 0.0
    rho: float = 0.9
    eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "rho", float(min(1.0, max(0.0, self.rho))))
        if self.eps <= 0.0:
            raise ValueError("eps must be > 0")


def adalin(x, params: AdaLinParams = AdaLinParams()) -> np.ndarray:
    """Adaptive layer-instance normalization of an (H, W, C) tensor.

    Blends a per-channel (instance) standardization over H*W with a global
    (layer) standardization over H*W*C, then applies gamma/beta.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError("expected an (H, W, C) tensor")
    _check_finite("x", x)
    mean_in = x.mean(axis=(0, 1), keepdims=True)
    var_in = x.var(axis=(0, 1), keepdims=True)
    a_in = (x - mean_in) / np.sqrt(var_in + params.eps)
    mean_ln = x.mean()
    var_ln = x.var()
    a_ln = (x - mean_ln) / np.sqrt(var_ln + params.eps)
    return params.gamma * (params.rho * a_in + (1.0 - params.rho) * a_ln) + params.beta


@dataclass(frozen=True)
class CrossAttentionParams:
    """Projection matrices for multi-head cross-attention (no biases)."""

    w_q: np.ndarray
    w_k: np.ndarray
    w_v: np.ndarray
    w_o: np.ndarray

    @classmethod
    def identity(cls, d: int) -> "CrossAttentionParams":
        eye = np.eye(d)
        return cls(eye, eye, eye, eye)

    @classmethod
    def random(cls, d: int, seed: int, scale: float | None = None) -> "CrossAttentionParams":
        rng = generator(seed, "cross-attention-params")
        if scale is None:
            scale = 1.0 / np.sqrt(d)
        mats = [scale * rng.standard_normal((d, d)) for _ in range(4)]
        return cls(*mats)


def cross_attend(query_tokens, context_tokens, heads: int, params: CrossAttentionParams) -> np.ndarray:
    """Multi-head scaled dot-product cross-attention, one output per query token."""
    q_in = np.atleast_2d(np.asarray(query_tokens, dtype=np.float64))
    c_in = np.atleast_2d(np.asarray(context_tokens, dtype=np.float64))
    n, d = q_in.shape
    p, dc = c_in.shape
    if dc != d:
        raise ValueError(f"query dim {d} != context dim {dc}")
    if heads < 1 or d % heads != 0:
        raise ValueError(f"token dim {d} not divisible by heads {heads}")
    _check_finite("query_tokens", q_in)
    _check_finite("context_tokens", c_in)
    dh = d // heads
    q = (q_in @ params.w_q).reshape(n, heads, dh)
    k = (c_in @ params.w_k).reshape(p, heads, dh)
    v = (c_in @ params.w_v).reshape(p, heads, dh)
    scores = np.einsum("nhd,phd->hnp", q, k) / np.sqrt(dh)
    alpha = softmax(scores)
    out = np.einsum("hnp,phd->nhd", alpha, v).reshape(n, d)
    return out @ params.w_o


def _as_square(a, name: str) -> np.ndarray:
    m = a.matrix if isinstance(a, AttentionMap) else np.asarray(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    return m


def _alignment_inputs(z, a_temp, a_mv, lam):
    z = np.asarray(z, dtype=np.float64)
    at = _as_square(a_temp, "a_temp")
    am = _as_square(a_mv, "a_mv")
    n = z.shape[0]
    if z.ndim != 1 or at.shape != (n, n) or am.shape != (n, n):
        raise ValueError("z, a_temp and a_mv dimensions do not match")
    if lam < 0.0:
        raise ValueError("lambda must be >= 0")
    return z, at, am


def alignment_energy(z, a_temp, a_mv, lam: float) -> float:
    """Consistency energy E(z) = 1/2 ||z - A_temp z||^2 + lam/2 ||z - A_mv z||^2."""
    z, at, am = _alignment_inputs(z, a_temp, a_mv, lam)
    rt = z - at @ z
    rm = z - am @ z
    return float(0.5 * (rt @ rt) + 0.5 * lam * (rm @ rm))


def alignment_energy_gradient(z, a_temp, a_mv, lam: float) -> np.ndarray:
    """grad E(z) = (I-A_temp)^T (I-A_temp) z + lam (I-A_mv)^T (I-A_mv) z."""
    z, at, am = _alignment_inputs(z, a_temp, a_mv, lam)
    rt = z - at @ z
    rm = z - am @ z
    return (rt - at.T @ rt) + lam * (rm - am.T @ rm)


def alignment_step(z, a_temp, a_mv, lam: float, eta: float | None = None) -> np.ndarray:
    """One gradient step z - eta * grad E(z) on the consistency energy.

    The default eta = 0.1 / (1 + lam) is safely below 2/L for
    nonexpansive maps (L <= 4 (1 + lam)), so the energy cannot increase.
    """
    if eta is None:
        eta = 0.1 / (1.0 + lam)
    if eta <= 0.0:
        raise ValueError("eta must be > 0")
    z, at, am = _alignment_inputs(z, a_temp, a_mv, lam)
    rt = z - at @ z
    rm = z - am @ z
    g = (rt - at.T @ rt) + lam * (rm - am.T @ rm)
    return z - eta * g


def build_joint_attention(a_temp, a_mv, lam: float) -> AttentionMap:
    """Additive alignment (A_temp + lam * A_mv) / (1 + lam).

    A convex combination, so row-stochasticity of both inputs carries over.
    """
    at = _as_square(a_temp, "a_temp")
    am = _as_square(a_mv, "a_mv")
    if at.shape != am.shape:
        raise ValueError(f"shape mismatch: {at.shape} vs {am.shape}")
    if lam < 0.0:
        raise ValueError("lambda must be >= 0")
    joint = (at + lam * am) / (1.0 + lam)
    stochastic = (
        isinstance(a_temp, AttentionMap)
        and isinstance(a_mv, AttentionMap)
        and a_temp.row_stochastic
        and a_mv.row_stochastic
    )
    return AttentionMap(joint, row_stochastic=stochastic)


def estimate_spectral_norm(a: np.ndarray, power_iters: int = 50) -> float:
    """Largest singular value via power iteration on A^T A.

    Runs at least ``power_iters`` rounds from a fixed-seed start vector,
    then keeps going until the estimate stabilizes to near machine
    precision (bounded at 100x the requested rounds).
    """
    if power_iters < 1:
        raise ValueError("power_iters must be >= 1")
    n = a.shape[1]
    v = generator(0, "spectral-norm-start", n).standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(100 * power_iters):
        w = a.T @ (a @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new_est = float(np.linalg.norm(a @ v))
        if it + 1 >= power_iters and abs(new_est - est) <= 1e-13 * max(1.0, new_est):
            return new_est
        est = new_est
    return est


def project_nonexpansive(a, power_iters: int = 50) -> AttentionMap:
    """Rescale a map so its spectral norm is at most 1 (+ a 1e-6 margin).

    Divides by max(1, estimate * (1 + 1e-6)); maps already inside the unit
    spectral ball are left untouched apart from that margin.
    """
    m = _as_square(a, "a")
    est = estimate_spectral_norm(m, power_iters)
    scale = max(1.0, est * (1.0 + NONEXPANSIVE_MARGIN))
    return AttentionMap(m / scale, row_stochastic=False)
