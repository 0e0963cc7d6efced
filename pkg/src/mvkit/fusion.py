"""Inverse-variance fusion of noisy per-view features.

Each view delivers the canonical feature plus isotropic Gaussian noise of a
per-view level. The closed-form optimal linear fusion weights are inversely
proportional to the noise variances; a grid-search oracle confirms them, and
a small trainer shows that learned attention weights recover the same
reliability ordering.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attention import softmax
from .errors import TrainingDivergedError
from .rng import generator


@dataclass(frozen=True)
class NoisyViewModel:
    """Canonical feature observed through M independent noisy views."""

    v_star: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v_star", np.asarray(self.v_star, dtype=np.float64))
        object.__setattr__(self, "sigmas", np.asarray(self.sigmas, dtype=np.float64))
        if self.v_star.ndim != 1 or self.v_star.size < 1:
            raise ValueError("v_star must be a d-vector with d >= 1")
        if self.sigmas.ndim != 1 or self.sigmas.size < 1:
            raise ValueError("sigmas must have at least one entry")
        if not np.all(np.isfinite(self.sigmas)) or np.any(self.sigmas <= 0.0):
            raise ValueError("sigmas must be finite and > 0")

    @property
    def view_count(self) -> int:
        return self.sigmas.size

    @property
    def dim(self) -> int:
        return self.v_star.size


def inverse_variance_weights(sigmas) -> np.ndarray:
    """MSE-optimal fusion weights: beta_m proportional to sigma_m^-2, summing to 1."""
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if not np.all(np.isfinite(sigmas)) or np.any(sigmas <= 0.0):
        raise ValueError("sigmas must be finite and > 0")
    inv = sigmas ** -2.0
    return inv / inv.sum()


def expected_mse(beta, sigmas, d: int = 1) -> float:
    """Expected squared fusion error d * sum(beta_m^2 sigma_m^2) of a unit-sum estimator."""
    beta = np.asarray(beta, dtype=np.float64)
    sigmas = np.asarray(sigmas, dtype=np.float64)
    if beta.shape != sigmas.shape:
        raise ValueError("beta and sigmas must have matching length")
    if abs(beta.sum() - 1.0) > 1e-9:
        raise ValueError(f"beta must sum to 1, got {beta.sum()!r}")
    return float(d * np.sum(beta * beta * sigmas * sigmas))


def brute_force_optimal_weights(sigmas, grid_step: float) -> np.ndarray:
    """Exhaustive simplex grid search minimizing the expected fusion error.

    Oracle for the closed form; only small view counts are supported.
    Ties resolve to the lexicographically smallest weight vector.
    """
    sigmas = np.asarray(sigmas, dtype=np.float64)
    m = sigmas.size
    if m > 4:
        raise ValueError(f"grid search supports at most 4 views, got {m}")
    if not 0.0 < grid_step <= 0.01:
        raise ValueError("grid_step must be in (0, 0.01]")
    if not np.all(np.isfinite(sigmas)) or np.any(sigmas <= 0.0):
        raise ValueError("sigmas must be finite and > 0")
    k = int(round(1.0 / grid_step))
    s2 = sigmas * sigmas
    if m == 1:
        return np.array([1.0])

    best_mse = np.inf
    best = None
    if m == 2:
        k0 = np.arange(k + 1, dtype=np.float64)
        beta = np.stack([k0, k - k0], axis=1) / k
        mse = beta * beta @ s2
        i = int(np.argmin(mse))
        return beta[i]
    # m in (3, 4): iterate the leading coordinates, vectorize the last two.
    lead_counts = [()] if m == 3 else [(k0,) for k0 in range(k + 1)]
    for lead in lead_counts:
        rem0 = k - sum(lead)
        for k1 in range(rem0 + 1):
            rem = rem0 - k1
            k2 = np.arange(rem + 1, dtype=np.float64)
            k3 = rem - k2
            cols = [np.full(rem + 1, float(c)) for c in (*lead, k1)]
            beta = np.stack([*cols, k2, k3], axis=1) / k
            mse = beta * beta @ s2
            i = int(np.argmin(mse))
            if mse[i] < best_mse:
                best_mse = float(mse[i])
                best = beta[i]
    return best


def sample_views(model: NoisyViewModel, count: int, seed: int) -> np.ndarray:
    """Draw (count, M, d) noisy view features, deterministic in the seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = generator(seed, "view-samples")
    eps = rng.standard_normal((count, model.view_count, model.dim))
    return model.v_star[None, None, :] + eps * model.sigmas[None, :, None]


def fuse(views, beta) -> np.ndarray:
    """Linear fusion sum_m beta_m * views[..., m, :]."""
    views = np.asarray(views, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    return np.einsum("...md,m->...d", views, beta)


def fusion_loss_and_grad(omega, queries, views, v_star):
    """Mean squared fusion error of attention with weights omega, and its gradient.

    queries: (N, d), views: (N, M, d) used as both keys and values. The
    gradient is the closed-form softmax derivative; finite differences agree
    to ~1e-6 relative.
    """
    omega = np.asarray(omega, dtype=np.float64)
    scores = np.einsum("nd,nmd->nm", queries, views)
    alpha = softmax(omega[None, :] * scores)
    fused = np.einsum("nm,nmd->nd", alpha, views)
    resid = fused - v_star[None, :]
    n = resid.shape[0]
    loss = float(np.sum(resid * resid) / n)
    # d loss / d omega_m = (2/N) sum_i s_im alpha_im <resid_i, views_im - fused_i>
    inner = np.einsum("nd,nmd->nm", resid, views - fused[:, None, :])
    grad = 2.0 / n * np.einsum("nm,nm,nm->m", scores, alpha, inner)
    return loss, grad, alpha


@dataclass(frozen=True)
class LearnedWeights:
    omega: np.ndarray
    alpha_mean: np.ndarray
    loss: float


def learn_view_weights(
    model: NoisyViewModel,
    samples: np.ndarray,
    steps: int,
    lr: float = 0.05,
    seed: int = 0,
    probe_std: float = 0.01,
) -> LearnedWeights:
    """Fit per-view attention weights by gradient descent on the fusion error.

    Queries are the canonical feature plus a small probe perturbation; keys
    and values are the noisy views themselves, so high score similarity
    tracks view reliability. Raises TrainingDivergedError on a non-finite
    loss (reduce lr).
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[1] != model.view_count or samples.shape[2] != model.dim:
        raise ValueError("samples must have shape (count, M, d) matching the model")
    rng = generator(seed, "probe")
    queries = model.v_star[None, :] + probe_std * rng.standard_normal((samples.shape[0], model.dim))
    omega = np.ones(model.view_count)
    loss, grad, alpha = fusion_loss_and_grad(omega, queries, samples, model.v_star)
    for _ in range(steps):
        omega = omega - lr * grad
        loss, grad, alpha = fusion_loss_and_grad(omega, queries, samples, model.v_star)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"fusion loss became non-finite (lr={lr}); try a smaller learning rate"
            )
    return LearnedWeights(omega=omega, alpha_mean=alpha.mean(axis=0), loss=loss)


def spearman_rank_corr(a, b) -> float:
    """Spearman correlation of two equal-length vectors (no tie handling)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ra = np.argsort(np.argsort(a)).astype(np.float64)
    rb = np.argsort(np.argsort(b)).astype(np.float64)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = np.sqrt((ra @ ra) * (rb @ rb))
    return float(ra @ rb / denom) if denom > 0 else 0.0
