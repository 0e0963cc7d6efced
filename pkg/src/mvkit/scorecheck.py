"""Numerical verification of the MMSE denoiser on tractable Gaussian cases.

For a scalar Gaussian-mixture prior corrupted with additive Gaussian noise,
the squared-loss-optimal noise predictor is the conditional expectation
E[eps | z_t], available in closed form. The routines here compare that
closed form against the binned empirical minimizer and measure how much
revealing the mixture component (the conditioning signal) helps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import generator


@dataclass(frozen=True)
class GaussianLatentModel:
    """Scalar mixture prior z0 ~ sum_k w_k N(mu_k, s_k^2), noised to z_t = z0 + sigma_t eps."""

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray
    sigma_t: float

    def __post_init__(self):
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=np.float64))
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=np.float64))
        k = self.weights.size
        if k < 1 or self.means.shape != (k,) or self.stds.shape != (k,):
            raise ValueError("weights, means and stds must be equal-length vectors")
        if np.any(self.weights <= 0.0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must be positive and sum to 1")
        if np.any(self.stds <= 0.0) or self.sigma_t <= 0.0:
            raise ValueError("component stds and sigma_t must be > 0")

    @classmethod
    def single(cls, mu0: float, s0: float, sigma_t: float) -> "GaussianLatentModel":
        return cls(np.array([1.0]), np.array([mu0]), np.array([s0]), sigma_t)

    @property
    def component_count(self) -> int:
        return self.weights.size

    def prior_variance(self) -> float:
        mean = float(self.weights @ self.means)
        second = float(self.weights @ (self.stds ** 2 + self.means ** 2))
        return second - mean * mean

    def total_std(self) -> float:
        return float(np.sqrt(self.prior_variance() + self.sigma_t ** 2))

    def sample(self, count: int, seed: int):
        """Draw (labels, z0, eps, z_t) with the fixed derived stream."""
        rng = generator(seed, "latent-samples")
        labels = rng.choice(self.component_count, size=count, p=self.weights)
        z0 = self.means[labels] + self.stds[labels] * rng.standard_normal(count)
        eps = rng.standard_normal(count)
        z_t = z0 + self.sigma_t * eps
        return labels, z0, eps, z_t


def _check_condition(model: GaussianLatentModel, condition):
    if condition is not None and not 0 <= condition < model.component_count:
        raise ValueError(f"unknown component label {condition!r}")


def analytic_denoiser(model: GaussianLatentModel, z_t, condition: int | None = None):
    """Conditional expectation E[eps | z_t] (optionally given the component label).

    Per component, E[z0 | z_t] = (s^2 z_t + sigma_t^2 mu) / (s^2 + sigma_t^2)
    and E[eps | z_t] = (z_t - E[z0 | z_t]) / sigma_t; without the label the
    components are mixed with their posterior responsibilities.
    """
    _check_condition(model, condition)
    z = np.asarray(z_t, dtype=np.float64)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    s2 = model.stds ** 2
    var_t = model.sigma_t ** 2
    # per-component posterior mean of eps: sigma_t (z - mu_k) / (s_k^2 + sigma_t^2)
    per_comp = model.sigma_t * (z[:, None] - model.means[None, :]) / (s2 + var_t)[None, :]
    if condition is not None:
        out = per_comp[:, condition]
    else:
        log_resp = (
            np.log(model.weights)[None, :]
            - 0.5 * np.log(2.0 * np.pi * (s2 + var_t))[None, :]
            - 0.5 * (z[:, None] - model.means[None, :]) ** 2 / (s2 + var_t)[None, :]
        )
        log_resp -= log_resp.max(axis=1, keepdims=True)
        resp = np.exp(log_resp)
        resp /= resp.sum(axis=1, keepdims=True)
        out = np.sum(resp * per_comp, axis=1)
    return float(out[0]) if scalar else out


def marginal_log_density(model: GaussianLatentModel, z_t):
    """log p(z_t) of the noised marginal; the denoiser equals -sigma_t * its gradient."""
    z = np.atleast_1d(np.asarray(z_t, dtype=np.float64))
    var = model.stds ** 2 + model.sigma_t ** 2
    log_terms = (
        np.log(model.weights)[None, :]
        - 0.5 * np.log(2.0 * np.pi * var)[None, :]
        - 0.5 * (z[:, None] - model.means[None, :]) ** 2 / var[None, :]
    )
    peak = log_terms.max(axis=1, keepdims=True)
    return (peak[:, 0] + np.log(np.exp(log_terms - peak).sum(axis=1)))


@dataclass(frozen=True)
class BinnedDenoiser:
    """Per-bin empirical conditional means of eps with matching analytic values.

    ``populated`` marks bins with at least two samples (a standard error
    needs that many); empty and singleton bins are excluded from checks.
    ``analytic_bin_mean`` averages the analytic prediction over the bin's
    own samples, which makes mean_eps - analytic_bin_mean exactly zero-mean;
    ``residual_stderr`` is the matching standard error.
    """

    edges: np.ndarray
    centers: np.ndarray
    counts: np.ndarray
    mean_eps: np.ndarray
    stderr: np.ndarray
    analytic_center: np.ndarray
    analytic_bin_mean: np.ndarray
    residual_stderr: np.ndarray
    populated: np.ndarray


def empirical_mmse_denoiser(
    model: GaussianLatentModel,
    sample_count: int,
    bin_count: int,
    seed: int,
    condition: int | None = None,
) -> BinnedDenoiser:
    """Binned empirical minimizer of the squared noise-prediction loss.

    Bins z_t over [-5, 5] total standard deviations and returns the per-bin
    mean of eps, which is the per-bin least-squares optimal constant
    predictor.
    """
    if sample_count < 100_000:
        raise ValueError("sample_count must be at least 1e5")
    if bin_count < 20:
        raise ValueError("bin_count must be at least 20")
    _check_condition(model, condition)
    labels, _, eps, z_t = model.sample(sample_count, seed)
    if condition is not None:
        keep = labels == condition
        eps = eps[keep]
        z_t = z_t[keep]
    lim = 5.0 * model.total_std()
    edges = np.linspace(-lim, lim, bin_count + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    idx = np.digitize(z_t, edges) - 1
    inside = (idx >= 0) & (idx < bin_count)
    idx = idx[inside]
    eps = eps[inside]
    pred = analytic_denoiser(model, z_t[inside], condition)

    counts = np.bincount(idx, minlength=bin_count)
    sum_eps = np.bincount(idx, weights=eps, minlength=bin_count)
    sum_eps2 = np.bincount(idx, weights=eps * eps, minlength=bin_count)
    resid = eps - pred
    sum_pred = np.bincount(idx, weights=pred, minlength=bin_count)
    sum_resid2 = np.bincount(idx, weights=resid * resid, minlength=bin_count)

    populated = counts >= 2
    n = np.where(counts > 0, counts, 1).astype(np.float64)
    mean_eps = sum_eps / n
    mean_pred = sum_pred / n
    var_eps = np.maximum(sum_eps2 / n - mean_eps ** 2, 0.0)
    mean_resid2 = np.maximum(sum_resid2 / n - (mean_eps - mean_pred) ** 2, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        stderr = np.where(populated, np.sqrt(var_eps * n / np.maximum(n - 1, 1) / n), np.inf)
        residual_stderr = np.where(
            populated, np.sqrt(mean_resid2 * n / np.maximum(n - 1, 1) / n), np.inf
        )
    return BinnedDenoiser(
        edges=edges,
        centers=centers,
        counts=counts,
        mean_eps=mean_eps,
        stderr=stderr,
        analytic_center=np.asarray(analytic_denoiser(model, centers, condition)),
        analytic_bin_mean=mean_pred,
        residual_stderr=residual_stderr,
        populated=populated,
    )


@dataclass(frozen=True)
class ConditioningGain:
    """Monte-Carlo comparison of conditional vs unconditional denoiser error."""

    mse_conditional: float
    mse_unconditional: float
    gain_stderr: float

    @property
    def gain(self) -> float:
        return self.mse_unconditional - self.mse_conditional


def conditioning_gain(model: GaussianLatentModel, sample_count: int, seed: int) -> ConditioningGain:
    """Empirical squared error of the component-aware vs component-blind denoiser.

    Both predictors are evaluated on the same samples; the conditional one
    can only be better up to Monte-Carlo error.
    """
    labels, _, eps, z_t = model.sample(sample_count, seed)
    pred_u = analytic_denoiser(model, z_t)
    pred_c = np.empty_like(pred_u)
    for k in range(model.component_count):
        sel = labels == k
        if np.any(sel):
            pred_c[sel] = analytic_denoiser(model, z_t[sel], condition=k)
    err_u = (eps - pred_u) ** 2
    err_c = (eps - pred_c) ** 2
    diff = err_u - err_c
    stderr = float(diff.std(ddof=1) / np.sqrt(diff.size))
    return ConditioningGain(
        mse_conditional=float(err_c.mean()),
        mse_unconditional=float(err_u.mean()),
        gain_stderr=stderr,
    )


def dm_loss(eps_pred, eps) -> float:
    """Squared Euclidean distance between predicted and true noise."""
    a = np.asarray(eps_pred, dtype=np.float64)
    b = np.asarray(eps, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = (a - b).ravel()
    return float(d @ d)
