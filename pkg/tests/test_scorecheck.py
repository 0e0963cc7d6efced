import numpy as np
import pytest

from mvkit.scorecheck import (
    GaussianLatentModel,
    analytic_denoiser,
    conditioning_gain,
    dm_loss,
    empirical_mmse_denoiser,
    marginal_log_density,
)


def standard_model(sigma_t=1.0):
    return GaussianLatentModel.single(0.0, 1.0, sigma_t)


def mixture_model():
    return GaussianLatentModel(
        weights=[0.5, 0.5], means=[-5.0, 5.0], stds=[0.5, 0.5], sigma_t=1.0
    )


class TestAnalyticDenoiser:
    def test_symmetry_at_origin(self):
        assert analytic_denoiser(standard_model(), 0.0) == pytest.approx(0.0)

    def test_closed_form_value(self):
        # posterior mean of z0 at z_t = 2 is 1, so predicted noise is 1
        assert analytic_denoiser(standard_model(), 2.0) == pytest.approx(1.0)

    def test_small_noise_limit(self):
        model = standard_model(sigma_t=1e-6)
        assert abs(analytic_denoiser(model, 1.7)) < 1e-5

    def test_matches_scaled_score(self):
        model = GaussianLatentModel.single(0.7, 1.3, 0.8)
        zs = np.linspace(-4, 4, 41)
        pred = analytic_denoiser(model, zs)
        score = -(zs - 0.7) / (1.3 ** 2 + 0.8 ** 2)
        assert np.max(np.abs(pred + 0.8 * score)) < 1e-12

    def test_mixture_matches_finite_difference_score(self):
        model = mixture_model()
        zs = np.linspace(-8, 8, 33)
        h = 1e-5
        fd_score = (marginal_log_density(model, zs + h) - marginal_log_density(model, zs - h)) / (
            2 * h
        )
        pred = analytic_denoiser(model, zs)
        assert np.max(np.abs(pred + model.sigma_t * fd_score)) < 1e-6

    def test_condition_label_checked(self):
        with pytest.raises(ValueError):
            analytic_denoiser(mixture_model(), 0.0, condition=2)


class TestModelValidation:
    def test_weights_must_sum(self):
        with pytest.raises(ValueError):
            GaussianLatentModel([0.5, 0.6], [0.0, 1.0], [1.0, 1.0], 1.0)

    def test_positive_scales(self):
        with pytest.raises(ValueError):
            GaussianLatentModel([1.0], [0.0], [0.0], 1.0)
        with pytest.raises(ValueError):
            GaussianLatentModel([1.0], [0.0], [1.0], 0.0)


class TestEmpiricalDenoiser:
    def test_bins_match_analytic_at_centers(self):
        binned = empirical_mmse_denoiser(standard_model(), 1_000_000, 40, seed=0)
        pop = binned.populated
        agree = np.abs(binned.mean_eps[pop] - binned.analytic_center[pop]) <= 3 * binned.stderr[pop]
        assert agree.mean() >= 0.95

    def test_two_seeds_both_pass(self):
        for seed in (1, 2):
            binned = empirical_mmse_denoiser(standard_model(), 200_000, 40, seed=seed)
            pop = binned.populated
            agree = (
                np.abs(binned.mean_eps[pop] - binned.analytic_bin_mean[pop])
                <= 3 * binned.residual_stderr[pop]
            )
            assert agree.mean() >= 0.95

    def test_tiny_noise_bins_near_zero(self):
        # the noise is uninformative, so every bin mean is zero up to its
        # own sampling error and the well-populated bins are near zero
        model = standard_model(sigma_t=1e-9)
        binned = empirical_mmse_denoiser(model, 100_000, 20, seed=3)
        pop = binned.populated
        assert np.all(np.abs(binned.mean_eps[pop]) <= 4 * binned.stderr[pop])
        heavy = binned.counts >= 1000
        assert np.max(np.abs(binned.mean_eps[heavy])) < 0.05

    def test_conditioned_bins(self):
        binned = empirical_mmse_denoiser(mixture_model(), 200_000, 40, seed=4, condition=1)
        pop = binned.populated
        agree = (
            np.abs(binned.mean_eps[pop] - binned.analytic_bin_mean[pop])
            <= 3 * binned.residual_stderr[pop]
        )
        assert agree.mean() >= 0.95

    def test_preconditions(self):
        with pytest.raises(ValueError):
            empirical_mmse_denoiser(standard_model(), 1000, 40, seed=0)
        with pytest.raises(ValueError):
            empirical_mmse_denoiser(standard_model(), 100_000, 10, seed=0)


class TestConditioningGain:
    def test_single_component_no_gain(self):
        model = standard_model()
        gain = conditioning_gain(model, 100_000, seed=5)
        assert gain.gain == pytest.approx(0.0, abs=1e-12)

    def test_separated_mixture_gain(self):
        # far-apart modes make the label nearly redundant, but the
        # conditional predictor still wins on the ambiguous samples
        gain = conditioning_gain(mixture_model(), 1_000_000, seed=6)
        assert gain.mse_conditional < gain.mse_unconditional

    def test_overlapping_mixture_strong_gain(self):
        model = GaussianLatentModel(
            weights=[0.5, 0.5], means=[-1.5, 1.5], stds=[1.0, 1.0], sigma_t=1.0
        )
        gain = conditioning_gain(model, 1_000_000, seed=7)
        assert gain.gain > 3 * gain.gain_stderr

    def test_nonnegative_up_to_noise(self):
        for seed in range(5):
            model = GaussianLatentModel(
                weights=[0.3, 0.7], means=[-1.0, 2.0], stds=[0.8, 1.2], sigma_t=0.7
            )
            gain = conditioning_gain(model, 200_000, seed=seed)
            assert gain.gain >= -3 * gain.gain_stderr


class TestDmLoss:
    def test_zero(self):
        assert dm_loss([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_unit(self):
        assert dm_loss([0.0], [1.0]) == 1.0

    def test_hand_value(self):
        assert dm_loss([1.0, 2.0], [2.0, 0.0]) == pytest.approx(5.0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            dm_loss([1.0, 2.0], [1.0])
