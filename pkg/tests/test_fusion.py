import numpy as np
import pytest

from mvkit.errors import TrainingDivergedError
from mvkit.fusion import (
    NoisyViewModel,
    brute_force_optimal_weights,
    expected_mse,
    fuse,
    fusion_loss_and_grad,
    inverse_variance_weights,
    learn_view_weights,
    sample_views,
    spearman_rank_corr,
)
from mvkit.rng import generator


class TestInverseVarianceWeights:
    def test_equal_sigmas_uniform(self):
        assert inverse_variance_weights([1, 1, 1, 1]).tolist() == [0.25] * 4

    def test_one_two(self):
        assert np.allclose(inverse_variance_weights([1, 2]), [0.8, 0.2])

    def test_dominant_view(self):
        beta = inverse_variance_weights([1.0, 1e6])
        assert beta[0] == pytest.approx(1.0, abs=1e-11)
        assert beta[1] == pytest.approx(1e-12, rel=1e-6)

    def test_sum_one_positive(self):
        rng = generator(1, "ivw")
        for _ in range(30):
            sig = np.exp(rng.uniform(-2, 2, int(rng.integers(1, 7))))
            beta = inverse_variance_weights(sig)
            assert abs(beta.sum() - 1.0) <= 1e-12
            assert np.all(beta > 0)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            inverse_variance_weights([1.0, 0.0])
        with pytest.raises(ValueError):
            inverse_variance_weights([1.0, -2.0])


class TestExpectedMse:
    def test_single_view(self):
        assert expected_mse([1.0], [3.0], d=2) == pytest.approx(18.0)

    def test_hand_value(self):
        assert expected_mse([0.5, 0.5], [1.0, 1.0], d=1) == pytest.approx(0.5)

    def test_optimal_value_one_two(self):
        beta = inverse_variance_weights([1, 2])
        assert expected_mse(beta, [1, 2], d=1) == pytest.approx(0.8)

    def test_rejects_off_simplex(self):
        with pytest.raises(ValueError):
            expected_mse([0.7, 0.2], [1.0, 1.0])


class TestBruteForce:
    def test_symmetric(self):
        assert np.allclose(brute_force_optimal_weights([1.0, 1.0], 0.005), [0.5, 0.5])

    def test_matches_formula_two_views(self):
        got = brute_force_optimal_weights([1.0, 2.0], 0.001)
        assert np.allclose(got, [0.8, 0.2], atol=1e-12)

    def test_matches_formula_three_views(self):
        got = brute_force_optimal_weights([1.0, 2.0, 4.0], 0.005)
        want = inverse_variance_weights([1.0, 2.0, 4.0])
        assert np.max(np.abs(got - want)) <= 0.005

    def test_four_views(self):
        sig = [0.3, 1.0, 2.0, 5.0]
        got = brute_force_optimal_weights(sig, 0.01)
        want = inverse_variance_weights(sig)
        assert np.max(np.abs(got - want)) <= 0.01

    def test_oracle_never_beats_closed_form(self):
        rng = generator(2, "bf")
        for _ in range(10):
            m = int(rng.integers(2, 5))
            sig = np.exp(rng.uniform(np.log(0.1), np.log(10.0), m))
            beta = inverse_variance_weights(sig)
            oracle = brute_force_optimal_weights(sig, 0.005)
            assert expected_mse(beta, sig) <= expected_mse(oracle, sig) * (1 + 1e-12)

    def test_limits(self):
        with pytest.raises(ValueError):
            brute_force_optimal_weights([1.0] * 5, 0.01)
        with pytest.raises(ValueError):
            brute_force_optimal_weights([1.0, 1.0], 0.5)


class TestSampling:
    def test_deterministic(self):
        model = NoisyViewModel(np.linspace(0, 1, 3), [0.5, 1.5])
        a = sample_views(model, 100, seed=9)
        b = sample_views(model, 100, seed=9)
        assert np.array_equal(a, b)
        c = sample_views(model, 100, seed=10)
        assert not np.array_equal(a, c)

    def test_near_zero_noise(self):
        model = NoisyViewModel(np.array([2.0, -1.0]), [1e-9])
        s = sample_views(model, 10, seed=0)
        assert np.allclose(s, model.v_star, atol=1e-7)

    def test_empirical_std(self):
        model = NoisyViewModel(np.zeros(1), [2.0])
        s = sample_views(model, 100_000, seed=3)
        assert 1.96 <= s.std() <= 2.04

    def test_model_validation(self):
        with pytest.raises(ValueError):
            NoisyViewModel(np.zeros(2), [0.0])
        with pytest.raises(ValueError):
            NoisyViewModel(np.zeros(0), [1.0])


class TestLearnedWeights:
    def _model(self, sigmas, d=6, seed=0):
        v = generator(seed, "learn-test-vstar").uniform(-1, 1, d)
        return NoisyViewModel(v / np.linalg.norm(v), sigmas)

    def test_zero_steps_keeps_init(self):
        model = self._model([0.5, 1.0])
        samples = sample_views(model, 64, seed=1)
        learned = learn_view_weights(model, samples, steps=0)
        assert np.array_equal(learned.omega, np.ones(2))

    def test_gradient_matches_finite_differences(self):
        rng = generator(13, "learn-fd")
        model = self._model([0.3, 0.8, 2.0], seed=5)
        samples = sample_views(model, 50, seed=2)
        queries = model.v_star[None, :] + 0.01 * rng.standard_normal((50, model.dim))
        omega = rng.uniform(0.5, 1.5, 3)
        _, grad, _ = fusion_loss_and_grad(omega, queries, samples, model.v_star)
        fd = np.zeros(3)
        h = 1e-6
        for i in range(3):
            op = omega.copy(); op[i] += h
            om = omega.copy(); om[i] -= h
            fd[i] = (
                fusion_loss_and_grad(op, queries, samples, model.v_star)[0]
                - fusion_loss_and_grad(om, queries, samples, model.v_star)[0]
            ) / (2 * h)
        assert np.linalg.norm(grad - fd) / np.linalg.norm(fd) < 1e-5

    def test_unreliable_view_suppressed(self):
        model = self._model([0.1, 10.0])
        samples = sample_views(model, 256, seed=4)
        learned = learn_view_weights(model, samples, steps=2000, seed=4)
        assert learned.alpha_mean[0] > 0.9

    def test_non_finite_loss_raises(self):
        # squared magnitudes overflow, tripping the divergence guard
        model = NoisyViewModel(np.full(2, 1e200), [0.5, 1.0])
        samples = sample_views(model, 64, seed=5)
        with pytest.raises(TrainingDivergedError):
            learn_view_weights(model, samples, steps=5, seed=5)


def test_fuse_shapes():
    views = np.arange(24, dtype=float).reshape(4, 2, 3)
    out = fuse(views, [0.5, 0.5])
    assert out.shape == (4, 3)
    assert np.allclose(out, views.mean(axis=1))


def test_spearman():
    assert spearman_rank_corr([1, 2, 3], [10, 20, 30]) == 1.0
    assert spearman_rank_corr([1, 2, 3], [3, 2, 1]) == -1.0
    assert abs(spearman_rank_corr([1, 2, 3, 4], [2, 1, 4, 3])) < 1.0
