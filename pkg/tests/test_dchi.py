import numpy as np
import pytest

from hebert import dchi
from hebert.errors import DataError


class TestNoiseDistribution:
    def test_norm_mean_matches_gamma(self):
        params = dchi.NoiseParams(eta=175.0, dim=768, rng_seed=1)
        norms = np.linalg.norm(dchi.sample_noise(params, count=10_000), axis=1)
        expected = 768 / 175
        assert abs(norms.mean() - expected) <= 0.02 * expected

    def test_norm_moments_large_sample(self):
        params = dchi.NoiseParams(eta=175.0, dim=768, rng_seed=2)
        norms = np.linalg.norm(dchi.sample_noise(params, count=100_000), axis=1)
        mean, var = 768 / 175, 768 / 175**2
        assert abs(norms.mean() - mean) <= 0.01 * mean
        assert abs(norms.var() - var) <= 0.05 * var

    def test_direction_coordinate_means_vanish(self):
        params = dchi.NoiseParams(eta=100.0, dim=768, rng_seed=3)
        n = 10_000
        samples = dchi.sample_noise(params, count=n)
        dirs = samples / np.linalg.norm(samples, axis=1, keepdims=True)
        # per-coordinate std is ~1/sqrt(dim); allow 4 CLT sigmas across 768 coords
        clt_sigma = (1.0 / np.sqrt(768)) / np.sqrt(n)
        assert np.max(np.abs(dirs.mean(axis=0))) <= 4 * clt_sigma

    def test_direction_projection_uniform(self):
        # dot with a fixed unit vector has mean 0 within 3 CLT sigmas
        params = dchi.NoiseParams(eta=100.0, dim=768, rng_seed=4)
        n = 100_000
        samples = dchi.sample_noise(params, count=n)
        dirs = samples / np.linalg.norm(samples, axis=1, keepdims=True)
        e0 = np.zeros(768)
        e0[0] = 1.0
        dots = dirs @ e0
        clt_sigma = dots.std() / np.sqrt(n)
        assert abs(dots.mean()) <= 3 * clt_sigma + 1e-12

    def test_dim_one_signs_equiprobable(self):
        params = dchi.NoiseParams(eta=5.0, dim=1, rng_seed=5)
        samples = dchi.sample_noise(params, count=4000)
        pos = float(np.mean(samples[:, 0] > 0))
        # binomial 99.7% interval around 0.5 for n=4000
        assert abs(pos - 0.5) <= 3 * 0.5 / np.sqrt(4000)

    def test_monotone_in_eta(self):
        n50 = np.linalg.norm(
            dchi.sample_noise(dchi.NoiseParams(50.0, 768, 6), count=5000), axis=1
        ).mean()
        n175 = np.linalg.norm(
            dchi.sample_noise(dchi.NoiseParams(175.0, 768, 6), count=5000), axis=1
        ).mean()
        assert n50 > n175


class TestPrivatize:
    def test_large_eta_is_near_identity(self):
        params = dchi.NoiseParams(eta=1e9, dim=32, rng_seed=7)
        y = np.linspace(-1, 1, 32)
        assert np.max(np.abs(dchi.privatize(y, params) - y)) < 1e-5

    def test_zero_vector_returns_noise(self):
        params = dchi.NoiseParams(eta=50.0, dim=16, rng_seed=8)
        noise = dchi.sample_noise(params)
        out = dchi.privatize(np.zeros(16), params)
        assert np.array_equal(out, noise)

    def test_composition_under_seed(self):
        # privatize(y) - y recovers the seeded noise draw (up to the half-ulp
        # the add/subtract round trip costs)
        params = dchi.NoiseParams(eta=75.0, dim=24, rng_seed=9)
        y = np.linspace(-0.5, 0.5, 24)
        got = dchi.privatize(y, params) - y
        assert np.allclose(got, dchi.sample_noise(params), rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        params = dchi.NoiseParams(eta=75.0, dim=24, rng_seed=0)
        with pytest.raises(DataError):
            dchi.privatize(np.zeros(16), params)

    def test_param_validation(self):
        with pytest.raises(DataError):
            dchi.NoiseParams(eta=0.0, dim=4)
        with pytest.raises(DataError):
            dchi.NoiseParams(eta=1.0, dim=0)
