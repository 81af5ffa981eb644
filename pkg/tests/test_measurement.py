import math

import numpy as np
import pytest

from mrfamp.errors import InvalidSizeError, ShapeError, ZeroSignalError
from mrfamp.measurement import (
    MeasurementModel,
    calibrate_noise,
    expected_noise_variance,
    measure,
    n_measurements,
    sample_matrix,
)


class TestMatrix:
    def test_entry_variance(self):
        A = sample_matrix(500, 2000, seed=1)
        assert A.shape == (500, 2000)
        assert abs(A.mean()) < 1e-3
        np.testing.assert_allclose(A.var() * 500, 1.0, rtol=0.05)

    def test_column_norms(self):
        A = sample_matrix(1000, 300, seed=2)
        norms = np.sum(A**2, axis=0)
        np.testing.assert_allclose(norms.mean(), 1.0, rtol=0.01)
        assert np.all(np.abs(norms - 1) < 0.3)

    def test_deterministic(self):
        np.testing.assert_array_equal(sample_matrix(7, 11, seed=5), sample_matrix(7, 11, seed=5))
        assert not np.array_equal(sample_matrix(7, 11, seed=5), sample_matrix(7, 11, seed=6))

    def test_invalid_size(self):
        with pytest.raises(InvalidSizeError):
            sample_matrix(0, 4)

    def test_model_delta(self):
        m = MeasurementModel(sample_matrix(4, 16, seed=0), 0.1)
        assert (m.n, m.signal_len, m.delta) == (4, 16, 0.25)
        with pytest.raises(ValueError):
            MeasurementModel(np.zeros((2, 2)), -1.0)


class TestCalibration:
    def test_infinite_snr(self):
        assert calibrate_noise(np.eye(3), np.ones(3), math.inf) == 0.0

    def test_zero_db(self, rng):
        A = sample_matrix(50, 100, seed=3)
        beta = rng.integers(0, 2, 100)
        signal = A @ beta
        assert calibrate_noise(A, beta, 0.0) == pytest.approx(signal @ signal / 50, rel=1e-14)

    def test_energy_doubling_doubles_variance(self, rng):
        A = sample_matrix(40, 60, seed=4)
        beta = rng.normal(size=60)
        s1 = calibrate_noise(A, beta, 17.0)
        s2 = calibrate_noise(A, math.sqrt(2) * beta, 17.0)
        assert s2 == pytest.approx(2 * s1, rel=1e-12)

    def test_ten_db_step(self, rng):
        A = sample_matrix(40, 60, seed=4)
        beta = rng.normal(size=60)
        assert calibrate_noise(A, beta, 10.0) == pytest.approx(calibrate_noise(A, beta, 20.0) * 10, rel=1e-12)

    def test_zero_signal(self):
        with pytest.raises(ZeroSignalError):
            calibrate_noise(np.eye(3), np.zeros(3), 10.0)

    def test_expected_variance_matches_average(self):
        # E||A beta||^2 = |Gamma| E[beta^2] for N(0, 1/n) entries
        pi1 = 5 / 9
        got = [calibrate_noise(sample_matrix(256, 512, seed=s),
                               (np.random.default_rng(s).random(512) < pi1).astype(float), 17.0)
               for s in range(40)]
        np.testing.assert_allclose(np.mean(got), expected_noise_variance(pi1, 0.5, 17.0), rtol=0.03)


class TestMeasure:
    def test_noiseless(self, rng):
        A = sample_matrix(30, 16, seed=0)
        beta = rng.integers(0, 2, (4, 4))
        np.testing.assert_array_equal(measure(A, beta, 0.0, seed=1), A @ beta.ravel().astype(float))

    def test_noise_variance(self):
        n = 8192
        A = sample_matrix(n, 4, seed=0)
        beta = np.array([1.0, 0.0, 1.0, 1.0])
        y = measure(A, beta, 0.25, seed=9)
        np.testing.assert_allclose(np.var(y - A @ beta), 0.25, rtol=0.10)

    def test_affine_in_signal(self, rng):
        A = sample_matrix(20, 9, seed=0)
        b1, b2 = rng.normal(size=9), rng.normal(size=9)
        y1 = measure(A, b1, 0.3, seed=4)
        y2 = measure(A, b2, 0.3, seed=4)
        np.testing.assert_allclose(y1 - y2, A @ (b1 - b2), atol=1e-13)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            measure(np.zeros((3, 5)), np.zeros(4), 0.0)


class TestCount:
    @pytest.mark.parametrize("delta, expected", [(0.3, 4915), (0.5, 8192)])
    def test_floor_at_128(self, delta, expected):
        assert n_measurements(delta, 128**2) == expected == math.floor(delta * 128**2)

    def test_ratio(self):
        n = n_measurements(0.5, 64**2)
        assert n / 64**2 == 0.5

    def test_too_small(self):
        with pytest.raises(InvalidSizeError):
            n_measurements(0.01, 10)
