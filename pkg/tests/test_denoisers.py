import numpy as np
import pytest

from mrfamp.denoisers import (
    BayesWindowDenoiser,
    DenoiserSpec,
    apply_denoiser,
    bayes_window_denoise,
    bayes_window_derivative,
    tv_denoise,
    tv_objective,
)
from mrfamp.denoisers import _div, _grad
from mrfamp.errors import InvalidNoiseLevelError, InvalidWindowError, ShapeError
from mrfamp.lattice import WindowSpec, window_patches
from mrfamp.mrf import MrfParams, WindowDistribution, bernoulli_window, window_marginal
from oracles import naive_posterior_mean

P = MrfParams(0.4, 0.5, 0.01, 0.4)


@pytest.fixture(scope="module")
def prior_k1():
    return window_marginal(P, 2, 1)


@pytest.fixture(scope="module")
def den_k1(prior_k1):
    return BayesWindowDenoiser(prior_k1)


class TestBayesWindow:
    def test_matches_enumeration_oracle(self, prior_k1, den_k1, rng):
        patches = rng.uniform(-0.5, 1.5, (60, 9))
        taus = rng.uniform(0.1, 2.0, 60)
        for v, tau in zip(patches, taus):
            eta, _ = den_k1.posterior(v[None, :], tau)
            assert abs(eta[0] - naive_posterior_mean(v, tau, prior_k1.probs)) < 1e-12

    def test_masked_matches_oracle(self, prior_k1, rng):
        mask = np.array([0, 1, 0, 1, 1, 1, 0, 1, 0], bool)
        for _ in range(20):
            v = rng.uniform(-0.5, 1.5, 9)
            got = bayes_window_denoise(v, 0.4, prior_k1, mask)
            assert abs(got - naive_posterior_mean(v, 0.4, prior_k1.probs, mask)) < 1e-12

    def test_large_tau_gives_prior_marginal(self, prior_k1, rng):
        v = rng.uniform(-0.5, 1.5, 9)
        np.testing.assert_allclose(bayes_window_denoise(v, 1e4, prior_k1), 5 / 9, atol=1e-4)

    def test_uniform_prior(self):
        prior = WindowDistribution(2, 1, np.full(512, 1 / 512))
        # at the midpoint the posterior is flat: eta = 1/2, Var = 1/4
        v = np.full(9, 0.5)
        assert bayes_window_denoise(v, 0.7, prior) == pytest.approx(0.5, abs=1e-15)
        assert bayes_window_derivative(v, 0.7, prior) == pytest.approx(0.25 / 0.49, rel=1e-13)

    def test_derivative_finite_difference(self, prior_k1, den_k1, rng):
        h = 1e-5
        for tau in (0.1, 0.5, 2.0):
            patches = rng.uniform(-0.5, 1.5, (30, 9))
            _, deta = den_k1.posterior(patches, tau)
            up, dn = patches.copy(), patches.copy()
            up[:, 4] += h
            dn[:, 4] -= h
            fd = (den_k1.posterior(up, tau)[0] - den_k1.posterior(dn, tau)[0]) / (2 * h)
            np.testing.assert_allclose(deta, fd, atol=1e-6)

    def test_point_mass_prior(self):
        probs = np.zeros(512)
        probs[0b101010101] = 1.0
        prior = WindowDistribution(2, 1, probs)
        eta, deta = BayesWindowDenoiser(prior).posterior(np.random.default_rng(0).normal(size=(5, 9)), 0.3)
        np.testing.assert_array_equal(eta, 1.0)
        np.testing.assert_array_equal(deta, 0.0)

    def test_separable_equals_k0_window(self, rng):
        v = rng.uniform(-0.5, 1.5, (50, 1))
        pi1 = 5 / 9
        eta, deta = BayesWindowDenoiser(bernoulli_window(pi1, 2)).posterior(v, 0.3)
        closed = 1 / (1 + (1 - pi1) / pi1 * np.exp(-(v[:, 0] - 0.5) / 0.09))
        np.testing.assert_allclose(eta, closed, rtol=0, atol=1e-14)
        np.testing.assert_allclose(deta, closed * (1 - closed) / 0.09, rtol=0, atol=1e-13)

    def test_centre_only_mask_is_separable(self, prior_k1, rng):
        mask = np.zeros(9, bool)
        mask[4] = True
        v = rng.uniform(-0.5, 1.5, (40, 9))
        eta, _ = BayesWindowDenoiser(prior_k1, mask).posterior(v, 0.5)
        sep, _ = BayesWindowDenoiser(bernoulli_window(prior_k1.cell_marginal(), 2)).posterior(v[:, 4:5], 0.5)
        np.testing.assert_allclose(eta, sep, atol=1e-12)

    def test_monotone_in_centre(self, den_k1, rng):
        base = rng.uniform(-0.5, 1.5, 9)
        grid = np.repeat(base[None, :], 50, axis=0)
        grid[:, 4] = np.linspace(-1, 2, 50)
        eta, deta = den_k1.posterior(grid, 0.4)
        assert np.all(np.diff(eta) > 0)
        assert np.all(deta > 0)
        assert np.all((eta >= 0) & (eta <= 1))

    def test_invalid_inputs(self, prior_k1, den_k1):
        with pytest.raises(InvalidNoiseLevelError):
            den_k1.posterior(np.zeros((1, 9)), 0.0)
        with pytest.raises(ShapeError):
            den_k1.posterior(np.zeros((1, 8)), 1.0)
        with pytest.raises(InvalidWindowError):
            BayesWindowDenoiser(prior_k1, np.zeros(9, bool))


class TestApply:
    def test_onsager_sum_spot_checks(self, prior_k1, rng):
        spec = DenoiserSpec("bayes_window", WindowSpec(1), prior_k1)
        field = rng.uniform(-0.5, 1.5, (16, 16))
        res = apply_denoiser(spec, field, 0.4)
        den = spec.bayes()
        patches = window_patches(field, WindowSpec(1))
        _, deta = den.posterior(patches, 0.4)
        assert res.onsager_sum == pytest.approx(deta.sum(), rel=1e-12)
        h = 1e-5
        for site in rng.choice(256, 100, replace=False):
            up, dn = patches[site].copy(), patches[site].copy()
            up[4] += h
            dn[4] -= h
            fd = (den.posterior(up[None, :], 0.4)[0][0] - den.posterior(dn[None, :], 0.4)[0][0]) / (2 * h)
            assert deta[site] == pytest.approx(fd, rel=1e-4)

    def test_separable_spec(self, rng):
        spec = DenoiserSpec("bayes_separable", WindowSpec(0), bernoulli_window(0.3, 2))
        field = rng.normal(size=(6, 6))
        res = apply_denoiser(spec, field, 0.5)
        eta, deta = spec.bayes().posterior(field.reshape(-1, 1), 0.5)
        np.testing.assert_array_equal(res.estimate.ravel(), eta)
        assert res.onsager_sum == pytest.approx(deta.sum(), rel=1e-14)

    def test_spec_validation(self, prior_k1):
        with pytest.raises(InvalidWindowError):
            DenoiserSpec("bayes_separable", WindowSpec(1), prior_k1)
        with pytest.raises(ValueError):
            DenoiserSpec("median", WindowSpec(1), prior_k1)
        with pytest.raises(ValueError):
            DenoiserSpec("bayes_window", WindowSpec(1))


class TestTotalVariation:
    def test_div_is_negative_adjoint(self, rng):
        u = rng.normal(size=(7, 9))
        px, py = rng.normal(size=(7, 9)), rng.normal(size=(7, 9))
        px[-1, :] = 0
        py[:, -1] = 0
        gx, gy = _grad(u)
        assert np.sum(gx * px + gy * py) == pytest.approx(-np.sum(u * _div(px, py)), rel=1e-12)

    def test_zero_lambda_is_identity(self, rng):
        img = rng.normal(size=(8, 8))
        np.testing.assert_array_equal(tv_denoise(img, 0.0, 10), img)

    def test_constant_is_fixed_point(self):
        img = np.full((10, 10), 0.7)
        np.testing.assert_allclose(tv_denoise(img, 0.5, 50), img, atol=1e-12)

    def test_objective_nonincreasing(self, rng):
        img = (rng.random((32, 32)) < 0.5) + 0.4 * rng.normal(size=(32, 32))
        objs = [tv_objective(tv_denoise(img, 0.3, it), img, 0.3) for it in range(10, 101, 10)]
        assert np.all(np.diff(objs) <= 0)
        assert objs[-1] < tv_objective(img, img, 0.3)

    def test_reduces_noise_on_piecewise_constant(self, rng):
        clean = np.zeros((32, 32))
        clean[8:24, 8:24] = 1
        noisy = clean + 0.3 * rng.normal(size=clean.shape)
        out = tv_denoise(noisy, 0.3, 100)
        assert np.mean((out - clean) ** 2) < 0.5 * np.mean((noisy - clean) ** 2)

    def test_divergence_probe(self, rng):
        spec = DenoiserSpec("total_variation", WindowSpec(0), tv_lambda=0.5, tv_iters=30)
        field = rng.normal(size=(16, 16))
        res = apply_denoiser(spec, field, 0.5, rng=3)
        # the prox map is firmly nonexpansive, so its divergence lies in [0, |Gamma|]
        assert -10 < res.onsager_sum < 256 + 10
        again = apply_denoiser(spec, field, 0.5, rng=3)
        assert res.onsager_sum == again.onsager_sum

    def test_rejects_3d(self):
        with pytest.raises(ShapeError):
            tv_denoise(np.zeros((2, 2, 2)), 0.1, 5)
