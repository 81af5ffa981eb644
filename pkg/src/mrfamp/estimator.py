"""scikit-learn style wrappers.

``AmpRecovery`` treats the measurement matrix as the design matrix ``X`` and
the measurements as the target: ``fit(A, y)`` recovers the lattice signal and
``predict(A)`` returns ``A @ coef_``.  ``SlidingWindowDenoiser`` is a
stateless transformer applying the window posterior mean to a batch of fields.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .amp import AmpConfig, run_amp
from .denoisers import DenoiserSpec, apply_denoiser
from .errors import ShapeError
from .lattice import LatticeShape, WindowSpec, devectorize, vectorize
from .measurement import expected_noise_variance
from .mrf import MrfParams, window_marginal
from .state_evolution import run_se

__all__ = ["AmpRecovery", "SlidingWindowDenoiser"]


def _side(cols: int, dim: int) -> int:
    side = round(cols ** (1.0 / dim))
    for cand in (side - 1, side, side + 1):
        if cand > 0 and cand**dim == cols:
            return cand
    raise ShapeError(f"{cols} columns is not a {dim}-D cubic lattice")


def _spec(dim, k, mrf_params, kind, mask, tv_lambda, tv_iters):
    prior = None
    if kind != "total_variation":
        prior = window_marginal(MrfParams(*mrf_params), dim, k)
    return DenoiserSpec(kind=kind, window=WindowSpec(k, mask), prior=prior, tv_lambda=tv_lambda,
                        tv_iters=tv_iters)


class AmpRecovery(RegressorMixin, BaseEstimator):
    """Recover a binary MRF field from ``y = A vec(beta) + w`` with AMP.

    Parameters
    ----------
    dim : lattice dimension (the side is inferred from ``A``'s column count).
    mrf_params : ``(p, q, r, s)`` of the prior.
    k : window half-width; ``kind="bayes_separable"`` forces ``k = 0``.
    tau_source : ``"state_evolution"`` needs ``snr_db`` or ``noise_sigma2``.
    """

    def __init__(self, dim=2, mrf_params=(0.4, 0.5, 0.01, 0.4), k=1, kind="bayes_window", mask=None,
                 max_iters=10, tau_source="empirical", snr_db=None, noise_sigma2=None, mc_samples=5000,
                 stop_eps=0.0, tv_lambda=0.1, tv_iters=50, random_state=None):
        self.dim = dim
        self.mrf_params = mrf_params
        self.k = k
        self.kind = kind
        self.mask = mask
        self.max_iters = max_iters
        self.tau_source = tau_source
        self.snr_db = snr_db
        self.noise_sigma2 = noise_sigma2
        self.mc_samples = mc_samples
        self.stop_eps = stop_eps
        self.tv_lambda = tv_lambda
        self.tv_iters = tv_iters
        self.random_state = random_state

    def _noise_variance(self, delta):
        if self.noise_sigma2 is not None:
            return float(self.noise_sigma2)
        if self.snr_db is None:
            raise ValueError("state-evolution tau needs snr_db or noise_sigma2")
        pi1 = MrfParams(*self.mrf_params).stationary[1]
        return expected_noise_variance(pi1, delta, self.snr_db)

    def fit(self, X, y, beta_true=None):
        A, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        n, cols = A.shape
        shape = LatticeShape(self.dim, _side(cols, self.dim))
        k = 0 if self.kind == "bayes_separable" else self.k
        spec = _spec(self.dim, k, self.mrf_params, self.kind, self.mask, self.tv_lambda, self.tv_iters)
        se = None
        if self.tau_source == "state_evolution":
            delta = n / cols
            se = run_se(spec.prior, spec, shape, spec.window, delta, self._noise_variance(delta),
                        self.max_iters, mc=self.mc_samples, seed=0 if self.random_state is None else self.random_state)
        config = AmpConfig(max_iters=self.max_iters, tau_source=self.tau_source, stop_eps=self.stop_eps)
        traj = run_amp(A, y, spec, config, shape, se=se, beta_true=beta_true, rng=self.random_state)
        self.field_ = traj.beta
        self.coef_ = vectorize(traj.beta)
        self.history_ = traj.records
        self.n_iter_ = len(traj.records)
        self.state_evolution_ = se
        self.lattice_ = shape
        self.n_features_in_ = cols
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        A = check_array(X, dtype=np.float64)
        if A.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {A.shape[1]}")
        return A @ self.coef_


class SlidingWindowDenoiser(TransformerMixin, BaseEstimator):
    """Window posterior mean applied to each row of ``X`` (flattened fields)."""

    def __init__(self, dim=2, mrf_params=(0.4, 0.5, 0.01, 0.4), k=1, tau=0.5, mask=None):
        self.dim = dim
        self.mrf_params = mrf_params
        self.k = k
        self.tau = tau
        self.mask = mask

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if not (isinstance(self.tau, (int, float)) and math.isfinite(self.tau) and self.tau > 0):
            raise ValueError("tau must be a positive number")
        self.lattice_ = LatticeShape(self.dim, _side(X.shape[1], self.dim))
        kind = "bayes_window" if self.k > 0 else "bayes_separable"
        self.spec_ = _spec(self.dim, self.k, self.mrf_params, kind, self.mask, 0.0, 1)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ShapeError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        out = np.empty_like(X)
        for i, row in enumerate(X):
            field = devectorize(row, self.lattice_)
            out[i] = vectorize(apply_denoiser(self.spec_, field, self.tau).estimate)
        return out
