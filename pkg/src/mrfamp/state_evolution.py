"""State evolution: the deterministic ``(tau_t^2, sigma_t^2)`` recursion.

``sigma_0^2 = sigma_beta^2 / delta`` and, for ``t >= 1``::

    sigma_t^2 = 1/(delta |Gamma|) sum_i E[(eta_{t-1}([beta + tau_{t-1} Z]_{Lambda_i}) - beta_i)^2]
    tau_t^2   = sigma^2 + sigma_t^2

The |Gamma| terms are regrouped by how the window of site ``i`` sticks out of
the lattice.  A site whose window is clipped looks like a full stationary
window ``beta'`` re-centred at ``c + l`` with the missing cells filled, so each
family is indexed by an offset ``l`` with ``|l_j| <= k`` and evaluated with
``shift_fill_matrix``.  Expectations are exact sums over ``beta'`` and
quasi-Monte Carlo (scrambled Halton) averages over the Gaussian patch.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

from .denoisers import DenoiserSpec
from .errors import DegeneratePriorError, InvalidNoiseLevelError
from .lattice import LatticeShape, WindowSpec, partition_indices, shift_fill_matrix
from .mrf import WindowDistribution

__all__ = [
    "SeTrajectory",
    "se_init",
    "family_weights",
    "gaussian_patches",
    "se_step",
    "run_se",
    "NOISE_FILLS",
    "LOW_SAMPLE_THRESHOLD",
]

NOISE_FILLS = ("joint", "independent")
LOW_SAMPLE_THRESHOLD = 100
FIXED_POINT_TOL = 1e-8
_UNDERFLOW = 1e-280
_BLOCK = 4096


@dataclass
class SeTrajectory:
    sigma2: np.ndarray
    tau2: np.ndarray
    mc_samples: int
    seed: int
    noise_sigma2: float = 0.0
    delta: float = 1.0
    converged_at: int | None = None
    low_sample: bool = False

    def __post_init__(self):
        self.sigma2 = np.asarray(self.sigma2, dtype=float)
        self.tau2 = np.asarray(self.tau2, dtype=float)
        np.testing.assert_allclose(self.tau2, self.noise_sigma2 + self.sigma2, rtol=0, atol=0)

    def __len__(self):
        return self.sigma2.size

    @property
    def mse_prediction(self) -> np.ndarray:
        """``delta * sigma_{t+1}^2`` for ``t = 0, 1, ...``: the predicted MSE of ``beta^{t+1}``."""
        return self.delta * self.sigma2[1:]


def se_init(prior: WindowDistribution, delta: float) -> float:
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    sb2 = prior.second_moment()
    if not sb2 > 0:
        raise DegeneratePriorError("prior second moment is zero")
    return sb2 / delta


def family_weights(dim: int, side: int, k: int) -> dict[tuple[int, ...], int]:
    """Number of lattice sites whose window is the full window shifted by ``l``.

    ``l = 0`` is the bulk.  Returns integer counts summing to ``side**dim``;
    divide by ``side**dim`` for the normalized weights.
    """
    partition_indices(LatticeShape(dim, side), WindowSpec(k))  # validates 2k+1 <= N
    bulk = side - 2 * k
    out = {}
    for off in itertools.product(range(-k, k + 1), repeat=dim):
        out[off] = 1
        for o in off:
            out[off] *= bulk if o == 0 else 1
    return out


def gaussian_patches(mc: int, d: int, seed) -> np.ndarray:
    """``(mc, d)`` standard normal draws from a scrambled Halton sequence."""
    rng = np.random.default_rng(seed)
    u = qmc.Halton(d=d, scramble=True, seed=rng).random(mc)
    eps = np.finfo(float).eps
    return norm.ppf(np.clip(u, eps, 1.0 - eps))


def _family_seed(seed, offset):
    key = tuple(o + 1000 for o in offset)
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def _bayes_family_error(den, prior, clean, noise, tau):
    """Mean squared error of the window posterior mean for one family.

    ``clean`` is ``(2^d, d)`` (every ``F beta'``), ``noise`` is ``(mc, d)``
    (``tau * F Z`` or ``tau * Z``).  Uses the factorization
    ``loglik(beta', s, x) = G[beta', x] + g[s, x]`` so the sums over ``x`` are
    two matrix products.
    """
    t2 = tau * tau
    xm = den._xm  # configs times mask
    on = den._on
    G = ((clean - 0.5) @ xm.T) / t2
    Gs = G - G.max(axis=1, keepdims=True)
    EG = np.exp(Gs)
    truth = clean[:, prior.center]
    w = prior.probs
    total = 0.0
    for lo in range(0, noise.shape[0], _BLOCK):
        zb = noise[lo:lo + _BLOCK]
        g = (zb @ xm.T) / t2 + den._log_prior
        gs = g - g.max(axis=1, keepdims=True)
        Eg = np.exp(gs)
        D = EG @ Eg.T
        N = EG[:, on] @ Eg[:, on].T
        with np.errstate(divide="ignore", invalid="ignore"):
            eta = N / D
        bad = ~(D > _UNDERFLOW)
        if bad.any():
            rows, cols = np.nonzero(bad)
            full = Gs[rows] + gs[cols]
            top = full.max(axis=1, keepdims=True)
            ex = np.exp(full - top)
            eta[rows, cols] = ex[:, on].sum(axis=1) / ex.sum(axis=1)
        total += float(w @ ((eta - truth[:, None]) ** 2).sum(axis=1))
    return total / noise.shape[0]


def _generic_family_error(fn, prior, clean, noise, tau):
    c = prior.center
    truth = clean[:, c]
    total = 0.0
    for b in range(clean.shape[0]):
        if prior.probs[b] == 0:
            continue
        obs = clean[b][None, :] + noise
        est = np.asarray(fn(obs, tau, np.broadcast_to(clean[b], obs.shape)), dtype=float)
        total += prior.probs[b] * float(np.mean((est - truth[b]) ** 2))
    return total


def se_step(tau_prev2: float, denoiser, prior: WindowDistribution, shape: LatticeShape,
            window: WindowSpec, delta: float, noise_sigma2: float, mc: int, seed,
            noise_fill: str = "joint"):
    """One state-evolution update; returns ``(sigma_t^2, tau_t^2, low_sample)``.

    ``denoiser`` is a Bayesian ``DenoiserSpec`` or a callable
    ``fn(observed, tau, clean) -> estimates`` acting on ``(m, d)`` patches
    (``clean`` lets test oracles cheat).  ``noise_fill="joint"`` passes the
    noise patch through the same fill as the signal; ``"independent"`` fills
    the signal only and draws fresh noise on every cell.
    """
    if not tau_prev2 > 0:
        raise InvalidNoiseLevelError(f"tau^2 must be positive, got {tau_prev2}")
    if noise_fill not in NOISE_FILLS:
        raise ValueError(f"noise_fill must be one of {NOISE_FILLS}")
    if mc < 1:
        raise ValueError("mc must be >= 1")
    k = window.half_width
    dim = shape.dim
    if prior.half_width != k or prior.dim != dim:
        raise ValueError("prior window does not match the SE window")
    if isinstance(denoiser, DenoiserSpec):
        if not denoiser.is_bayesian:
            raise ValueError("state evolution needs a sliding-window denoiser; TV has no window form")
        bayes = denoiser.bayes()
        evaluate = lambda clean, noise, tau: _bayes_family_error(bayes, prior, clean, noise, tau)  # noqa: E731
    elif callable(denoiser):
        evaluate = lambda clean, noise, tau: _generic_family_error(denoiser, prior, clean, noise, tau)  # noqa: E731
    else:
        raise TypeError("denoiser must be a DenoiserSpec or a callable")

    low = mc < LOW_SAMPLE_THRESHOLD
    if low:
        warnings.warn(f"state evolution with only {mc} Monte Carlo samples", RuntimeWarning, stacklevel=2)
    tau = math.sqrt(tau_prev2)
    configs = prior.configs.astype(float)
    d = prior.n_cells
    weights = family_weights(dim, shape.side, k)
    acc = 0.0
    for off, count in weights.items():
        F = shift_fill_matrix(dim, k, off)
        clean = configs @ F.T
        z = gaussian_patches(mc, d, _family_seed(seed, off))
        noise = tau * (z @ F.T if noise_fill == "joint" else z)
        acc += count * evaluate(clean, noise, tau)
    sigma2 = acc / (delta * shape.size)
    tau2 = noise_sigma2 + sigma2
    assert tau2 == noise_sigma2 + sigma2
    return sigma2, tau2, low


def run_se(prior: WindowDistribution, denoiser, shape: LatticeShape, window: WindowSpec,
           delta: float, noise_sigma2: float, T: int, mc: int = 20000, seed: int = 0,
           noise_fill: str = "joint") -> SeTrajectory:
    """Iterate ``se_step`` ``T`` times; the returned sequences have ``T + 1`` entries.

    If ``|sigma_t^2 - sigma_{t-1}^2| < 1e-8`` the recursion has reached its fixed
    point; ``converged_at`` records ``t`` and the remaining entries repeat the
    fixed-point value.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if noise_sigma2 < 0:
        raise ValueError("noise variance must be >= 0")
    s0 = se_init(prior, delta)
    sig = [s0]
    tau = [noise_sigma2 + s0]
    low = False
    converged = None
    for t in range(1, T + 1):
        if converged is not None:
            sig.append(sig[-1])
            tau.append(tau[-1])
            continue
        step_seed = np.random.SeedSequence(entropy=seed, spawn_key=(t,)).generate_state(2)
        s, tt, flag = se_step(tau[-1], denoiser, prior, shape, window, delta, noise_sigma2, mc,
                              [int(v) for v in step_seed], noise_fill=noise_fill)
        low = low or flag
        sig.append(s)
        tau.append(tt)
        if abs(s - sig[-2]) < FIXED_POINT_TOL:
            converged = t
    return SeTrajectory(sigma2=np.array(sig), tau2=np.array(tau), mc_samples=mc, seed=seed,
                        noise_sigma2=noise_sigma2, delta=delta, converged_at=converged, low_sample=low)
