"""AMP recursion with sliding-window denoisers.

One step, for ``t >= 0``::

    z^t      = y - A vec(beta^t) + (z^{t-1} / n) * sum_i eta'_{t-1}(r^{t-1}_{Lambda_i})
    r^t      = vec^{-1}(A^T z^t) + beta^t            (effective observation)
    beta^{t+1}_i = eta_t(r^t_{Lambda_i})

with ``beta^0 = 0`` and ``z^0 = y`` (no correction term at ``t = 0``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .denoisers import DenoiserSpec, apply_denoiser
from .errors import DivergenceError, ShapeError
from .lattice import LatticeShape, devectorize, vectorize
from .metrics import mse as _mse

__all__ = ["AmpConfig", "AmpState", "AmpRecord", "AmpTrajectory", "amp_init", "amp_step", "run_amp"]

TAU_SOURCES = ("state_evolution", "empirical")


@dataclass(frozen=True)
class AmpConfig:
    max_iters: int = 10
    tau_source: str = "state_evolution"
    stop_eps: float = 0.0
    onsager: bool = True  # False is an ablation: drop the correction term

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tau_source not in TAU_SOURCES:
            raise ValueError(f"tau_source must be one of {TAU_SOURCES}")
        if self.stop_eps < 0:
            raise ValueError("stop_eps must be >= 0")


@dataclass
class AmpState:
    t: int
    beta: np.ndarray  # beta^t on the lattice
    z: np.ndarray | None  # z^{t-1}; None before the first step
    onsager_sum: float  # derivative sum at r^{t-1}
    effective_obs: np.ndarray | None = None  # r^{t-1}
    mse: float | None = None


@dataclass
class AmpRecord:
    t: int
    tau2: float
    onsager_sum: float
    mse: float | None
    residual2: float  # ||z^t||^2 / n


@dataclass
class AmpTrajectory:
    records: list = field(default_factory=list)
    beta: np.ndarray | None = None
    estimates: list = field(default_factory=list)
    converged_at: int | None = None

    @property
    def mse(self) -> np.ndarray:
        return np.array([np.nan if r.mse is None else r.mse for r in self.records])


def amp_init(A: np.ndarray, y: np.ndarray, shape: LatticeShape) -> AmpState:
    y = np.asarray(y, dtype=float)
    if A.shape != (y.size, shape.size):
        raise ShapeError(f"matrix {A.shape} does not match y ({y.size}) and lattice ({shape.size})")
    return AmpState(t=0, beta=np.zeros(shape.array_shape), z=None, onsager_sum=0.0)


def _check_finite(t, *arrays):
    for arr in arrays:
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(t)


def amp_step(state: AmpState, A: np.ndarray, y: np.ndarray, denoiser: DenoiserSpec, tau: float,
             rng=None, onsager: bool = True):
    """Advance one iteration; returns ``(new_state, z_t)``.

    ``new_state.beta`` is ``beta^{t+1}``, ``new_state.effective_obs`` is ``r^t``
    and ``new_state.onsager_sum`` is the derivative sum at ``r^t``.
    """
    n = y.size
    z = y - A @ vectorize(state.beta)
    if onsager and state.z is not None:
        z = z + (state.z / n) * state.onsager_sum
    r = devectorize(A.T @ z, LatticeShape(state.beta.ndim, state.beta.shape[0])) + state.beta
    _check_finite(state.t, z, r)
    out = apply_denoiser(denoiser, r, tau, rng=rng)
    _check_finite(state.t, out.estimate)
    if not math.isfinite(out.onsager_sum):
        raise DivergenceError(state.t)
    new = AmpState(t=state.t + 1, beta=out.estimate, z=z, onsager_sum=out.onsager_sum, effective_obs=r)
    return new, z


def run_amp(A: np.ndarray, y: np.ndarray, denoiser: DenoiserSpec, config: AmpConfig,
            shape: LatticeShape, se=None, beta_true=None, rng=None, keep_estimates: bool = False):
    """Iterate ``amp_step`` and record one ``AmpRecord`` per iteration.

    Record ``t`` holds the ``tau_t^2`` that was used and the MSE of
    ``beta^{t+1}`` (the output of iteration ``t``).
    """
    if config.tau_source == "state_evolution":
        if se is None or len(se.tau2) < config.max_iters:
            raise ValueError("state-evolution tau needs tau_t^2 for every t < max_iters")
    rng = np.random.default_rng(rng)
    state = amp_init(A, y, shape)
    traj = AmpTrajectory()
    for t in range(config.max_iters):
        if config.tau_source == "state_evolution":
            tau2 = float(se.tau2[t])
            new, z = amp_step(state, A, y, denoiser, math.sqrt(tau2), rng=rng, onsager=config.onsager)
        else:
            # tau_t^2 = ||z^t||^2 / n needs z^t before denoising
            zt = y - A @ vectorize(state.beta)
            if config.onsager and state.z is not None:
                zt = zt + (state.z / y.size) * state.onsager_sum
            tau2 = float(zt @ zt) / y.size
            if not math.isfinite(tau2):
                raise DivergenceError(t, f"empirical tau^2 is {tau2} at iteration {t}")
            if tau2 == 0.0:
                # the current estimate fits y exactly; nothing left to denoise
                traj.converged_at = t - 1 if t > 0 else None
                break
            new, z = amp_step(state, A, y, denoiser, math.sqrt(tau2), rng=rng, onsager=config.onsager)
        err = None if beta_true is None else _mse(new.beta, beta_true)
        new.mse = err
        traj.records.append(AmpRecord(t=t, tau2=tau2, onsager_sum=new.onsager_sum, mse=err,
                                      residual2=float(z @ z) / y.size))
        if keep_estimates:
            traj.estimates.append(new.beta)
        change = float(np.mean((new.beta - state.beta) ** 2))
        state = new
        if config.stop_eps > 0 and change < config.stop_eps:
            traj.converged_at = t
            break
    traj.beta = state.beta
    return traj
