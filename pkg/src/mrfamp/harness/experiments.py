"""Experiment pipelines shared by the CLI and the acceptance tests.

Every random quantity is drawn from a named stream (see ``rng``), so a trial
depends only on ``(master_seed, trial)``.  BLAS is pinned to one thread in
every worker and in the coordinator; ``threads`` therefore changes how many
trials run at once and nothing else.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from threadpoolctl import threadpool_limits

from ..amp import AmpConfig, run_amp
from ..denoisers import DenoiserSpec
from ..lattice import LatticeShape, WindowSpec
from ..measurement import calibrate_noise, expected_noise_variance, measure, n_measurements, sample_matrix
from ..metrics import TrialSummary, concentration_report
from ..mrf import MrfParams, sample_field, window_marginal
from ..state_evolution import SeTrajectory, run_se
from .config import DenoiserConfig, ExperimentConfig, WindowConfig
from .rng import stream, stream_seed

__all__ = [
    "TrialResult",
    "build_denoiser",
    "compute_se",
    "run_trial",
    "run_trials",
    "verify_report",
    "run_texture",
    "threshold_image",
    "with_denoiser",
]


@dataclass
class TrialResult:
    trial: int
    records: list  # AmpRecord per iteration
    mse: np.ndarray
    truth: np.ndarray
    estimate: np.ndarray
    noise_sigma2: float
    n: int


def with_denoiser(cfg: ExperimentConfig, kind: str, k: int | None = None) -> ExperimentConfig:
    """Copy of ``cfg`` using denoiser ``kind`` (and half-width ``k``)."""
    if kind == "bayes_separable":
        k = 0
    if k is None:
        k = cfg.window.k
    mask = cfg.window.mask if k == cfg.window.k else None
    amp = cfg.amp if kind != "total_variation" else replace(cfg.amp, tau_source="empirical")
    return replace(cfg, window=WindowConfig(k=k, mask=mask), denoiser=replace(cfg.denoiser, kind=kind), amp=amp)


def _shape(cfg) -> LatticeShape:
    return LatticeShape(cfg.lattice.dim, cfg.lattice.N)


def _params(cfg) -> MrfParams:
    return MrfParams(*cfg.mrf.as_tuple())


def build_denoiser(cfg: ExperimentConfig):
    """``(DenoiserSpec, prior or None)`` for the configured denoiser."""
    d: DenoiserConfig = cfg.denoiser
    window = WindowSpec(cfg.window.k, cfg.mask_array())
    prior = None
    if d.kind != "total_variation":
        prior = window_marginal(_params(cfg), cfg.lattice.dim, cfg.window.k)
    spec = DenoiserSpec(kind=d.kind, window=window, prior=prior, tv_lambda=d.tv_lambda, tv_iters=d.tv_iters)
    return spec, prior


def _delta_and_n(cfg):
    size = _shape(cfg).size
    n = n_measurements(cfg.delta, size)
    return n / size, n


def se_noise_variance(cfg) -> float:
    """Noise variance fed to state evolution: the trial calibration with ``||A beta||^2`` replaced by its mean."""
    delta, _ = _delta_and_n(cfg)
    sb2 = float(_params(cfg).stationary[1])
    return expected_noise_variance(sb2, delta, cfg.snr_db)


def compute_se(cfg: ExperimentConfig, T: int | None = None) -> SeTrajectory:
    spec, prior = build_denoiser(cfg)
    if prior is None:
        raise ValueError("state evolution is not defined for the total-variation denoiser")
    delta, _ = _delta_and_n(cfg)
    with threadpool_limits(1):
        return run_se(prior, spec, _shape(cfg), spec.window, delta, se_noise_variance(cfg),
                      T or cfg.amp.max_iters, mc=cfg.se.mc_samples, seed=stream_seed(cfg.master_seed, "se"),
                      noise_fill=cfg.se.noise_fill)


def _trial_problem(cfg, trial):
    """Signal, matrix and measurements of one trial."""
    shape = _shape(cfg)
    beta = sample_field(_params(cfg), shape, stream(cfg.master_seed, "field", trial))
    return _measure(cfg, beta, trial)


def _measure(cfg, beta, trial):
    _, n = _delta_and_n(cfg)
    A = sample_matrix(n, beta.size, stream(cfg.master_seed, "matrix", trial))
    sigma2 = calibrate_noise(A, beta, cfg.snr_db)
    y = measure(A, beta, sigma2, stream(cfg.master_seed, "noise", trial))
    return beta, A, y, sigma2


def _amp_config(cfg) -> AmpConfig:
    a = cfg.amp
    return AmpConfig(max_iters=a.max_iters, tau_source=a.tau_source, stop_eps=a.stop_eps, onsager=a.onsager)


def _solve(cfg, beta, A, y, sigma2, trial, se):
    spec, _ = build_denoiser(cfg)
    traj = run_amp(A, y, spec, _amp_config(cfg), _shape(cfg), se=se, beta_true=beta,
                   rng=stream(cfg.master_seed, "probe", trial))
    return TrialResult(trial=trial, records=traj.records, mse=traj.mse, truth=np.asarray(beta),
                       estimate=traj.beta, noise_sigma2=sigma2, n=A.shape[0])


def run_trial(cfg: ExperimentConfig, trial: int, se: SeTrajectory | None = None) -> TrialResult:
    with threadpool_limits(1):
        beta, A, y, sigma2 = _trial_problem(cfg, trial)
        return _solve(cfg, beta, A, y, sigma2, trial, se)


def _worker(args):
    return run_trial(*args)


def run_trials(cfg: ExperimentConfig, threads: int = 1, se: SeTrajectory | None = None, trials=None):
    """Run the configured trials; results come back in trial order."""
    if cfg.amp.tau_source == "state_evolution" and se is None:
        se = compute_se(cfg)
    ids = list(range(cfg.trials)) if trials is None else list(trials)
    jobs = [(cfg, t, se) for t in ids]
    if threads <= 1 or len(jobs) <= 1:
        return [_worker(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        return list(pool.map(_worker, jobs))


def verify_report(cfg: ExperimentConfig, results, se: SeTrajectory) -> dict:
    """Compare trial-mean MSE with ``delta * sigma_{t+1}^2`` against the configured tolerances."""
    summaries = [TrialSummary(seed=r.trial, losses=r.mse) for r in results]
    rows = concentration_report(summaries, se, se.delta, band=cfg.verify.band)
    v = cfg.verify
    checks = []
    for row in rows:
        t = row["t"]
        if not v.t_first <= t <= v.t_last:
            continue
        tol = v.tolerance_first if t == v.t_first else v.tolerance
        rel = row["relative_deviation"]
        checks.append({"t": t, "relative_deviation": rel, "tolerance": tol,
                       "passed": bool(math.isfinite(rel) and abs(rel) <= tol)})
    return {
        "rows": rows,
        "checks": checks,
        "passed": bool(checks) and all(c["passed"] for c in checks),
        "se_converged_at": se.converged_at,
        "se_low_sample": se.low_sample,
    }


def threshold_image(image) -> np.ndarray:
    """Global-mean threshold: 1 where the pixel exceeds the image mean."""
    image = np.asarray(image, dtype=float)
    return (image > image.mean()).astype(np.int8)


def run_texture(cfg: ExperimentConfig, image) -> dict:
    """Reconstruct one binary image with each configured denoiser from the same measurements."""
    image = np.asarray(image)
    if cfg.texture.threshold:
        image = threshold_image(image)
    if not np.isin(image, (0, 1)).all():
        raise ValueError("texture input must be binary; enable texture.threshold for gray-level input")
    if image.shape != _shape(cfg).array_shape:
        raise ValueError(f"texture input has shape {image.shape}, config lattice is {_shape(cfg).array_shape}")
    beta = image.astype(np.int8)
    out = {"truth": beta, "estimates": {}, "mse": {}}
    with threadpool_limits(1):
        _, A, y, sigma2 = _measure(cfg, beta, 0)
        for kind in cfg.texture.denoisers:
            sub = with_denoiser(cfg, kind, None if kind != "bayes_window" else max(cfg.window.k, 1))
            se = compute_se(sub) if sub.amp.tau_source == "state_evolution" else None
            res = _solve(sub, beta, A, y, sigma2, 0, se)
            out["estimates"][kind] = res.estimate
            out["mse"][kind] = res.mse
    out["noise_sigma2"] = sigma2
    return out
