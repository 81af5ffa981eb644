"""Gaussian measurement matrices and noisy linear observations ``y = A vec(beta) + w``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSizeError, ShapeError, ZeroSignalError
from .lattice import vectorize

__all__ = [
    "MeasurementModel",
    "n_measurements",
    "sample_matrix",
    "calibrate_noise",
    "measure",
    "expected_noise_variance",
]


@dataclass(frozen=True, eq=False)
class MeasurementModel:
    matrix: np.ndarray
    sigma2: float

    def __post_init__(self):
        if self.matrix.ndim != 2:
            raise ShapeError("measurement matrix must be 2-D")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("measurement matrix has non-finite entries")
        if self.sigma2 < 0:
            raise ValueError("noise variance must be >= 0")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def signal_len(self) -> int:
        return self.matrix.shape[1]

    @property
    def delta(self) -> float:
        return self.n / self.signal_len


def n_measurements(delta: float, signal_len: int) -> int:
    """Number of rows for a target ratio; rounds ``delta * |Gamma|`` down."""
    n = math.floor(delta * signal_len + 1e-9)
    if n < 1:
        raise InvalidSizeError(f"delta={delta} gives no measurements for {signal_len} unknowns")
    return n


def sample_matrix(n: int, cols: int, seed=None) -> np.ndarray:
    """I.i.d. ``N(0, 1/n)`` entries, so columns have unit expected norm."""
    if n < 1 or cols < 1:
        raise InvalidSizeError(f"matrix dimensions must be positive, got {n}x{cols}")
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, cols)) / math.sqrt(n)


def calibrate_noise(A: np.ndarray, beta: np.ndarray, snr_db: float) -> float:
    """Noise variance giving ``||A beta||^2 / (n sigma^2) = 10^(snr_db/10)``."""
    if not math.isfinite(snr_db):
        if snr_db > 0:
            return 0.0
        raise ValueError("snr_db must be finite or +inf")
    signal = A @ vectorize(beta).astype(float)
    power = float(signal @ signal)
    if power == 0.0:
        raise ZeroSignalError("cannot calibrate noise for a zero signal")
    return power / (A.shape[0] * 10.0 ** (snr_db / 10.0))


def expected_noise_variance(second_moment: float, delta: float, snr_db: float) -> float:
    """Same convention with ``||A beta||^2`` replaced by its expectation ``|Gamma| E[beta_1^2]``."""
    return second_moment / (delta * 10.0 ** (snr_db / 10.0))


def measure(A: np.ndarray, beta: np.ndarray, sigma2: float, seed=None) -> np.ndarray:
    x = vectorize(beta).astype(float)
    if A.ndim != 2 or A.shape[1] != x.size:
        raise ShapeError(f"matrix with {A.shape[-1]} columns cannot act on a signal of length {x.size}")
    y = A @ x
    if sigma2 > 0:
        rng = np.random.default_rng(seed)
        y = y + math.sqrt(sigma2) * rng.standard_normal(A.shape[0])
    return y
