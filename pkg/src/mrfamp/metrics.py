"""Losses and the empirical-versus-state-evolution concentration report."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError

__all__ = ["mse", "pl2_loss", "TrialSummary", "concentration_report"]

PL2_KINDS = ("squared", "absolute")


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def pl2_loss(kind: str, estimate, truth) -> float:
    """Average of a pseudo-Lipschitz loss over the lattice."""
    a, b = _pair(estimate, truth)
    if kind == "squared":
        return float(np.mean((a - b) ** 2))
    if kind == "absolute":
        return float(np.mean(np.abs(a - b)))
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {PL2_KINDS}")


@dataclass
class TrialSummary:
    seed: int
    losses: np.ndarray  # losses[t] = loss of beta^{t+1}
    prediction: np.ndarray = field(default=None)

    def __post_init__(self):
        self.losses = np.asarray(self.losses, dtype=float)
        if self.prediction is not None:
            self.prediction = np.asarray(self.prediction, dtype=float)
            if self.prediction.shape != self.losses.shape:
                raise ShapeError("losses and predictions have different lengths")

    @property
    def deviations(self):
        if self.prediction is None:
            return None
        return self.losses - self.prediction


def concentration_report(trials, sigma2, delta: float, band: float = 0.1) -> list[dict]:
    """Per-iteration comparison of trial losses with ``delta * sigma_{t+1}^2``.

    ``sigma2`` is the state-evolution sequence ``sigma_0^2, sigma_1^2, ...`` (or
    an object with a ``sigma2`` attribute).  Row ``t`` compares the loss of
    ``beta^{t+1}`` against ``delta * sigma2[t + 1]``; ``within_band`` is the
    fraction of trials whose relative deviation is at most ``band``.
    """
    trials = list(trials)
    if len(trials) < 2:
        raise ValueError("need at least two trials")
    lengths = {t.losses.size for t in trials}
    if len(lengths) != 1:
        raise ShapeError(f"trials have different lengths: {sorted(lengths)}")
    sigma2 = np.asarray(getattr(sigma2, "sigma2", sigma2), dtype=float)
    n_iter = lengths.pop()
    if sigma2.size < n_iter + 1:
        raise ShapeError(f"need {n_iter + 1} state-evolution values, got {sigma2.size}")
    losses = np.stack([t.losses for t in trials])
    rows = []
    for t in range(n_iter):
        pred = delta * sigma2[t + 1]
        col = losses[:, t]
        mean = float(np.mean(col))
        rel = (col - pred) / pred if pred != 0 else np.full_like(col, np.nan)
        rows.append({
            "t": t,
            "mean": mean,
            "std": float(np.std(col, ddof=1)),
            "prediction": float(pred),
            "deviation": mean - float(pred),
            "mean_deviation": float(np.mean(col - pred)),
            "std_deviation": float(np.std(col - pred, ddof=0)),
            "relative_deviation": (mean - pred) / pred if pred != 0 else float("nan"),
            "within_band": float(np.mean(np.abs(rel) <= band)),
        })
    return rows
