"""Training objective for occupancy/cut grids: per-map binary cross entropy,
a mass penalty on the occupancy predictions, their weighted combination, and
the analytic gradient of the total.

The mass term is implemented with a positive sign: it is the mean predicted
occupancy, so minimizing the total loss shrinks the amount of predicted mass
and sharpens confidences around real objects.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import TargetGrid
from .errors import DimensionMismatchError, InvariantViolation, NonFiniteInputError

EPS_CLAMP = 1e-7


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights: alpha for occupancy BCE, beta for the occupancy
    mass penalty, gamma for cut BCE."""

    alpha: float = 1.0
    beta: float = 0.1
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise InvariantViolation(f"{name} must be finite and >= 0")


@dataclass(frozen=True)
class PredictionPair:
    """Predicted occupancy/cut maps paired with their binary targets.

    Predictions are clamped into [eps_clamp, 1 - eps_clamp] on construction so
    the logarithms in the losses stay finite.
    """

    occ: np.ndarray
    cut: np.ndarray
    target: TargetGrid
    eps_clamp: float = EPS_CLAMP

    def __post_init__(self):
        if not 0 < self.eps_clamp < 0.5:
            raise InvariantViolation("eps_clamp must lie in (0, 0.5)")
        shape = (self.target.grid.rows, self.target.grid.cols)
        clamped = []
        for name, raw in (("occ", self.occ), ("cut", self.cut)):
            arr = np.asarray(raw, dtype=np.float64)
            if arr.shape != shape:
                raise DimensionMismatchError(
                    f"{name} shape {arr.shape} does not match target grid {shape}"
                )
            if not np.isfinite(arr).all():
                raise NonFiniteInputError(f"{name} predictions must be finite")
            arr = np.clip(arr, self.eps_clamp, 1.0 - self.eps_clamp)
            arr.setflags(write=False)
            clamped.append(arr)
        object.__setattr__(self, "occ", clamped[0])
        object.__setattr__(self, "cut", clamped[1])


def _paired(y, yhat) -> tuple[np.ndarray, np.ndarray]:
    ya = np.asarray(y, dtype=np.float64)
    pa = np.asarray(yhat, dtype=np.float64)
    if ya.shape != pa.shape:
        raise DimensionMismatchError(f"shapes differ: {ya.shape} vs {pa.shape}")
    return ya, pa


def bce_loss(y, yhat) -> float:
    """Binary cross entropy, natural log, averaged over all elements.

    Expects yhat already clamped strictly inside (0, 1).
    """
    ya, pa = _paired(y, yhat)
    if ya.size == 0:
        return 0.0
    terms = ya * np.log(pa) + (1.0 - ya) * np.log(1.0 - pa)
    return float(-terms.mean())


def sum_loss(yhat) -> float:
    """Mean predicted mass: (1/N) * sum of all elements."""
    arr = np.asarray(yhat, dtype=np.float64)
    if not np.isfinite(arr).all():
        raise NonFiniteInputError("sum_loss input must be finite")
    if arr.size == 0:
        return 0.0
    return float(arr.mean())


def total_loss(pred: PredictionPair, w: LossWeights) -> float:
    """alpha * BCE(occ) + beta * mass(occ) + gamma * BCE(cut)."""
    return (
        w.alpha * bce_loss(pred.target.occ, pred.occ)
        + w.beta * sum_loss(pred.occ)
        + w.gamma * bce_loss(pred.target.cut, pred.cut)
    )


def loss_gradient(pred: PredictionPair, w: LossWeights) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise derivative of total_loss w.r.t. the occ and cut predictions.

    d(bce)/dp = -(y/p - (1-y)/(1-p)) / N and d(mass)/dp = 1/N per element.
    """
    n = pred.target.occ.size
    y_occ = pred.target.occ.astype(np.float64)
    y_cut = pred.target.cut.astype(np.float64)
    d_bce_occ = -(y_occ / pred.occ - (1.0 - y_occ) / (1.0 - pred.occ)) / n
    d_bce_cut = -(y_cut / pred.cut - (1.0 - y_cut) / (1.0 - pred.cut)) / n
    grad_occ = w.alpha * d_bce_occ + w.beta / n
    grad_cut = w.gamma * d_bce_cut
    return grad_occ, grad_cut
