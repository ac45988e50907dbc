"""Tversky index, loss, and analytic gradient.

Pure-numpy reference implementation meant to double as an oracle for
framework code: the gradient is the closed-form quotient-rule derivative of
the loss with respect to each prediction pixel, so trainers can check their
autograd against it. alpha weights false positives, beta weights false
negatives; alpha = beta = 0.5 reduces to soft Dice and alpha = beta = 1 to
soft IOU.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, ProbabilityMap
from .errors import DegenerateWarning, InputError, NumericalError

__all__ = [
    "TverskyParams",
    "tversky_index",
    "tversky_loss",
    "tversky_grad",
]


@dataclass(frozen=True)
class TverskyParams:
    alpha: float = 0.5
    beta: float = 0.5
    smooth: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "beta", "smooth"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise InputError(f"TverskyParams.{name} must be finite and >= 0, got {v}")
        if self.alpha + self.beta <= 0:
            raise InputError("alpha + beta must be positive")


def _plane(arr, name: str) -> np.ndarray:
    if isinstance(arr, (ProbabilityMap, BinaryMask)):
        arr = arr.data
    out = np.asarray(arr, dtype=np.float64)
    if out.size == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(out)):
        raise InputError(f"{name} contains non-finite values")
    if out.min() < 0.0 or out.max() > 1.0:
        raise InputError(f"{name} values must lie in [0, 1]")
    return out


def _terms(pred, gt) -> tuple[np.ndarray, np.ndarray, float, float, float]:
    p = _plane(pred, "pred")
    g = _plane(gt, "gt")
    if p.shape != g.shape:
        raise InputError(f"pred shape {p.shape} does not match gt shape {g.shape}")
    inter = float(np.sum(p * g))
    fp = float(np.sum(p * (1.0 - g)))
    fn = float(np.sum((1.0 - p) * g))
    return p, g, inter, fp, fn


def tversky_index(pred, gt, params: TverskyParams = TverskyParams()) -> float:
    """(I + s) / (I + alpha*FP + beta*FN + s); degenerate 0/0 reads as 1."""
    _, _, inter, fp, fn = _terms(pred, gt)
    num = inter + params.smooth
    den = inter + params.alpha * fp + params.beta * fn + params.smooth
    if den == 0.0:
        warnings.warn(
            "empty prediction against empty reference with smooth=0; index read as 1",
            DegenerateWarning,
            stacklevel=2,
        )
        return 1.0
    return num / den


def tversky_loss(pred, gt, params: TverskyParams = TverskyParams()) -> float:
    """Complement of the index; 0 at perfect overlap."""
    return 1.0 - tversky_index(pred, gt, params)


def tversky_grad(pred, gt, params: TverskyParams = TverskyParams()) -> np.ndarray:
    """d(loss)/d(pred_k) for every pixel, same shape as pred.

    With N = I + s and D = I + alpha*FP + beta*FN + s the quotient rule gives
    d(loss)/dp_k = (N * dD_k - D * dN_k) / D^2 where dN_k = gt_k and
    dD_k = gt_k + alpha*(1 - gt_k) - beta*gt_k.
    """
    p, g, inter, fp, fn = _terms(pred, gt)
    num = inter + params.smooth
    den = inter + params.alpha * fp + params.beta * fn + params.smooth
    if den == 0.0:
        raise NumericalError(
            "gradient undefined: zero denominator (empty masks with smooth=0)"
        )
    d_num = g
    d_den = g + params.alpha * (1.0 - g) - params.beta * g
    return (num * d_den - den * d_num) / (den * den)
