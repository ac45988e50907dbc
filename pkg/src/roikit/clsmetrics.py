"""Classification metrics with exact binomial confidence intervals.

classify_report thresholds scored samples into a confusion matrix and derives
accuracy, AUC (trapezoid over the ROC, ties folded into one step), sensitivity,
specificity, precision, F-measure, MCC, and the diagnostic odds ratio. A zero
DOR cell is reported as +inf with a flag rather than corrected. Intervals use
the Clopper-Pearson construction: beta quantiles found by bisection on the
regularized incomplete beta function. proportion_ci attaches such an interval
to a rate (or, affinely remapped, to an MCC value) by discretizing it back to
a success count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc

from .core import ConfusionCounts
from .errors import InputError

__all__ = [
    "ScoredSample",
    "ClsReport",
    "parse_label",
    "roc_curve",
    "roc_auc",
    "classify_report",
    "f_measure",
    "dor_from_rates",
    "beta_quantile",
    "clopper_pearson",
    "proportion_ci",
]

_POSITIVE = {"positive", "pos", "1", "true", "yes"}
_NEGATIVE = {"negative", "neg", "0", "false", "no"}


def parse_label(text: str) -> bool:
    t = text.strip().lower()
    if t in _POSITIVE:
        return True
    if t in _NEGATIVE:
        return False
    raise InputError(f"unrecognized class label {text!r}")


@dataclass(frozen=True)
class ScoredSample:
    score: float
    positive: bool

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0) or not math.isfinite(self.score):
            raise InputError(f"sample score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class ClsReport:
    counts: ConfusionCounts
    accuracy: float
    auc: float
    sensitivity: float
    specificity: float
    precision: float
    f_measure: float
    mcc: float
    dor: float
    mcc_ci: tuple[float, float]
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "counts": {"tp": self.counts.tp, "fp": self.counts.fp,
                       "fn": self.counts.fn, "tn": self.counts.tn},
            "accuracy": self.accuracy,
            "auc": self.auc,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "precision": self.precision,
            "f_measure": self.f_measure,
            "mcc": self.mcc,
            "dor": self.dor,
            "mcc_ci": list(self.mcc_ci),
            "flags": list(self.flags),
        }


def _split_samples(samples: list[ScoredSample]) -> tuple[np.ndarray, np.ndarray]:
    pos = np.array([s.score for s in samples if s.positive], dtype=np.float64)
    neg = np.array([s.score for s in samples if not s.positive], dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise InputError("need at least one positive and one negative sample")
    return pos, neg


def roc_curve(samples: list[ScoredSample]) -> list[tuple[float, float]]:
    """(FPR, TPR) points from (0,0) to (1,1), one step per distinct score."""
    pos, neg = _split_samples(samples)
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size, bool), np.zeros(neg.size, bool)])
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    labels = labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = scores.size
    while i < n:
        j = i
        while j < n and scores[j] == scores[i]:
            if labels[j]:
                tp += 1
            else:
                fp += 1
            j += 1
        points.append((fp / neg.size, tp / pos.size))
        i = j
    return points


def roc_auc(samples: list[ScoredSample]) -> float:
    """Trapezoidal area under the ROC curve."""
    pts = roc_curve(samples)
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def f_measure(precision: float, sensitivity: float) -> float:
    """Harmonic mean of precision and sensitivity; 0 when both vanish."""
    if precision + sensitivity == 0.0:
        return 0.0
    return 2.0 * precision * sensitivity / (precision + sensitivity)


def dor_from_rates(sensitivity: float, specificity: float) -> float:
    """(sens/(1-sens)) * (spec/(1-spec)); +inf at either perfect rate."""
    if sensitivity >= 1.0 or specificity >= 1.0:
        return math.inf
    return (sensitivity / (1.0 - sensitivity)) * (specificity / (1.0 - specificity))


def classify_report(
    samples: list[ScoredSample],
    threshold: float = 0.5,
    confidence: float = 0.95,
    joint_sqrt: bool = False,
) -> ClsReport:
    """Threshold at score >= threshold and compute the full metric suite."""
    pos, neg = _split_samples(samples)
    tp = int(np.count_nonzero(pos >= threshold))
    fn = pos.size - tp
    fp = int(np.count_nonzero(neg >= threshold))
    tn = neg.size - fp
    counts = ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)
    total = tp + fp + fn + tn

    flags: list[str] = []
    accuracy = (tp + tn) / total
    sensitivity = tp / (tp + fn)
    specificity = tn / (tn + fp)
    if tp + fp == 0:
        flags.append("precision: no positive predictions; read as 0")
        prec = 0.0
    else:
        prec = tp / (tp + fp)
    f = f_measure(prec, sensitivity)
    if prec + sensitivity == 0.0:
        flags.append("f_measure: precision and sensitivity both 0; read as 0")

    mcc_den = math.sqrt(float((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)))
    if mcc_den == 0.0:
        flags.append("mcc: zero denominator; read as 0")
        mcc = 0.0
    else:
        mcc = (tp * tn - fp * fn) / mcc_den

    if fp == 0 or fn == 0:
        flags.append("dor: zero off-diagonal cell; reported as +inf")
        dor = math.inf
    else:
        dor = (tp * tn) / (fp * fn)

    auc = roc_auc(samples)
    mcc_ci = proportion_ci(mcc, total, confidence, signed=True, joint_sqrt=joint_sqrt)
    return ClsReport(
        counts=counts,
        accuracy=accuracy,
        auc=auc,
        sensitivity=sensitivity,
        specificity=specificity,
        precision=prec,
        f_measure=f,
        mcc=mcc,
        dor=dor,
        mcc_ci=mcc_ci,
        flags=tuple(flags),
    )


def beta_quantile(p: float, a: float, b: float, tol: float = 1e-12) -> float:
    """Inverse regularized incomplete beta by bisection on [0, 1]."""
    if not (0.0 <= p <= 1.0):
        raise InputError(f"quantile level must lie in [0, 1], got {p}")
    if a <= 0 or b <= 0:
        raise InputError("beta shape parameters must be positive")
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if betainc(a, b, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def clopper_pearson(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """Exact binomial interval from beta quantiles.

    low solves Beta(k, n-k+1) at alpha/2 (0 when k = 0); high solves
    Beta(k+1, n-k) at 1-alpha/2 (1 when k = n).
    """
    if trials < 1:
        raise InputError("trials must be at least 1")
    if not (0 <= successes <= trials):
        raise InputError(f"successes {successes} outside [0, {trials}]")
    if not (0.0 < confidence < 1.0):
        raise InputError(f"confidence must lie in (0, 1), got {confidence}")
    alpha = 1.0 - confidence
    low = 0.0 if successes == 0 else beta_quantile(alpha / 2.0, successes, trials - successes + 1)
    high = 1.0 if successes == trials else beta_quantile(1.0 - alpha / 2.0, successes + 1, trials - successes)
    return (low, high)


def proportion_ci(
    value: float,
    n: int,
    confidence: float = 0.95,
    signed: bool = False,
    joint_sqrt: bool = False,
) -> tuple[float, float]:
    """Clopper-Pearson interval for a rate, discretized as k = round(value*n).

    signed=True treats value as lying in [-1, 1] (MCC style): it is mapped
    affinely onto [0, 1], bounded there, and the bounds mapped back.
    joint_sqrt=True raises per-side coverage to sqrt(confidence) so that two
    such intervals are jointly valid at the stated confidence.
    """
    if n < 1:
        raise InputError("n must be at least 1")
    lo_ok, hi_ok = (-1.0, 1.0) if signed else (0.0, 1.0)
    if not (lo_ok <= value <= hi_ok):
        raise InputError(f"value {value} outside [{lo_ok}, {hi_ok}]")
    conf = math.sqrt(confidence) if joint_sqrt else confidence
    unit = (value + 1.0) / 2.0 if signed else value
    k = int(math.floor(unit * n + 0.5))  # half rounds up, deterministically
    k = min(k, n)
    low, high = clopper_pearson(k, n, conf)
    if signed:
        return (2.0 * low - 1.0, 2.0 * high - 1.0)
    return (low, high)
