"""STAPLE fusion: EM estimation of a consensus segmentation from N raters.

Alternates an E-step computing the posterior foreground probability of every
pixel under current rater performance estimates with an M-step re-estimating
each rater's sensitivity/specificity, until the parameter change drops below
tolerance. The E-step runs in the log domain so large rater counts cannot
underflow, and the observed-data log-likelihood is recorded per iteration
(EM never decreases it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, BoundingBox, ProbabilityMap, label_components, mask_to_boxes
from .errors import InputError

__all__ = [
    "RaterPerformance",
    "StapleProblem",
    "StapleResult",
    "staple_fuse",
    "fuse_masks",
    "consensus_mask",
    "consensus_boxes",
    "staple_posterior",
    "staple_log_likelihood",
]

PARAM_FLOOR = 1e-6
PARAM_CEIL = 1.0 - 1e-6
DEFAULT_INIT = 0.99999


@dataclass(frozen=True)
class RaterPerformance:
    sensitivity: float
    specificity: float

    def __post_init__(self):
        for name in ("sensitivity", "specificity"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0) or not np.isfinite(v):
                raise InputError(f"RaterPerformance.{name} must lie in (0, 1], got {v}")


@dataclass(frozen=True)
class StapleProblem:
    """Flattened fusion problem: M pixels x N raters.

    prior is the foreground probability P(C_i = 1): a scalar in (0,1) or a
    per-pixel array. frame, when set, records (width, height) so the
    posterior can be reshaped into a map.
    """

    decisions: np.ndarray
    prior: float | np.ndarray
    tol: float = 1e-6
    max_iter: int = 100
    init_sensitivity: float = DEFAULT_INIT
    init_specificity: float = DEFAULT_INIT
    frame: tuple[int, int] | None = None

    def __post_init__(self):
        d = np.asarray(self.decisions)
        if d.ndim != 2 or d.shape[0] < 1 or d.shape[1] < 1:
            raise InputError(f"decisions must be an MxN matrix, got shape {d.shape}")
        if not np.all(np.isin(d, (0, 1))):
            raise InputError("decisions entries must be 0 or 1")
        object.__setattr__(self, "decisions", d.astype(np.float64))
        prior = self.prior
        if np.isscalar(prior):
            if not (0.0 < prior < 1.0):
                raise InputError(f"scalar prior must lie strictly inside (0, 1), got {prior}")
        else:
            prior = np.asarray(prior, dtype=np.float64).ravel()
            if prior.shape[0] != d.shape[0]:
                raise InputError("per-pixel prior length must equal the pixel count")
            if prior.min() <= 0.0 or prior.max() >= 1.0:
                raise InputError("per-pixel prior values must lie strictly inside (0, 1)")
            object.__setattr__(self, "prior", prior)
        if self.tol <= 0:
            raise InputError("tol must be positive")
        if self.max_iter < 1:
            raise InputError("max_iter must be at least 1")
        if self.frame is not None:
            w, h = self.frame
            if w * h != d.shape[0]:
                raise InputError(f"frame {w}x{h} does not match {d.shape[0]} pixels")

    @classmethod
    def from_masks(
        cls,
        masks: list[BinaryMask],
        prior: float | ProbabilityMap | None = None,
        tol: float = 1e-6,
        max_iter: int = 100,
        init_sensitivity: float = DEFAULT_INIT,
        init_specificity: float = DEFAULT_INIT,
    ) -> "StapleProblem":
        if not masks:
            raise InputError("at least one rater mask is required")
        shape = masks[0].data.shape
        for i, m in enumerate(masks):
            if m.data.shape != shape:
                raise InputError(
                    f"rater mask #{i} is {m.width}x{m.height}, expected {shape[1]}x{shape[0]}"
                )
        decisions = np.stack([m.data.ravel() for m in masks], axis=1)
        if prior is None:
            # data-driven default: mean foreground fraction over all raters
            frac = float(decisions.mean())
            prior = min(max(frac, PARAM_FLOOR), PARAM_CEIL)
        elif isinstance(prior, ProbabilityMap):
            if prior.data.shape != shape:
                raise InputError("prior map dimensions must match the rater masks")
            prior = np.clip(prior.data.ravel(), PARAM_FLOOR, PARAM_CEIL)
        return cls(
            decisions=decisions,
            prior=prior,
            tol=tol,
            max_iter=max_iter,
            init_sensitivity=init_sensitivity,
            init_specificity=init_specificity,
            frame=(shape[1], shape[0]),
        )


@dataclass(frozen=True)
class StapleResult:
    posterior: np.ndarray
    performance: tuple[RaterPerformance, ...]
    iterations: int
    converged: bool
    final_delta: float
    log_likelihood: tuple[float, ...]
    frozen_updates: tuple[str, ...]
    frame: tuple[int, int] | None = None

    def posterior_map(self) -> ProbabilityMap:
        if self.frame is None:
            raise InputError("result carries no frame dimensions; fuse from masks to keep them")
        w, h = self.frame
        return ProbabilityMap(self.posterior.reshape(h, w))


def _e_step(decisions, log_prior, log_prior_c, p, q):
    # log a_i = log g_i + sum_j [B_ij log p_j + (1-B_ij) log(1-p_j)]
    # log b_i = log(1-g_i) + sum_j [(1-B_ij) log q_j + B_ij log(1-q_j)]
    log_a = log_prior + decisions @ np.log(p) + (1.0 - decisions) @ np.log1p(-p)
    log_b = log_prior_c + (1.0 - decisions) @ np.log(q) + decisions @ np.log1p(-q)
    # W_i = a/(a+b) = sigmoid(log_a - log_b); clip keeps exp() inside float64
    diff = np.clip(log_b - log_a, -700.0, 700.0)
    w = 1.0 / (1.0 + np.exp(diff))
    ll = float(np.logaddexp(log_a, log_b).sum())
    return w, ll


def _clipped_rates(performance) -> tuple[np.ndarray, np.ndarray]:
    p = np.clip(np.array([r.sensitivity for r in performance]), PARAM_FLOOR, PARAM_CEIL)
    q = np.clip(np.array([r.specificity for r in performance]), PARAM_FLOOR, PARAM_CEIL)
    return p, q


def staple_posterior(problem: StapleProblem, performance: list[RaterPerformance]) -> np.ndarray:
    """One E-step: per-pixel foreground posterior under the given rates."""
    if len(performance) != problem.decisions.shape[1]:
        raise InputError("need one RaterPerformance per rater")
    p, q = _clipped_rates(performance)
    g = problem.prior if not np.isscalar(problem.prior) else float(problem.prior)
    w, _ = _e_step(problem.decisions, np.log(np.asarray(g)), np.log1p(-np.asarray(g)), p, q)
    return w


def staple_log_likelihood(problem: StapleProblem, performance: list[RaterPerformance]) -> float:
    """Observed-data log-likelihood of the decision matrix under (prior, p, q)."""
    if len(performance) != problem.decisions.shape[1]:
        raise InputError("need one RaterPerformance per rater")
    p, q = _clipped_rates(performance)
    g = problem.prior if not np.isscalar(problem.prior) else float(problem.prior)
    _, ll = _e_step(problem.decisions, np.log(np.asarray(g)), np.log1p(-np.asarray(g)), p, q)
    return ll


def staple_fuse(problem: StapleProblem) -> StapleResult:
    """Run EM to convergence (or max_iter) and return posterior + performance."""
    decisions = problem.decisions
    m, n = decisions.shape
    g = problem.prior if not np.isscalar(problem.prior) else float(problem.prior)
    log_prior = np.log(np.asarray(g, dtype=np.float64))
    log_prior_c = np.log1p(-np.asarray(g, dtype=np.float64))

    p = np.full(n, np.clip(problem.init_sensitivity, PARAM_FLOOR, PARAM_CEIL))
    q = np.full(n, np.clip(problem.init_specificity, PARAM_FLOOR, PARAM_CEIL))

    frozen: list[str] = []
    likelihoods: list[float] = []
    w = np.full(m, 0.5)
    delta = np.inf
    converged = False
    iterations = 0

    for it in range(1, problem.max_iter + 1):
        iterations = it
        w, ll = _e_step(decisions, log_prior, log_prior_c, p, q)
        likelihoods.append(ll)

        sum_w = float(w.sum())
        sum_wc = float(m - sum_w)
        if sum_w <= 0.0:
            new_p = p.copy()
            frozen.append(f"iteration {it}: posterior mass all background, sensitivity frozen")
        else:
            new_p = (w @ decisions) / sum_w
        if sum_wc <= 0.0:
            new_q = q.copy()
            frozen.append(f"iteration {it}: posterior mass all foreground, specificity frozen")
        else:
            new_q = ((1.0 - w) @ (1.0 - decisions)) / sum_wc

        new_p = np.clip(new_p, PARAM_FLOOR, PARAM_CEIL)
        new_q = np.clip(new_q, PARAM_FLOOR, PARAM_CEIL)
        delta = float(max(np.abs(new_p - p).max(), np.abs(new_q - q).max()))
        p, q = new_p, new_q
        if delta < problem.tol:
            converged = True
            break

    # posterior under the final parameters
    w, ll = _e_step(decisions, log_prior, log_prior_c, p, q)
    likelihoods.append(ll)

    perf = tuple(RaterPerformance(float(pj), float(qj)) for pj, qj in zip(p, q))
    return StapleResult(
        posterior=np.clip(w, 0.0, 1.0),
        performance=perf,
        iterations=iterations,
        converged=converged,
        final_delta=delta,
        log_likelihood=tuple(likelihoods),
        frozen_updates=tuple(frozen),
        frame=problem.frame,
    )


def fuse_masks(
    masks: list[BinaryMask],
    prior: float | ProbabilityMap | None = None,
    tol: float = 1e-6,
    max_iter: int = 100,
) -> StapleResult:
    """Convenience wrapper: build the problem from masks and fuse."""
    return staple_fuse(StapleProblem.from_masks(masks, prior=prior, tol=tol, max_iter=max_iter))


def consensus_mask(result: StapleResult, threshold: float = 0.5) -> BinaryMask:
    """Threshold the posterior (>= convention, ties go to foreground)."""
    if not (0.0 < threshold < 1.0):
        raise InputError(f"threshold must lie in (0, 1), got {threshold}")
    return result.posterior_map().threshold(threshold)


def consensus_boxes(result: StapleResult, threshold: float = 0.5, connectivity: int = 8) -> list[BoundingBox]:
    """Tight boxes over the connected components of the consensus mask."""
    return mask_to_boxes(consensus_mask(result, threshold), connectivity)
