"""Corpus-level evaluation drivers and figure rendering.

evaluate_segmentation walks (name, probability map, ground truth) triples,
reports pixel metrics per image, on aggregate counts, and as per-image means
side by side, and computes instance AP with detections pooled over the whole
corpus per IOU threshold. Figures are rendered headlessly (Agg) and written
with stable metadata so repeated runs produce identical bytes.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .core import BinaryMask, ProbabilityMap, label_components
from .errors import NumericalError
from .segmetrics import (
    ApConfig,
    PRCurve,
    average_precision,
    curve_from_flags,
    extract_instances,
    greedy_match_flags,
    pixel_confusion,
    seg_scores,
)

__all__ = [
    "SegEvaluation",
    "gt_regions",
    "evaluate_segmentation",
    "pr_csv_text",
    "roc_csv_text",
    "render_pr_figure",
    "render_roc_figure",
]


def _plt():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def gt_regions(gt: BinaryMask, connectivity: int = 8) -> list[BinaryMask]:
    """Connected components of a ground-truth mask as separate regions."""
    labels, n = label_components(gt, connectivity)
    return [BinaryMask((labels == k).astype(np.uint8)) for k in range(1, n + 1)]


@dataclass(frozen=True)
class SegEvaluation:
    metrics: dict
    curves: dict[float, PRCurve]


def evaluate_segmentation(
    items: list[tuple[str, ProbabilityMap, BinaryMask]],
    config: ApConfig = ApConfig(),
) -> SegEvaluation:
    """Pixel metrics plus corpus-pooled instance AP over IOU thresholds."""
    per_image: dict[str, dict[str, float]] = {}
    total = None
    all_dets: list[tuple[list, list]] = []
    n_gt_total = 0
    for name, pred, gt in items:
        counts = pixel_confusion(pred.threshold(config.binarize_threshold), gt)
        per_image[name] = seg_scores(counts)
        total = counts if total is None else total + counts
        dets = extract_instances(pred, config)
        regions = gt_regions(gt)
        n_gt_total += len(regions)
        all_dets.append((dets, regions))

    metrics: dict = {"per_image": per_image}
    if total is not None:
        metrics["aggregate"] = seg_scores(total)
        keys = ("iou", "dice", "precision", "recall")
        metrics["mean_per_image"] = {
            k: float(np.mean([per_image[n][k] for n in per_image])) for k in keys
        }

    if n_gt_total == 0:
        raise NumericalError("average precision is undefined: the corpus has no ground-truth regions")
    curves: dict[float, PRCurve] = {}
    ap: dict[str, float] = {}
    for t in config.iou_thresholds:
        flags: list[tuple[float, bool]] = []
        for dets, regions in all_dets:
            flags.extend(greedy_match_flags(dets, regions, t))
        flags.sort(key=lambda rec: -rec[0])
        curve = curve_from_flags(flags, n_gt_total)
        curves[t] = curve
        ap[f"{t:.2f}"] = average_precision(curve)
    metrics["ap_per_threshold"] = ap
    metrics["ap_range"] = float(sum(ap.values()) / len(ap))
    return SegEvaluation(metrics=metrics, curves=curves)


def pr_csv_text(curve: PRCurve) -> str:
    lines = ["recall,precision"]
    for r, p in curve.points:
        lines.append(f"{r!r},{p!r}")
    return "\n".join(lines) + "\n"


def roc_csv_text(points: list[tuple[float, float]]) -> str:
    lines = ["fpr,tpr"]
    for x, y in points:
        lines.append(f"{x!r},{y!r}")
    return "\n".join(lines) + "\n"


def _figure_png(fig) -> bytes:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=100, metadata={"Software": None})
    return buf.getvalue()


def render_pr_figure(curves: dict[float, PRCurve], ap: dict[str, float]) -> bytes:
    """Precision-recall curves, one line per IOU threshold, as PNG bytes."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 5))
    try:
        for t in sorted(curves):
            curve = curves[t]
            rec = [0.0] + list(curve.recalls())
            prec = [1.0] + list(curve.precisions())
            label = f"IOU {t:.2f} (AP {ap.get(f'{t:.2f}', 0.0):.3f})"
            ax.step(rec, prec, where="post", label=label, linewidth=1.2)
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.05)
        ax.set_title("precision-recall by IOU threshold")
        ax.legend(fontsize=7, loc="lower left")
        fig.tight_layout()
        return _figure_png(fig)
    finally:
        plt.close(fig)


def render_roc_figure(points: list[tuple[float, float]], auc: float) -> bytes:
    """ROC curve with the chance diagonal, as PNG bytes."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5.5, 5))
    try:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, linewidth=1.4, label=f"AUC {auc:.4f}")
        ax.plot([0, 1], [0, 1], linestyle="--", linewidth=0.8, color="gray")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_xlim(0.0, 1.0)
        ax.set_ylim(0.0, 1.05)
        ax.set_title("ROC")
        ax.legend(fontsize=8, loc="lower right")
        fig.tight_layout()
        return _figure_png(fig)
    finally:
        plt.close(fig)
