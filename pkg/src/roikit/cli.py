"""Umbrella command line.

Every subcommand prints one machine-readable payload to stdout (JSON by
default, flat key,value CSV with --format csv) and sends diagnostics to
stderr. Exit codes: 0 success, 1 input error, 2 numerical failure. File
outputs are written atomically, and results are independent of --threads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .augment import AugmentSpec, augment_manifest, assemble_at, split_manifest
from .clsmetrics import ScoredSample, classify_report, parse_label, roc_curve
from .core import ProbabilityMap, boxes_to_mask
from .errors import InputError, NumericalError
from .fileio import (
    atomic_write_bytes,
    atomic_write_text,
    read_boxes_json,
    read_feature_stack,
    read_head_json,
    read_image,
    read_mask_png,
    read_pfm,
    read_probability_map,
    write_boxes_json,
    write_mask_png,
    write_pfm,
)
from .manifest import read_manifest_csv, write_manifest_csv
from .preprocess import preprocess_chain, rescale_boxes
from .relevance import DenseHead, FeatureStack, crm, heat_to_mask, upscale_relevance
from .segmetrics import ApConfig
from .staple import StapleProblem, consensus_boxes, consensus_mask, staple_fuse
from .tversky import TverskyParams, tversky_grad, tversky_index, tversky_loss
from .via import import_via, pipeline_consensus
from . import report as report_mod

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; reserve 2 for numerical
    # failures and surface usage problems as input errors instead
    def error(self, message):
        raise InputError(message)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return {math.inf: "inf", -math.inf: "-inf"}.get(obj, "nan")
    return obj


def _flatten(obj, prefix: str = "") -> list[tuple[str, object]]:
    if isinstance(obj, dict):
        rows: list[tuple[str, object]] = []
        for k in sorted(obj, key=str):
            rows.extend(_flatten(obj[k], f"{prefix}{k}."))
        return rows
    if isinstance(obj, list):
        rows = []
        for i, v in enumerate(obj):
            rows.extend(_flatten(v, f"{prefix}{i}."))
        return rows
    return [(prefix[:-1], obj)]


def _emit(payload: dict, fmt: str) -> None:
    payload = _jsonable(payload)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in _flatten(payload):
            writer.writerow([key, value])
        sys.stdout.write(buf.getvalue())
    else:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_json(path: str | Path, payload) -> None:
    atomic_write_text(str(path), json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n")


def _pmap(fn, items, threads: int) -> list:
    """Order-preserving map, optionally on a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- fuse

def _cmd_fuse(args) -> dict:
    masks = [read_mask_png(p) for p in args.masks]
    problem = StapleProblem.from_masks(
        masks, prior=args.prior, tol=args.tol, max_iter=args.max_iter
    )
    result = staple_fuse(problem)
    consensus = consensus_mask(result, args.threshold)
    if args.out:
        write_pfm(result.posterior_map().data, args.out)
    if args.out_mask:
        write_mask_png(consensus, args.out_mask)
    perf = [
        {"sensitivity": r.sensitivity, "specificity": r.specificity}
        for r in result.performance
    ]
    if args.out_perf:
        _write_json(args.out_perf, perf)
    return {
        "raters": len(masks),
        "iterations": result.iterations,
        "converged": result.converged,
        "final_delta": result.final_delta,
        "log_likelihood": result.log_likelihood[-1],
        "performance": perf,
        "frozen_updates": list(result.frozen_updates),
        "consensus_foreground": consensus.foreground_count(),
        "consensus_boxes": [b.as_dict() for b in consensus_boxes(result, args.threshold)],
    }


# ---------------------------------------------------------------- eval-seg

def _read_ap_config(path: str | None) -> ApConfig:
    if path is None:
        return ApConfig()
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    known = {"iou_thresholds", "binarize_threshold", "min_component_area"}
    extra = set(doc) - known
    if extra:
        raise InputError(f"{path}: unknown config keys {sorted(extra)}")
    kwargs = {}
    if "iou_thresholds" in doc:
        kwargs["iou_thresholds"] = tuple(doc["iou_thresholds"])
    if "binarize_threshold" in doc:
        kwargs["binarize_threshold"] = float(doc["binarize_threshold"])
    if "min_component_area" in doc:
        kwargs["min_component_area"] = int(doc["min_component_area"])
    return ApConfig(**kwargs)


def _cmd_eval_seg(args) -> dict:
    pred_dir = Path(args.pred_dir)
    gt_dir = Path(args.gt_dir)
    pred_files = sorted(pred_dir.glob("*.pfm"))
    if not pred_files:
        raise InputError(f"no .pfm prediction maps found in {pred_dir}")
    config = _read_ap_config(args.config)

    def load(pred_path: Path):
        gt_path = gt_dir / (pred_path.stem + ".png")
        if not gt_path.exists():
            raise InputError(f"no ground-truth mask for {pred_path.name} (expected {gt_path})")
        return pred_path.stem, read_probability_map(str(pred_path)), read_mask_png(str(gt_path))

    items = _pmap(load, pred_files, args.threads)
    evaluation = report_mod.evaluate_segmentation(items, config)
    out = Path(args.out)
    _write_json(out, evaluation.metrics)
    for t, curve in evaluation.curves.items():
        atomic_write_text(str(out.parent / f"pr_{t:.2f}.csv"), report_mod.pr_csv_text(curve))
    png = report_mod.render_pr_figure(evaluation.curves, evaluation.metrics["ap_per_threshold"])
    atomic_write_bytes(str(out.parent / "pr_curves.png"), png)
    return evaluation.metrics


# ---------------------------------------------------------------- eval-cls

def _read_scores_csv(path: str) -> list[ScoredSample]:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    with fh:
        reader = csv.DictReader(fh)
        required = {"id", "score", "label"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise InputError(f"{path}: scores CSV must have columns id,score,label")
        samples = []
        for row_no, row in enumerate(reader, start=2):
            try:
                score = float(row["score"])
            except ValueError as e:
                raise InputError(f"{path}:{row_no}: score {row['score']!r} is not a number") from e
            samples.append(ScoredSample(score=score, positive=parse_label(row["label"])))
    if not samples:
        raise InputError(f"{path}: no samples")
    return samples


def _cmd_eval_cls(args) -> dict:
    samples = _read_scores_csv(args.scores)
    rep = classify_report(
        samples, threshold=args.threshold,
        confidence=args.confidence, joint_sqrt=args.joint_sqrt,
    )
    payload = rep.as_dict()
    points = roc_curve(samples)
    out = Path(args.out)
    _write_json(out, payload)
    atomic_write_text(str(out.parent / "roc.csv"), report_mod.roc_csv_text(points))
    atomic_write_bytes(str(out.parent / "roc.png"), report_mod.render_roc_figure(points, rep.auc))
    return payload


# ---------------------------------------------------------------- preprocess

def _cmd_preprocess(args) -> dict:
    image = read_image(args.image)
    lung = read_mask_png(args.lung_mask)
    final, transform, stats = preprocess_chain(
        image, lung, size=args.size, lo_pct=args.lo_pct, hi_pct=args.hi_pct
    )
    write_pfm(final.data, args.out)
    payload: dict = {
        "transform": transform.as_dict(),
        "stats": {"mean": stats.mean, "std": stats.std, "degenerate": stats.degenerate},
        "size": args.size,
    }
    if args.boxes:
        boxes_in = read_boxes_json(args.boxes)
        boxes_out = rescale_boxes(boxes_in, transform)
        if args.out_boxes:
            write_boxes_json(boxes_out, args.out_boxes)
        payload["boxes_in"] = len(boxes_in)
        payload["boxes_out"] = len(boxes_out)
    if args.out_transform:
        _write_json(args.out_transform, transform.as_dict())
    return payload


# ---------------------------------------------------------------- loss

def _cmd_loss(args) -> dict:
    pred = read_probability_map(args.pred)
    gt = read_mask_png(args.gt)
    params = TverskyParams(alpha=args.alpha, beta=args.beta, smooth=args.smooth)
    index = tversky_index(pred, gt, params)
    loss = tversky_loss(pred, gt, params)
    if args.grad:
        write_pfm(tversky_grad(pred, gt, params), args.grad)
    return {
        "index": index,
        "loss": loss,
        "alpha": args.alpha,
        "beta": args.beta,
        "smooth": args.smooth,
    }


# ---------------------------------------------------------------- crm

def _cmd_crm(args) -> dict:
    stack = FeatureStack(read_feature_stack(args.features))
    weights, bias = read_head_json(args.head)
    head = DenseHead(weights=weights, bias=bias)
    rmap = crm(stack, head, classes=args.classes)
    if args.upscale:
        w, h = args.upscale
        rmap = upscale_relevance(rmap, w, h)
    write_pfm(rmap.normalized.data, args.out)
    return {
        "height": rmap.normalized.height,
        "width": rmap.normalized.width,
        "channels": stack.channels,
        "classes": head.classes if args.classes is None else len(args.classes),
        "raw_min": float(rmap.raw.min()),
        "raw_max": float(rmap.raw.max()),
    }


# ---------------------------------------------------------------- heat-to-mask

def _cmd_heat_to_mask(args) -> dict:
    data = read_pfm(args.infile)
    if data.ndim != 2:
        raise InputError("heat map must be a single-channel PFM")
    pmap = ProbabilityMap(np.clip(data, 0.0, 1.0))
    mask, polys = heat_to_mask(
        pmap, threshold=args.threshold,
        connectivity=args.connectivity, min_area=args.min_area,
    )
    write_mask_png(mask, args.out)
    if args.out_polys:
        _write_json(args.out_polys, [[[int(x), int(y)] for x, y in poly] for poly in polys])
    return {
        "components": len(polys),
        "foreground": mask.foreground_count(),
        "threshold": args.threshold,
        "min_area": args.min_area,
    }


# ---------------------------------------------------------------- augment / split / assemble-at

def _read_augment_spec(path: str | None, seed: int) -> AugmentSpec:
    if path is None:
        return AugmentSpec(seed=seed)
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}") from e
    if "seed" not in doc:
        doc["seed"] = seed
    return AugmentSpec.from_dict(doc)


def _cmd_augment(args) -> dict:
    manifest = read_manifest_csv(args.manifest)
    spec = _read_augment_spec(args.spec, args.seed)
    out = augment_manifest(manifest, spec, repeat=args.repeat, out_dir=args.out_dir)
    write_manifest_csv(out, args.out_manifest)
    return {
        "entries_in": len(manifest),
        "entries_out": len(out),
        "augmented": len(out) - len(manifest),
        "spec": spec.as_dict(),
    }


def _cmd_split(args) -> dict:
    manifest = read_manifest_csv(args.manifest)
    out = split_manifest(manifest, val_frac=args.val_frac, seed=args.seed)
    write_manifest_csv(out, args.out)
    return {
        "train": len(out.subset("train")),
        "val": len(out.subset("val")),
        "test": len(out.subset("test")),
        "seed": args.seed,
        "val_frac": args.val_frac,
    }


def _cmd_assemble_at(args) -> dict:
    base = read_manifest_csv(args.base)
    weak = read_manifest_csv(args.weak)
    out = assemble_at(base, weak)
    write_manifest_csv(out, args.out)
    return {
        "base": len(base),
        "weak": len(weak),
        "total": len(out),
        "train_total": len(out.subset("train")),
    }


# ---------------------------------------------------------------- via-import / consensus

def _cmd_via_import(args) -> dict:
    box_map = import_via(args.infile)
    payload = {
        name: [b.as_dict() for b in boxes] for name, boxes in box_map.items()
    }
    if args.out:
        _write_json(args.out, payload)
    return {
        "images": len(box_map),
        "boxes": sum(len(v) for v in box_map.values()),
        "annotations": payload,
    }


def _cmd_consensus(args) -> dict:
    results = pipeline_consensus(
        args.via, (args.width, args.height),
        threshold=args.threshold, prior=args.prior,
        tol=args.tol, max_iter=args.max_iter,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {}

    def save(item):
        name, res = item
        stem = Path(name).stem
        write_mask_png(res.mask, str(out_dir / f"{stem}_consensus.png"))
        write_pfm(res.posterior.data, str(out_dir / f"{stem}_posterior.pfm"))
        return name, {
            "boxes": [b.as_dict() for b in res.boxes],
            "performance": [
                {"sensitivity": r.sensitivity, "specificity": r.specificity}
                for r in res.performance
            ],
            "iterations": res.iterations,
            "converged": res.converged,
            "missing_raters": list(res.missing_raters),
        }

    for name, entry in _pmap(save, sorted(results.items()), args.threads):
        summary[name] = entry
    _write_json(out_dir / "consensus.json", summary)
    return summary


# ---------------------------------------------------------------- boxes-to-mask

def _cmd_boxes_to_mask(args) -> dict:
    boxes = read_boxes_json(args.boxes)
    mask = boxes_to_mask(boxes, args.width, args.height)
    write_mask_png(mask, args.out)
    return {"boxes": len(boxes), "foreground": mask.foreground_count()}


# ---------------------------------------------------------------- parser

def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for seeded subcommands")
    common.add_argument("--threads", type=int, default=1, help="worker threads for batch steps")
    common.add_argument("--format", choices=("json", "csv"), default="json",
                        help="stdout payload format")

    parser = _Parser(prog="roikit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", parents=[common], help="fuse rater masks into a consensus")
    p.add_argument("--masks", nargs="+", required=True, metavar="PNG")
    p.add_argument("--prior", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", help="posterior PFM path")
    p.add_argument("--out-mask", help="consensus mask PNG path")
    p.add_argument("--out-perf", help="per-rater performance JSON path")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("eval-seg", parents=[common], help="segmentation metrics over a corpus")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--config", help="AP config JSON")
    p.add_argument("--out", required=True, help="metrics JSON path")
    p.set_defaults(func=_cmd_eval_seg)

    p = sub.add_parser("eval-cls", parents=[common], help="classification metrics from scores CSV")
    p.add_argument("--scores", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--joint-sqrt", action="store_true",
                   help="per-side coverage sqrt(confidence) for jointly valid intervals")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=_cmd_eval_cls)

    p = sub.add_parser("preprocess", parents=[common], help="lung crop, resize, contrast, standardize")
    p.add_argument("--image", required=True)
    p.add_argument("--lung-mask", required=True)
    p.add_argument("--boxes", help="annotation boxes JSON to carry through")
    p.add_argument("--size", type=int, default=256)
    p.add_argument("--lo-pct", type=float, default=1.0)
    p.add_argument("--hi-pct", type=float, default=99.0)
    p.add_argument("--out", required=True, help="output PFM path")
    p.add_argument("--out-boxes", help="rescaled boxes JSON path")
    p.add_argument("--out-transform", help="crop transform JSON path")
    p.set_defaults(func=_cmd_preprocess)

    p = sub.add_parser("loss", parents=[common], help="Tversky index/loss, optional gradient")
    p.add_argument("--pred", required=True, help="prediction PFM")
    p.add_argument("--gt", required=True, help="reference mask PNG")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--smooth", type=float, default=1.0)
    p.add_argument("--grad", help="write d(loss)/d(pred) as PFM")
    p.set_defaults(func=_cmd_loss)

    p = sub.add_parser("crm", parents=[common], help="relevance map from features + head")
    p.add_argument("--features", required=True, help="PFM stack file or directory")
    p.add_argument("--head", required=True, help="head JSON {weights, bias}")
    p.add_argument("--classes", type=int, nargs="+", default=None)
    p.add_argument("--upscale", type=int, nargs=2, metavar=("W", "H"), default=None)
    p.add_argument("--out", required=True, help="normalized relevance PFM path")
    p.set_defaults(func=_cmd_crm)

    p = sub.add_parser("heat-to-mask", parents=[common], help="binarize + vectorize a heat map")
    p.add_argument("--in", dest="infile", required=True, help="heat map PFM")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--min-area", type=int, default=16)
    p.add_argument("--connectivity", type=int, choices=(4, 8), default=8)
    p.add_argument("--out", required=True, help="mask PNG path")
    p.add_argument("--out-polys", help="polygon JSON path")
    p.set_defaults(func=_cmd_heat_to_mask)

    p = sub.add_parser("augment", parents=[common], help="write augmented copies of train entries")
    p.add_argument("--manifest", required=True)
    p.add_argument("--spec", help="augmentation spec JSON")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--out-manifest", required=True)
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("split", parents=[common], help="patient-level train/val split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--val-frac", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_split)

    p = sub.add_parser("assemble-at", parents=[common], help="merge base + weak-pair manifests")
    p.add_argument("--base", required=True)
    p.add_argument("--weak", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_assemble_at)

    p = sub.add_parser("via-import", parents=[common], help="extract boxes from a VIA project")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", help="boxes-per-image JSON path")
    p.set_defaults(func=_cmd_via_import)

    p = sub.add_parser("consensus", parents=[common],
                       help="VIA files to per-image consensus masks and boxes")
    p.add_argument("--via", action="append", required=True, metavar="JSON",
                   help="rater VIA export; repeat per rater")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--prior", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_consensus)

    p = sub.add_parser("boxes-to-mask", parents=[common], help="rasterize a boxes JSON")
    p.add_argument("--boxes", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--out", required=True, help="mask PNG path")
    p.set_defaults(func=_cmd_boxes_to_mask)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        payload = args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except NumericalError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if payload is not None:
        _emit(payload, args.format)
    return 0


if __name__ == "__main__":
    sys.exit(main())
