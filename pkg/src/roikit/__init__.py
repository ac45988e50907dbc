"""Ground-truth fusion and evaluation toolkit for region-of-interest segmentation."""

from .errors import (
    RoikitError,
    InputError,
    NumericalError,
    DegenerateWarning,
    DroppedItemWarning,
)
from .core import (
    ImagePlane,
    BinaryMask,
    ProbabilityMap,
    BoundingBox,
    ConfusionCounts,
    boxes_to_mask,
    mask_to_boxes,
    label_components,
    box_iou,
)
from .manifest import (
    ManifestEntry,
    DatasetManifest,
    read_manifest_csv,
    parse_manifest_csv,
    write_manifest_csv,
    manifest_csv_text,
)
from .staple import (
    RaterPerformance,
    StapleProblem,
    StapleResult,
    staple_fuse,
    staple_posterior,
    staple_log_likelihood,
    fuse_masks,
    consensus_mask,
    consensus_boxes,
)
from .tversky import TverskyParams, tversky_index, tversky_loss, tversky_grad
from .segmetrics import (
    DEFAULT_IOU_THRESHOLDS,
    ApConfig,
    InstanceDetection,
    PRCurve,
    pixel_confusion,
    iou,
    dice,
    precision,
    recall,
    seg_scores,
    dice_from_iou,
    region_iou,
    extract_instances,
    match_instances,
    average_precision,
    ap_per_threshold,
    ap_range,
)
from .clsmetrics import (
    ScoredSample,
    ClsReport,
    parse_label,
    roc_curve,
    roc_auc,
    f_measure,
    dor_from_rates,
    classify_report,
    beta_quantile,
    clopper_pearson,
    proportion_ci,
)
from .preprocess import (
    NormalizationStats,
    CropTransform,
    lung_crop,
    resize,
    resize_mask,
    saturate_contrast,
    standardize,
    rescale_boxes,
    preprocess_chain,
)
from .relevance import (
    FeatureStack,
    DenseHead,
    RelevanceMap,
    crm,
    upscale_relevance,
    trace_boundary,
    chain_to_polygon,
    rasterize_polygons,
    heat_to_mask,
    WeakMaskParams,
    build_weak_pairs,
)
from .augment import (
    AugmentSpec,
    augment_pair,
    augment_image,
    augment_manifest,
    split_manifest,
    assemble_at,
)
from .via import import_via, export_via, ConsensusResult, pipeline_consensus
from .report import (
    SegEvaluation,
    evaluate_segmentation,
    gt_regions,
    pr_csv_text,
    roc_csv_text,
    render_pr_figure,
    render_roc_figure,
)

__version__ = "0.1.0"

__all__ = [
    "RoikitError",
    "InputError",
    "NumericalError",
    "DegenerateWarning",
    "DroppedItemWarning",
    "ImagePlane",
    "BinaryMask",
    "ProbabilityMap",
    "BoundingBox",
    "ConfusionCounts",
    "boxes_to_mask",
    "mask_to_boxes",
    "label_components",
    "box_iou",
    "ManifestEntry",
    "DatasetManifest",
    "read_manifest_csv",
    "parse_manifest_csv",
    "write_manifest_csv",
    "manifest_csv_text",
    "RaterPerformance",
    "StapleProblem",
    "StapleResult",
    "staple_fuse",
    "staple_posterior",
    "staple_log_likelihood",
    "fuse_masks",
    "consensus_mask",
    "consensus_boxes",
    "TverskyParams",
    "tversky_index",
    "tversky_loss",
    "tversky_grad",
    "DEFAULT_IOU_THRESHOLDS",
    "ApConfig",
    "InstanceDetection",
    "PRCurve",
    "pixel_confusion",
    "iou",
    "dice",
    "precision",
    "recall",
    "seg_scores",
    "dice_from_iou",
    "region_iou",
    "extract_instances",
    "match_instances",
    "average_precision",
    "ap_per_threshold",
    "ap_range",
    "ScoredSample",
    "ClsReport",
    "parse_label",
    "roc_curve",
    "roc_auc",
    "f_measure",
    "dor_from_rates",
    "classify_report",
    "beta_quantile",
    "clopper_pearson",
    "proportion_ci",
    "NormalizationStats",
    "CropTransform",
    "lung_crop",
    "resize",
    "resize_mask",
    "saturate_contrast",
    "standardize",
    "rescale_boxes",
    "preprocess_chain",
    "FeatureStack",
    "DenseHead",
    "RelevanceMap",
    "crm",
    "upscale_relevance",
    "trace_boundary",
    "chain_to_polygon",
    "rasterize_polygons",
    "heat_to_mask",
    "WeakMaskParams",
    "build_weak_pairs",
    "AugmentSpec",
    "augment_pair",
    "augment_image",
    "augment_manifest",
    "split_manifest",
    "assemble_at",
    "import_via",
    "export_via",
    "ConsensusResult",
    "pipeline_consensus",
    "SegEvaluation",
    "evaluate_segmentation",
    "gt_regions",
    "pr_csv_text",
    "roc_csv_text",
    "render_pr_figure",
    "render_roc_figure",
]
