"""Fluorescence angiography classification and perfusion boundary toolkit."""

__version__ = "0.1.0"

from .boundary import BoundaryEstimate, StripClassification, estimate_boundary, tile
from .classifier import (
    ClassificationResult,
    ModelArtifact,
    TrainConfig,
    apply_threshold,
    load_artifact,
    predict,
    predict_batch,
    train,
)
from .dataset import (
    CropSpec,
    DatasetManifest,
    FrameRecord,
    build_manifest,
    ingest_video,
    internal_split,
    load_manifest,
    random_crop,
    save_manifest,
)
from .evaluation import ConfusionCounts, MetricsReport, confusion, metrics, reconcile_rates
from .saliency import SaliencyMap, compute_saliency, render_overlay
from .synthkit import SynthFrame, SynthParams, generate_dataset, generate_frame

__all__ = [
    "BoundaryEstimate", "StripClassification", "estimate_boundary", "tile",
    "ClassificationResult", "ModelArtifact", "TrainConfig", "apply_threshold",
    "load_artifact", "predict", "predict_batch", "train",
    "CropSpec", "DatasetManifest", "FrameRecord", "build_manifest",
    "ingest_video", "internal_split", "load_manifest", "random_crop",
    "save_manifest",
    "ConfusionCounts", "MetricsReport", "confusion", "metrics", "reconcile_rates",
    "SaliencyMap", "compute_saliency", "render_overlay",
    "SynthFrame", "SynthParams", "generate_dataset", "generate_frame",
]
