from coad.harness.baselines import PretrainedBackbone, baseline_pretrained_features
from coad.harness.boxplot import boxplot_summary, emit_boxplot_data
from coad.harness.dataset import BoxError, DatasetIndex, ImageRecord, ManifestError, crop_row
from coad.harness.evaluate import (
    ArraySource,
    BackboneSource,
    CheckpointSource,
    ModelSource,
    SuccessReport,
    default_methods,
    evaluate,
)
from coad.harness.sets import EvaluationSet, EvaluationSetError, build_eval_sets

__all__ = [
    "ArraySource",
    "BackboneSource",
    "BoxError",
    "CheckpointSource",
    "DatasetIndex",
    "EvaluationSet",
    "EvaluationSetError",
    "ImageRecord",
    "ManifestError",
    "ModelSource",
    "PretrainedBackbone",
    "SuccessReport",
    "baseline_pretrained_features",
    "boxplot_summary",
    "build_eval_sets",
    "crop_row",
    "default_methods",
    "emit_boxplot_data",
    "evaluate",
]
