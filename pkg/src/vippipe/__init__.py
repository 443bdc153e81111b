"""vippipe: a config-driven video experiment pipeline.

Dataset manifests, deterministic clip extraction, clip-consistent spatial
transforms with annotation propagation, detection/saliency metrics, and a
desk-scale training engine with pseudo-batch gradient accumulation.
"""

__version__ = "0.1.0"

from .clip_sampler import ClipConfig, ClipPlan, plan_clips
from .config import RunConfig, load_config
from .engine import PretrainedSpec, accumulate_step, evaluate, schedule_lr, train
from .frame_io import Clip, Frame, decode_image, encode_image, read_clip
from .manifest import (
    Box,
    DatasetManifest,
    FrameAnnotation,
    Keypoint,
    ValidationReport,
    VideoRecord,
    load_manifest,
    save_manifest,
    validate_manifest,
)
from .metrics import Detection, accuracy, average_precision, cc, iou, mean_ap, nss
from .synthetic import SynthSpec, generate_synthetic_dataset
from .transforms import (
    AnnotationSet,
    SampledParams,
    TransformConfig,
    apply_clip,
    apply_per_frame,
    sample_params,
    transform_box,
    transform_point,
)

__all__ = [
    "__version__",
    "AnnotationSet",
    "Box",
    "Clip",
    "ClipConfig",
    "ClipPlan",
    "DatasetManifest",
    "Detection",
    "Frame",
    "FrameAnnotation",
    "Keypoint",
    "PretrainedSpec",
    "RunConfig",
    "SampledParams",
    "SynthSpec",
    "TransformConfig",
    "ValidationReport",
    "VideoRecord",
    "accumulate_step",
    "accuracy",
    "apply_clip",
    "apply_per_frame",
    "average_precision",
    "cc",
    "decode_image",
    "encode_image",
    "evaluate",
    "generate_synthetic_dataset",
    "iou",
    "load_config",
    "load_manifest",
    "mean_ap",
    "nss",
    "plan_clips",
    "read_clip",
    "sample_params",
    "save_manifest",
    "schedule_lr",
    "train",
    "transform_box",
    "transform_point",
    "validate_manifest",
]
