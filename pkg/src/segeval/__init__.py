"""Instance-segmentation evaluation and dataset tooling for polygon-annotated imagery."""

from segeval.augmentation import (
    AugmentConfig,
    Augmenter,
    RasterImage,
    Sample,
    augment,
    read_image,
    write_image,
)
from segeval.dataset import (
    DEFAULT_REGISTRY,
    DatasetBundle,
    DatasetError,
    Detection,
    GroundTruthAnnotation,
    ImageRecord,
    class_histogram,
    parse_detections,
    parse_manifest,
    parse_via,
    serialize_manifest,
    serialize_via,
    split,
    validate,
)
from segeval.evaluation import (
    EvaluationReport,
    MatchConfig,
    evaluate,
    fp_fn_counts,
    image_level_accuracy,
    threshold_sweep,
)
from segeval.geometry import (
    AffineMap,
    BoundingBox,
    Point2,
    Polygon,
    RasterMask,
    apply_affine,
    box_iou,
    clip_polygon_to_frame,
    mask_iou,
    polygon_area,
    polygon_bbox,
    rasterize,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "AugmentConfig",
    "Augmenter",
    "BoundingBox",
    "DEFAULT_REGISTRY",
    "DatasetBundle",
    "DatasetError",
    "Detection",
    "EvaluationReport",
    "GroundTruthAnnotation",
    "ImageRecord",
    "MatchConfig",
    "Point2",
    "Polygon",
    "RasterImage",
    "RasterMask",
    "Sample",
    "apply_affine",
    "augment",
    "box_iou",
    "class_histogram",
    "clip_polygon_to_frame",
    "evaluate",
    "fp_fn_counts",
    "image_level_accuracy",
    "mask_iou",
    "parse_detections",
    "parse_manifest",
    "parse_via",
    "polygon_area",
    "polygon_bbox",
    "rasterize",
    "read_image",
    "serialize_manifest",
    "serialize_via",
    "split",
    "threshold_sweep",
    "validate",
    "write_image",
    "__version__",
]
