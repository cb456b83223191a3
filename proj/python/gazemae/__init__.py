"""Eye-contact classification over face-track windows.

Thin Python surface over the C++ core: annotation parsing, window
construction, tube masking, the video-MAE classifier, the fine-tuning
schedule and the mAP/accuracy metrics. The heavy workflows (synthesis,
training, prediction, evaluation) live in the `gazemae` command-line tool.
"""

from gazemae._core import (
    AnnotationRecord,
    BBox,
    FaceTrack,
    FrameSlot,
    ModelConfig,
    SamplingSpec,
    ScheduleSpec,
    ValidationError,
    VideoMae,
    WindowSample,
    accuracy,
    average_precision,
    build_window,
    crop_and_resize,
    dataset_stats,
    decode_randaugment_spec,
    generate_dataset,
    generate_tube_mask,
    group_tracks,
    lr_at_step,
    normalize_window,
    parse_annotations,
    parse_annotations_file,
    select_centers,
    serialize_annotations,
    tube_mask_count,
    window_manifest_line,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord",
    "BBox",
    "FaceTrack",
    "FrameSlot",
    "ModelConfig",
    "SamplingSpec",
    "ScheduleSpec",
    "ValidationError",
    "VideoMae",
    "WindowSample",
    "accuracy",
    "average_precision",
    "build_window",
    "crop_and_resize",
    "dataset_stats",
    "decode_randaugment_spec",
    "generate_dataset",
    "generate_tube_mask",
    "group_tracks",
    "lr_at_step",
    "normalize_window",
    "parse_annotations",
    "parse_annotations_file",
    "select_centers",
    "serialize_annotations",
    "tube_mask_count",
    "window_manifest_line",
    "__version__",
]
