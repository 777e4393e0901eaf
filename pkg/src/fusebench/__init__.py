"""Exposure fusion methods with a quality and resource benchmarking harness.

The library fuses a bracket of differently exposed frames (one underexposed
anchor plus several EV>=0 frames) into a single displayable image, and can
sweep method / weight / frame-count / stacking combinations over a dataset,
recording quality metrics against ground truth together with runtime and
peak allocation.
"""

from .bench import (
    BenchRecord,
    GroupedRow,
    SweepSpace,
    enumerate_configs,
    group_report,
    measure_fuse,
    read_records_csv,
    run_sweep,
)
from .errors import (
    ConfigurationError,
    FuseBenchError,
    ImageIOError,
    InvalidInputError,
    MeasurementError,
    UnsupportedFormatError,
)
from .fusion import (
    FusionConfig,
    FusionMethod,
    StackingMethod,
    fuse,
    fuse_fast_yuv,
    fuse_mertens,
    fuse_ssf_rgb,
    fuse_ssf_yuv,
    stack_frames,
)
from .imgcore import (
    ColorSpace,
    Frame,
    FrameSequence,
    Image,
    SceneSpec,
    load_ground_truth,
    load_image,
    load_scene,
    luma,
    random_scene,
    rgb_to_yuv,
    save_image,
    synth_bracket,
    yuv_to_rgb,
)
from .metrics import MetricReport, ergas, evaluate, ms_ssim, psnr, ssim
from .weights import (
    WeightConfig,
    WeightKind,
    WeightMaps,
    combine_weights,
    compute_weight,
    normalize_weights,
)

__version__ = "0.1.0"

__all__ = [
    "BenchRecord", "GroupedRow", "SweepSpace", "enumerate_configs",
    "group_report", "measure_fuse", "read_records_csv", "run_sweep",
    "ConfigurationError", "FuseBenchError", "ImageIOError",
    "InvalidInputError", "MeasurementError", "UnsupportedFormatError",
    "FusionConfig", "FusionMethod", "StackingMethod", "fuse",
    "fuse_fast_yuv", "fuse_mertens", "fuse_ssf_rgb", "fuse_ssf_yuv",
    "stack_frames",
    "ColorSpace", "Frame", "FrameSequence", "Image", "SceneSpec",
    "load_ground_truth", "load_image", "load_scene", "luma", "random_scene",
    "rgb_to_yuv", "save_image", "synth_bracket", "yuv_to_rgb",
    "MetricReport", "ergas", "evaluate", "ms_ssim", "psnr", "ssim",
    "WeightConfig", "WeightKind", "WeightMaps", "combine_weights",
    "compute_weight", "normalize_weights",
    "__version__",
]
