"""Enhancement of curved oriented textures with flow-following Gabor
filtering: fused orientation-field estimation, curved-region ridge
frequency estimation, and curved Gabor filters, plus synthetic
ground-truth patterns for verification."""

from .backend import backend_name, set_backend
from .frequency import (
    FREQ_MAX,
    FREQ_MIN,
    RejectReason,
    RfEstimate,
    RidgeFrequencyMap,
    UnprocessableImageError,
    detect_extrema,
    estimate_rf,
    gray_profile,
    inter_extrema_distances,
    rf_image,
    rf_image_xsignature,
)
from .gabor import (
    GABOR_PRESETS,
    GaborParams,
    InterpolatedPatch,
    WindowShape,
    enhance_curved,
    enhance_straight,
    filter_pixel,
    gabor_kernel,
    sample_patch,
)
from .image import (
    GrayImage,
    InterpolationMethod,
    Profile1D,
    interpolate_gray,
    normalize_global,
    normalize_local,
    smooth_profile,
    to_uint8,
)
from .orientation import (
    FusionConfig,
    OrientationField,
    angular_difference,
    estimate_gradient_of,
    fuse_orientation_fields,
    orientation_at,
    reconstruct_and_extrapolate,
)
from .pipeline import (
    EnhancementResult,
    PipelineConfig,
    StageError,
    batch,
    enhance,
)
from .regions import (
    CurvatureEstimate,
    CurvedRegion,
    RegionConfig,
    build_curved_region,
    curvature_map,
    estimate_curvature,
)
from .synthetic import (
    PatternDescriptor,
    PatternKind,
    SyntheticPattern,
    evaluate,
    gen_concentric,
    gen_parallel,
)

__version__ = "0.1.0"
