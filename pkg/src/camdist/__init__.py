"""Brown-Conrady camera distortion toolkit.

Forward and inverse lens distortion, budgeted random sampling of distortion
parameters, raster image warping, synthetic dataset generation with ground
truth annotations, and pixel-wise error-map evaluation of predicted camera
parameters.
"""

from .camera import (
    DistortionCoefficients,
    ImageGeometry,
    Intrinsics,
    distort,
    fx_to_hfov,
    hfov_to_fx,
    intrinsics_from_hfov,
    normalized_to_pixel,
    pixel_to_normalized,
    undistort,
)
from .dataset import (
    AnnotationRecord,
    DatasetManifest,
    decode_targets,
    encode_targets,
    generate_dataset,
    split_dataset,
)
from .errormap import (
    CameraParameterVector,
    ErrorMap,
    LineProfile,
    PredictionRecord,
    extract_line_profiles,
    format_error,
    mean_error_map,
    pixel_error_map,
    read_predictions,
    summarize,
    write_predictions,
)
from .errors import (
    BudgetExhausted,
    CamdistError,
    ConfigError,
    NonConvergence,
    PredictionsFormatError,
)
from .raster import RasterImage, read_image, write_image
from .sampler import (
    BoundInterval,
    SampledCamera,
    SamplerConfig,
    bound_coefficient,
    compute_focal_scale,
    load_config,
    parse_config,
    poi_displacement,
    rng_for_index,
    sample_camera,
)
from .warp import (
    apply_distortion_to_image,
    count_black_filled,
    generate_grid_image,
    undistort_image,
)

__version__ = "0.1.0"
