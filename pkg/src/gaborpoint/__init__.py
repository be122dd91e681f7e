"""Multiscale interest-point detection with Gabor wavelets as derivative operators."""

from gaborpoint.conv import (
    BORDER_MODES,
    OrientedParams,
    conv_cols,
    conv_rows,
    conv_separable,
    orientation_max,
    oriented_energy,
)
from gaborpoint.detectors import (
    EdgeMap,
    Keypoint,
    SecondMomentMatrix,
    detect_blobs,
    detect_corners,
    detect_edges,
    detect_edges_zero_crossing,
    edge_modulus,
    harris_response,
    hessian_det,
    second_moment,
    shi_tomasi_response,
)
from gaborpoint.evaluate import (
    DetectorConfig,
    RepeatabilityReport,
    overlap_error,
    project_keypoints,
    repeatability,
    run_comparison,
    synthetic_scene,
    warp_image,
)
from gaborpoint.gabor import (
    FAMILIES,
    GaborParams,
    Kernel1D,
    OperatorTarget,
    default_target_sigma,
    discretize,
    eval_gabor,
    fit_complex_compromise,
    fit_to_derivative,
    make_comparison_kernels,
    make_smoothing_kernel,
)
from gaborpoint.scale_space import (
    DerivativeMaps,
    ScaleLadder,
    build_maps,
    build_pyramid,
)

__all__ = [
    "BORDER_MODES",
    "FAMILIES",
    "DerivativeMaps",
    "DetectorConfig",
    "EdgeMap",
    "GaborParams",
    "Kernel1D",
    "Keypoint",
    "OperatorTarget",
    "OrientedParams",
    "RepeatabilityReport",
    "ScaleLadder",
    "SecondMomentMatrix",
    "build_maps",
    "build_pyramid",
    "conv_cols",
    "conv_rows",
    "conv_separable",
    "default_target_sigma",
    "detect_blobs",
    "detect_corners",
    "detect_edges",
    "detect_edges_zero_crossing",
    "discretize",
    "edge_modulus",
    "eval_gabor",
    "fit_complex_compromise",
    "fit_to_derivative",
    "harris_response",
    "hessian_det",
    "make_comparison_kernels",
    "make_smoothing_kernel",
    "orientation_max",
    "oriented_energy",
    "overlap_error",
    "project_keypoints",
    "repeatability",
    "run_comparison",
    "second_moment",
    "shi_tomasi_response",
    "synthetic_scene",
    "warp_image",
]

__version__ = "0.1.0"
