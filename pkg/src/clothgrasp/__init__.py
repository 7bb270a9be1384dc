"""Grasp selection for crumpled cloth from depth images and region maps."""
from .errors import (
    ClothGraspError,
    DegenerateInputError,
    FormatError,
    InsufficientPointsError,
    InvalidDepthError,
    NoCandidatesError,
    NoInnerEdgeError,
    ParameterError,
    ZeroVectorError,
)
from .geometry import CameraModel, GraspPlan3D, Pose6D, SlidePlan, plan_grasp
from .graspsel import (
    DEFAULT_NEIGHBORHOOD,
    GraspCandidate,
    GraspConfig2D,
    GraspMode,
    NeighborIndex,
    ablation_no_direction_prediction,
    ablation_no_directional_uncertainty,
    build_candidates,
    directional_uncertainty,
    select_grasp,
)
from .imaging import (
    DepthImage,
    RgbImage,
    ScalarField,
    load_depth_png,
    load_rgb_png,
    save_depth_png,
    save_rgb_png,
)
from .regions import (
    RegionMask,
    RegionProbMap,
    load_probmap,
    save_probmap,
    threshold_probs,
)

__version__ = "0.1.0"

__all__ = [
    "CameraModel",
    "ClothGraspError",
    "DEFAULT_NEIGHBORHOOD",
    "DegenerateInputError",
    "DepthImage",
    "FormatError",
    "GraspCandidate",
    "GraspConfig2D",
    "GraspMode",
    "GraspPlan3D",
    "InsufficientPointsError",
    "InvalidDepthError",
    "NeighborIndex",
    "NoCandidatesError",
    "NoInnerEdgeError",
    "ParameterError",
    "Pose6D",
    "RegionMask",
    "RegionProbMap",
    "RgbImage",
    "ScalarField",
    "SlidePlan",
    "ZeroVectorError",
    "ablation_no_direction_prediction",
    "ablation_no_directional_uncertainty",
    "build_candidates",
    "directional_uncertainty",
    "load_depth_png",
    "load_probmap",
    "load_rgb_png",
    "plan_grasp",
    "save_depth_png",
    "save_probmap",
    "save_rgb_png",
    "select_grasp",
    "threshold_probs",
]
