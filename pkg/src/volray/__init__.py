"""volray: a software raycasting engine for volumetric scalar data.

Stacks of 2-D scalar slices (or raw volume files) become interactively
explorable 3-D renderings through per-pixel raycasting with emission-
absorption compositing, maximum/average intensity projection, isosurface
extraction and thresholding, classified by piecewise-linear transfer
functions.
"""

from .engine import (
    BenchmarkReport,
    BenchRow,
    FrameImage,
    RenderStats,
    Scene,
    render_frame,
    render_frame_linear,
    run_benchmark,
    srgb_encode,
)
from .raycast import (
    Camera,
    Ray,
    RaycastConfig,
    RayResult,
    RaySample,
    average_ray,
    cast_ray,
    composite_ray,
    framing_camera,
    generate_ray,
    isosurface_ray,
    mip_ray,
    orbit_camera,
    sample_along_ray,
    shade_headlight,
    threshold_ray,
)
from .transfer import Classified, ControlPoint, TransferFunction, classify, correct_opacity
from .volume import (
    Aabb,
    Histogram,
    ScalarVolume,
    compute_histogram,
    gradient_central,
    intersect_ray_aabb,
    normalize_scalars,
    sample_trilinear,
)

__version__ = "0.1.0"

__all__ = [
    "Aabb",
    "BenchRow",
    "BenchmarkReport",
    "Camera",
    "Classified",
    "ControlPoint",
    "FrameImage",
    "Histogram",
    "Ray",
    "RayResult",
    "RaySample",
    "RaycastConfig",
    "RenderStats",
    "ScalarVolume",
    "Scene",
    "TransferFunction",
    "average_ray",
    "cast_ray",
    "classify",
    "composite_ray",
    "compute_histogram",
    "correct_opacity",
    "framing_camera",
    "generate_ray",
    "gradient_central",
    "intersect_ray_aabb",
    "isosurface_ray",
    "mip_ray",
    "normalize_scalars",
    "orbit_camera",
    "render_frame",
    "render_frame_linear",
    "run_benchmark",
    "sample_along_ray",
    "sample_trilinear",
    "shade_headlight",
    "srgb_encode",
    "threshold_ray",
]
