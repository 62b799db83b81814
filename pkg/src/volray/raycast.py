"""Per-pixel ray generation, sampling along rays, and the five ray functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

from .transfer import Classified, TransferFunction, classify, correct_opacity
from .volume import Aabb, ScalarVolume, gradient_central, intersect_ray_aabb, sample_trilinear

__all__ = [
    "Camera",
    "Ray",
    "RaySample",
    "RaycastConfig",
    "RayResult",
    "RAY_FUNCTIONS",
    "average_ray",
    "cast_ray",
    "composite_ray",
    "framing_camera",
    "generate_ray",
    "isosurface_ray",
    "mip_ray",
    "orbit_camera",
    "sample_along_ray",
    "shade_headlight",
    "threshold_ray",
]

RAY_FUNCTIONS = ("compositing", "mip", "average", "isosurface", "threshold")
SHADING_MODES = ("none", "headlight_lambert")

Vec3 = tuple[float, float, float]


def _norm3(v: Sequence[float]) -> float:
    return math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])


@dataclass(frozen=True)
class Camera:
    """Viewpoint: position looking at target, with a vertical field of view
    (perspective) or a world-space image height (orthographic)."""

    position: Vec3
    target: Vec3
    up: Vec3 = (0.0, 1.0, 0.0)
    projection: str = "perspective"
    vfov: float = 45.0
    ortho_height: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "target", tuple(float(c) for c in self.target))
        object.__setattr__(self, "up", tuple(float(c) for c in self.up))
        if self.projection not in ("perspective", "orthographic"):
            raise ValueError(f"unknown projection {self.projection!r}")
        view = tuple(t - p for t, p in zip(self.target, self.position))
        if _norm3(view) == 0.0:
            raise ValueError("camera position and target coincide")
        cx = view[1] * self.up[2] - view[2] * self.up[1]
        cy = view[2] * self.up[0] - view[0] * self.up[2]
        cz = view[0] * self.up[1] - view[1] * self.up[0]
        if _norm3((cx, cy, cz)) <= 1e-12 * _norm3(view) * _norm3(self.up):
            raise ValueError("up vector is parallel to the viewing direction")
        if self.projection == "perspective" and not 0.0 < self.vfov < 180.0:
            raise ValueError(f"vfov must lie in (0, 180) degrees, got {self.vfov}")
        if self.projection == "orthographic" and self.ortho_height <= 0.0:
            raise ValueError(f"ortho_height must be positive, got {self.ortho_height}")


@dataclass(frozen=True)
class Ray:
    origin: Vec3
    direction: Vec3
    t_range: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "direction", tuple(float(c) for c in self.direction))
        n = _norm3(self.direction)
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"ray direction must be unit length, |d| = {n}")
        if self.t_range[0] > self.t_range[1]:
            raise ValueError(f"t_range must be ordered, got {self.t_range}")

    def point_at(self, t: float) -> Vec3:
        return (
            self.origin[0] + t * self.direction[0],
            self.origin[1] + t * self.direction[1],
            self.origin[2] + t * self.direction[2],
        )


@dataclass(frozen=True)
class RaySample:
    t: float
    scalar: float
    classified: Classified


@dataclass(frozen=True)
class RaycastConfig:
    """Ray-function selection plus the sampling and termination knobs."""

    function: str = "compositing"
    step: float = 1.0
    reference_step: float = 1.0
    early_termination_alpha: float = 0.999
    background: Vec3 = (0.0, 0.0, 0.0)
    iso_value: float = 0.5
    threshold_value: float = 0.5
    bisection_iters: int = 8
    shading: str = "headlight_lambert"

    def __post_init__(self):
        if self.function not in RAY_FUNCTIONS:
            raise ValueError(f"unknown ray function {self.function!r}, expected one of {RAY_FUNCTIONS}")
        if self.step <= 0.0 or self.reference_step <= 0.0:
            raise ValueError("step and reference_step must be positive")
        if not 0.0 < self.early_termination_alpha <= 1.0:
            raise ValueError("early_termination_alpha must lie in (0, 1]")
        if not 0.0 <= self.iso_value <= 1.0:
            raise ValueError("iso_value must lie in [0, 1]")
        if not 0.0 <= self.threshold_value <= 1.0:
            raise ValueError("threshold_value must lie in [0, 1]")
        if self.bisection_iters < 0:
            raise ValueError("bisection_iters must be >= 0")
        if self.shading not in SHADING_MODES:
            raise ValueError(f"unknown shading mode {self.shading!r}")
        object.__setattr__(self, "background", tuple(float(c) for c in self.background))
        if any(not math.isfinite(c) or c < 0.0 for c in self.background):
            raise ValueError("background channels must be finite and >= 0")


@dataclass(frozen=True)
class RayResult:
    color: Vec3
    alpha: float
    samples_taken: int = 0
    terminated_early: bool = False
    hit_t: Optional[float] = None


class CameraFrame(NamedTuple):
    """Precomputed orthonormal basis and image-plane half extents."""

    position: Vec3
    forward: Vec3
    right: Vec3
    up: Vec3
    half_w: float
    half_h: float
    perspective: bool


def camera_frame(camera: Camera, width: int, height: int) -> CameraFrame:
    px, py, pz = camera.position
    fx = camera.target[0] - px
    fy = camera.target[1] - py
    fz = camera.target[2] - pz
    n = math.sqrt(fx * fx + fy * fy + fz * fz)
    fx, fy, fz = fx / n, fy / n, fz / n
    ux, uy, uz = camera.up
    rx = fy * uz - fz * uy
    ry = fz * ux - fx * uz
    rz = fx * uy - fy * ux
    n = math.sqrt(rx * rx + ry * ry + rz * rz)
    rx, ry, rz = rx / n, ry / n, rz / n
    # true up: right x forward, already unit
    ux = ry * fz - rz * fy
    uy = rz * fx - rx * fz
    uz = rx * fy - ry * fx
    if camera.projection == "perspective":
        half_h = math.tan(math.radians(camera.vfov) / 2.0)
    else:
        half_h = camera.ortho_height / 2.0
    half_w = half_h * (width / height)
    return CameraFrame(
        (px, py, pz), (fx, fy, fz), (rx, ry, rz), (ux, uy, uz),
        half_w, half_h, camera.projection == "perspective",
    )


def generate_ray(camera: Camera, px: int, py: int, width: int, height: int) -> Ray:
    """Ray through the center of pixel (px, py); pixel (0, 0) is top-left.

    Perspective rays originate at the camera position; orthographic rays
    share the viewing direction and originate on the image plane.
    """
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
    if not (0 <= px < width and 0 <= py < height):
        raise ValueError(f"pixel ({px}, {py}) outside {width}x{height} image")
    frame = camera_frame(camera, width, height)
    # Identical per-pixel arithmetic to _kernels.pixel_ray — keep in sync.
    u = (2.0 * (px + 0.5) / width - 1.0) * frame.half_w
    v = (1.0 - 2.0 * (py + 0.5) / height) * frame.half_h
    fwd, right, up = frame.forward, frame.right, frame.up
    if frame.perspective:
        dx = fwd[0] + u * right[0] + v * up[0]
        dy = fwd[1] + u * right[1] + v * up[1]
        dz = fwd[2] + u * right[2] + v * up[2]
        n = math.sqrt(dx * dx + dy * dy + dz * dz)
        return Ray(frame.position, (dx / n, dy / n, dz / n))
    ox = frame.position[0] + u * right[0] + v * up[0]
    oy = frame.position[1] + u * right[1] + v * up[1]
    oz = frame.position[2] + u * right[2] + v * up[2]
    return Ray((ox, oy, oz), fwd)


def orbit_camera(
    target: Sequence[float],
    distance: float,
    azimuth_deg: float,
    elevation_deg: float,
    projection: str = "perspective",
    vfov: float = 45.0,
    ortho_height: float = 100.0,
) -> Camera:
    """Camera on a sphere around ``target``; azimuth 0 looks down -z from +z.

    Angles are degrees; azimuth is normalized mod 360 so a full turn lands
    on bit-identical positions.
    """
    if distance <= 0.0:
        raise ValueError(f"orbit distance must be positive, got {distance}")
    az = math.radians(azimuth_deg % 360.0)
    el = math.radians(elevation_deg)
    ce = math.cos(el)
    offset = (ce * math.sin(az), math.sin(el), ce * math.cos(az))
    position = tuple(t + distance * o for t, o in zip(target, offset))
    return Camera(
        position=position,
        target=tuple(float(t) for t in target),
        projection=projection,
        vfov=vfov,
        ortho_height=ortho_height,
    )


def framing_camera(volume: ScalarVolume, vfov: float = 45.0, margin: float = 1.1) -> Camera:
    """Default view: down -z from +z, far enough to frame the whole volume."""
    box = volume.bounds()
    center = tuple((lo + hi) / 2.0 for lo, hi in zip(box.min, box.max))
    radius = _norm3(tuple(hi - lo for lo, hi in zip(box.min, box.max))) / 2.0
    distance = margin * radius / math.sin(math.radians(vfov) / 2.0)
    return orbit_camera(center, distance, 0.0, 0.0, vfov=vfov)


def sample_along_ray(
    volume: ScalarVolume,
    tf: TransferFunction,
    ray: Ray,
    config: RaycastConfig,
) -> list[RaySample]:
    """Classified samples at interval midpoints t = t_near + (k + 0.5) * step.

    The ray's t_range must already be clipped to the volume box.  Positions
    where the volume is absent are omitted; opacities are corrected from the
    reference step to the marching step.
    """
    t_near, t_far = ray.t_range
    if not math.isfinite(t_far):
        raise ValueError("ray.t_range must be clipped to the volume before sampling")
    step = config.step
    out: list[RaySample] = []
    k = 0
    while True:
        t = t_near + (k + 0.5) * step
        if t > t_far:
            break
        k += 1
        s = sample_trilinear(volume, ray.point_at(t))
        if s is None:
            continue
        cls = classify(tf, s)
        out.append(
            RaySample(
                t=t,
                scalar=s,
                classified=Classified(
                    cls.color, correct_opacity(cls.opacity, step, config.reference_step)
                ),
            )
        )
    return out


def composite_ray(samples: Sequence[RaySample], config: RaycastConfig) -> RayResult:
    """Front-to-back emission-absorption accumulation with associated colors.

    Each sample adds (1 - A) * alpha * color and raises A by (1 - A) * alpha;
    accumulation stops once A reaches the early-termination threshold.  The
    remaining transmittance is filled with the background color.
    """
    cr = cg = cb = 0.0
    acc = 0.0
    taken = 0
    early = False
    for smp in samples:
        r, g, b = smp.classified.color
        w = (1.0 - acc) * smp.classified.opacity
        cr += w * r
        cg += w * g
        cb += w * b
        acc += w
        taken += 1
        if acc >= config.early_termination_alpha:
            early = True
            break
    bg = config.background
    color = (
        cr + (1.0 - acc) * bg[0],
        cg + (1.0 - acc) * bg[1],
        cb + (1.0 - acc) * bg[2],
    )
    return RayResult(color=color, alpha=acc, samples_taken=taken, terminated_early=early)


def mip_ray(samples: Sequence[RaySample], config: RaycastConfig) -> RayResult:
    """Maximum-intensity projection: classified color of the largest scalar."""
    if not samples:
        return RayResult(color=config.background, alpha=0.0)
    best = samples[0]
    for smp in samples[1:]:
        if smp.scalar > best.scalar:
            best = smp
    return RayResult(
        color=best.classified.color,
        alpha=1.0,
        samples_taken=len(samples),
        hit_t=best.t,
    )


def average_ray(
    samples: Sequence[RaySample], config: RaycastConfig, tf: TransferFunction
) -> RayResult:
    """X-ray style projection: classified color of the mean scalar."""
    if not samples:
        return RayResult(color=config.background, alpha=0.0)
    total = 0.0
    for smp in samples:
        total += smp.scalar
    mean = total / len(samples)
    return RayResult(
        color=classify(tf, mean).color,
        alpha=1.0,
        samples_taken=len(samples),
    )


def threshold_ray(samples: Sequence[RaySample], config: RaycastConfig) -> RayResult:
    """First sample at or above the threshold wins; classified color, alpha 1."""
    taken = 0
    for smp in samples:
        taken += 1
        if smp.scalar >= config.threshold_value:
            return RayResult(
                color=smp.classified.color,
                alpha=1.0,
                samples_taken=taken,
                hit_t=smp.t,
            )
    return RayResult(color=config.background, alpha=0.0, samples_taken=taken)


def isosurface_ray(
    volume: ScalarVolume,
    tf: TransferFunction,
    ray: Ray,
    config: RaycastConfig,
) -> RayResult:
    """First crossing of the iso level set along the ray, bisection-refined.

    Detects a sign change of (scalar - iso_value) between consecutive
    in-volume samples, so sub-step double crossings are missed.  The surface
    color is the classified iso value, optionally headlight-shaded.
    """
    samples = sample_along_ray(volume, tf, ray, config)
    iso = config.iso_value
    taken = 0
    prev: Optional[RaySample] = None
    hit_t: Optional[float] = None
    for smp in samples:
        taken += 1
        if prev is not None and (prev.scalar - iso) * (smp.scalar - iso) <= 0.0:
            hit_t = _bisect_crossing(volume, ray, prev.t, smp.t, prev.scalar - iso, iso, config.bisection_iters)
            break
        prev = smp
    if hit_t is None:
        return RayResult(color=config.background, alpha=0.0, samples_taken=taken)
    color = classify(tf, iso).color
    if config.shading == "headlight_lambert":
        grad = gradient_central(volume, ray.point_at(hit_t))
        if grad is not None:
            color = shade_headlight(color, grad, ray.direction)
    return RayResult(color=color, alpha=1.0, samples_taken=taken, hit_t=hit_t)


def _bisect_crossing(
    volume: ScalarVolume,
    ray: Ray,
    lo: float,
    hi: float,
    g_lo: float,
    iso: float,
    iters: int,
) -> float:
    # Identical refinement to _kernels — keep in sync.
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        v = sample_trilinear(volume, ray.point_at(mid))
        if v is None:
            break
        g_mid = v - iso
        if (g_lo <= 0.0) == (g_mid <= 0.0):
            lo = mid
            g_lo = g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def shade_headlight(
    base_color: Sequence[float],
    gradient: Sequence[float],
    view_dir: Sequence[float],
) -> Vec3:
    """Lambertian shading with the light at the eye.

    The surface normal is the negated, normalized gradient; a zero gradient
    falls back to full diffuse.  k_a = 0.1, k_d = 0.9.
    """
    gx, gy, gz = gradient
    gl = math.sqrt(gx * gx + gy * gy + gz * gz)
    if gl == 0.0:
        return (base_color[0], base_color[1], base_color[2])
    # n . (-view_dir) with n = -gradient/|gradient|
    d = (gx * view_dir[0] + gy * view_dir[1] + gz * view_dir[2]) / gl
    f = 0.1 + 0.9 * max(0.0, d)
    return (base_color[0] * f, base_color[1] * f, base_color[2] * f)


def cast_ray(
    volume: ScalarVolume,
    tf: TransferFunction,
    ray: Ray,
    config: RaycastConfig,
) -> RayResult:
    """Clip the ray against the volume and run the configured ray function.

    Rays that miss the volume return the background at alpha 0.
    """
    hit = intersect_ray_aabb(ray, volume.bounds())
    if hit is None:
        return RayResult(color=config.background, alpha=0.0)
    clipped = replace(ray, t_range=hit)
    if config.function == "isosurface":
        return isosurface_ray(volume, tf, clipped, config)
    samples = sample_along_ray(volume, tf, clipped, config)
    if config.function == "compositing":
        return composite_ray(samples, config)
    if config.function == "mip":
        return mip_ray(samples, config)
    if config.function == "average":
        return average_ray(samples, config, tf)
    return threshold_ray(samples, config)
