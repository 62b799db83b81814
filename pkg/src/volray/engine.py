"""Frame-level rendering: parallel tiles, sRGB encoding, benchmark harness."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO, Union

import numpy as np
from numba import config as _numba_config
from numba import set_num_threads

from . import _kernels
from .raycast import Camera, RaycastConfig, camera_frame
from .transfer import TransferFunction
from .volume import ScalarVolume

__all__ = [
    "BenchRow",
    "BenchmarkReport",
    "FrameImage",
    "RenderStats",
    "Scene",
    "TILE",
    "render_frame",
    "render_frame_linear",
    "run_benchmark",
    "srgb_encode",
]

TILE = _kernels.TILE

_SCALAR_MODES = {"mip": 0, "average": 1, "threshold": 2}


@dataclass(frozen=True)
class Scene:
    volume: ScalarVolume
    tf: TransferFunction
    camera: Camera
    config: RaycastConfig


@dataclass(frozen=True)
class FrameImage:
    """8-bit sRGB pixels, row-major (r, g, b, a) quadruples, top-left origin."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.uint8)
        if px.shape != (self.height, self.width, 4):
            raise ValueError(
                f"pixel buffer shape {px.shape} does not match "
                f"{self.width}x{self.height} RGBA"
            )
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()


@dataclass(frozen=True)
class RenderStats:
    frame_ms: float
    rays: int
    samples: int
    early_terminated: int
    tiles: int
    workers: int

    def as_dict(self) -> dict:
        return {
            "frame_ms": self.frame_ms,
            "rays": self.rays,
            "samples": self.samples,
            "early_terminated": self.early_terminated,
            "tiles": self.tiles,
            "workers": self.workers,
        }


def srgb_encode(linear_rgba: np.ndarray) -> np.ndarray:
    """Linear-light RGBA floats -> 8-bit sRGB (alpha stays linear).

    channel = floor(255 * gamma(clamp(x, 0, 1)) + 0.5), i.e. round-half-up,
    so encoded frames are reproducible bit for bit.
    """
    linear = np.asarray(linear_rgba, dtype=np.float64)
    rgb = np.clip(linear[..., :3], 0.0, 1.0)
    gamma = np.where(rgb <= 0.0031308, rgb * 12.92, 1.055 * rgb ** (1.0 / 2.4) - 0.055)
    alpha = np.clip(linear[..., 3:4], 0.0, 1.0)
    stacked = np.concatenate([gamma, alpha], axis=-1)
    return np.floor(stacked * 255.0 + 0.5).astype(np.uint8)


def _effective_threads(workers: int) -> int:
    return min(int(workers), _numba_config.NUMBA_NUM_THREADS)


def render_frame_linear(
    scene: Scene, width: int, height: int, workers: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Render to a linear-light float frame.

    Returns (rgba float64 (h, w, 4), per-ray sample counts, per-ray
    early-termination flags, tile count).  Pixel values are independent of
    ``workers``: the image is split into disjoint 32x32 tiles and each pixel
    is traced by the same arithmetic regardless of scheduling.
    """
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be >= 1, got {width}x{height}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    vol = scene.volume
    cfg = scene.config
    frame = camera_frame(scene.camera, width, height)
    tf_s, tf_r, tf_g, tf_b, tf_a = scene.tf.as_arrays()
    out = np.zeros((height, width, 4), dtype=np.float64)
    nsamp = np.zeros((height, width), dtype=np.int64)
    early = np.zeros((height, width), dtype=np.uint8)
    nx, ny, nz = vol.dims
    ox, oy, oz = vol.origin
    dx, dy, dz = vol.spacing
    common = (
        vol.samples, nx, ny, nz, ox, oy, oz, dx, dy, dz,
        frame.position[0], frame.position[1], frame.position[2],
        frame.forward[0], frame.forward[1], frame.forward[2],
        frame.right[0], frame.right[1], frame.right[2],
        frame.up[0], frame.up[1], frame.up[2],
        frame.half_w, frame.half_h, frame.perspective, width, height,
        tf_s, tf_r, tf_g, tf_b, tf_a,
    )
    bg = cfg.background
    set_num_threads(_effective_threads(workers))
    if cfg.function == "compositing":
        _kernels.render_composite(
            *common, cfg.step, cfg.reference_step, cfg.early_termination_alpha,
            bg[0], bg[1], bg[2], out, nsamp, early)
    elif cfg.function in _SCALAR_MODES:
        _kernels.render_scalar_mode(
            *common, cfg.step, _SCALAR_MODES[cfg.function], cfg.threshold_value,
            bg[0], bg[1], bg[2], out, nsamp, early)
    else:
        _kernels.render_isosurface(
            *common, cfg.step, cfg.iso_value, cfg.bisection_iters,
            cfg.shading == "headlight_lambert", bg[0], bg[1], bg[2],
            out, nsamp, early)
    tiles = ((width + TILE - 1) // TILE) * ((height + TILE - 1) // TILE)
    return out, nsamp, early, tiles


def render_frame(
    scene: Scene, width: int, height: int, workers: int = 1
) -> tuple[FrameImage, RenderStats]:
    """Render one frame to 8-bit sRGB with per-frame statistics.

    Output bytes are identical for any ``workers`` value.
    """
    t0 = time.perf_counter()
    linear, nsamp, early, tiles = render_frame_linear(scene, width, height, workers)
    pixels = srgb_encode(linear)
    frame_ms = (time.perf_counter() - t0) * 1000.0
    image = FrameImage(width=width, height=height, pixels=pixels)
    stats = RenderStats(
        frame_ms=frame_ms,
        rays=width * height,
        samples=int(nsamp.sum()),
        early_terminated=int(early.sum()),
        tiles=tiles,
        workers=int(workers),
    )
    return image, stats


@dataclass(frozen=True)
class BenchRow:
    workers: int
    min_ms: float
    median_ms: float
    rays_per_s: float
    samples_per_s: float
    speedup: float


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[BenchRow, ...]

    CSV_HEADER = "workers,min_ms,median_ms,rays_per_s,samples_per_s,speedup"

    def to_csv(self) -> str:
        lines = [self.CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.workers},{r.min_ms:.3f},{r.median_ms:.3f},"
                f"{r.rays_per_s:.1f},{r.samples_per_s:.1f},{r.speedup:.3f}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, target: Union[str, Path, TextIO]) -> None:
        if hasattr(target, "write"):
            target.write(self.to_csv())
        else:
            Path(target).write_text(self.to_csv())


def run_benchmark(
    scene: Scene,
    width: int,
    height: int,
    workers_list: Sequence[int],
    repetitions: int,
) -> BenchmarkReport:
    """Time repeated renders per worker count.

    One untimed warmup frame absorbs jit compilation and cache effects.
    Speedup is relative to the workers=1 row when present, else to the first
    row.  Ray/sample counters are deterministic; only timings vary.
    """
    if repetitions < 1:
        raise ValueError(f"repetitions must be >= 1, got {repetitions}")
    workers_list = [int(w) for w in workers_list]
    if not workers_list or any(w < 1 for w in workers_list):
        raise ValueError(f"workers list must contain counts >= 1, got {workers_list}")
    render_frame(scene, width, height, workers_list[0])
    raw = []
    for w in workers_list:
        times = []
        stats = None
        for _ in range(repetitions):
            _, stats = render_frame(scene, width, height, w)
            times.append(stats.frame_ms)
        med = statistics.median(times)
        raw.append((w, min(times), med, stats.rays / (med / 1000.0), stats.samples / (med / 1000.0)))
    baseline = next((r for r in raw if r[0] == 1), raw[0])
    rows = tuple(
        BenchRow(
            workers=w,
            min_ms=mn,
            median_ms=med,
            rays_per_s=rps,
            samples_per_s=sps,
            speedup=baseline[2] / med,
        )
        for (w, mn, med, rps, sps) in raw
    )
    return BenchmarkReport(rows=rows)
