"""Volumetric scalar field on a Cartesian grid, plus its pure spatial queries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

if TYPE_CHECKING:
    from .raycast import Ray

__all__ = [
    "Aabb",
    "Histogram",
    "ScalarVolume",
    "compute_histogram",
    "gradient_central",
    "intersect_ray_aabb",
    "normalize_scalars",
    "sample_trilinear",
]


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned box [min, max] per axis, millimeters."""

    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        if any(lo > hi for lo, hi in zip(self.min, self.max)):
            raise ValueError(f"degenerate box: min {self.min} exceeds max {self.max}")

    def contains(self, p: Sequence[float]) -> bool:
        return all(lo <= c <= hi for c, lo, hi in zip(p, self.min, self.max))


@dataclass(frozen=True)
class Histogram:
    bin_count: int
    counts: np.ndarray
    range: tuple[float, float] = (0.0, 1.0)


@dataclass(frozen=True)
class ScalarVolume:
    """Normalized scalars on a vertex-centered Cartesian grid.

    ``samples`` is flat and x-fastest (index = i + nx*(j + ny*k)), every value
    in [0, 1].  ``spacing`` is millimeters per voxel step, so the world-space
    bounding box is [origin, origin + (dims - 1) * spacing] per axis.
    ``source_range`` records the raw-value window that was mapped onto [0, 1].
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    samples: np.ndarray
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    source_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        origin = tuple(float(o) for o in self.origin)
        if len(dims) != 3 or any(n < 2 for n in dims):
            raise ValueError(f"dims must be three counts >= 2, got {self.dims}")
        if len(spacing) != 3 or any(s <= 0.0 for s in spacing):
            raise ValueError(f"spacing must be three positive lengths, got {self.spacing}")
        samples = np.ascontiguousarray(self.samples, dtype=np.float64).ravel()
        if samples.size != dims[0] * dims[1] * dims[2]:
            raise ValueError(
                f"expected {dims[0] * dims[1] * dims[2]} samples for dims {dims}, "
                f"got {samples.size}"
            )
        if samples.size and (samples.min() < 0.0 or samples.max() > 1.0):
            raise ValueError("samples must lie in [0, 1]")
        samples.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "source_range", tuple(float(v) for v in self.source_range))

    @classmethod
    def from_grid(
        cls,
        values: np.ndarray,
        spacing: Sequence[float] = (1.0, 1.0, 1.0),
        origin: Sequence[float] = (0.0, 0.0, 0.0),
        source_range: tuple[float, float] = (0.0, 1.0),
    ) -> "ScalarVolume":
        """Build a volume from an (nx, ny, nz)-indexed array of values in [0, 1]."""
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 3:
            raise ValueError(f"expected a 3-D array, got shape {values.shape}")
        return cls(
            dims=values.shape,
            spacing=tuple(spacing),
            samples=values.ravel(order="F"),
            origin=tuple(origin),
            source_range=source_range,
        )

    @property
    def grid(self) -> np.ndarray:
        """(nx, ny, nz)-indexed read-only view of the samples."""
        nx, ny, nz = self.dims
        return self.samples.reshape((nx, ny, nz), order="F")

    def value_at(self, i: int, j: int, k: int) -> float:
        nx, ny, _ = self.dims
        return float(self.samples[i + nx * (j + ny * k)])

    def bounds(self) -> Aabb:
        lo = self.origin
        hi = tuple(o + (n - 1) * s for o, n, s in zip(self.origin, self.dims, self.spacing))
        return Aabb(lo, hi)


def sample_trilinear(volume: ScalarVolume, p: Sequence[float]) -> Optional[float]:
    """Trilinear blend of the 8 voxels enclosing world point ``p`` (mm).

    Returns None outside the bounding box.  Grid points reproduce the stored
    value exactly; the result is bounded by the enclosing corner values.
    """
    nx, ny, nz = volume.dims
    ox, oy, oz = volume.origin
    dx, dy, dz = volume.spacing
    # Identical arithmetic to _kernels.trilinear — keep in sync.
    fx = (p[0] - ox) / dx
    fy = (p[1] - oy) / dy
    fz = (p[2] - oz) / dz
    if not (0.0 <= fx <= nx - 1 and 0.0 <= fy <= ny - 1 and 0.0 <= fz <= nz - 1):
        return None
    i = int(fx)
    j = int(fy)
    k = int(fz)
    tx = fx - i
    ty = fy - j
    tz = fz - k
    i1 = min(i + 1, nx - 1)
    j1 = min(j + 1, ny - 1)
    k1 = min(k + 1, nz - 1)
    v = volume.samples
    row00 = nx * (j + ny * k)
    row10 = nx * (j1 + ny * k)
    row01 = nx * (j + ny * k1)
    row11 = nx * (j1 + ny * k1)
    c00 = v[i + row00] + tx * (v[i1 + row00] - v[i + row00])
    c10 = v[i + row10] + tx * (v[i1 + row10] - v[i + row10])
    c01 = v[i + row01] + tx * (v[i1 + row01] - v[i + row01])
    c11 = v[i + row11] + tx * (v[i1 + row11] - v[i + row11])
    c0 = c00 + ty * (c10 - c00)
    c1 = c01 + ty * (c11 - c01)
    return float(c0 + tz * (c1 - c0))


def gradient_central(
    volume: ScalarVolume, p: Sequence[float]
) -> Optional[tuple[float, float, float]]:
    """Finite-difference gradient of the trilinear field at ``p``, units 1/mm.

    Central differences at +/- one voxel spacing per axis; one-sided within
    one voxel of a face.  Returns None outside the bounding box.
    """
    box = volume.bounds()
    if not box.contains(p):
        return None
    f0 = sample_trilinear(volume, p)
    g = [0.0, 0.0, 0.0]
    pt = [float(c) for c in p]
    for a in range(3):
        h = volume.spacing[a]
        lo_c, hi_c = pt[a] - h, pt[a] + h
        lo_in = lo_c >= box.min[a]
        hi_in = hi_c <= box.max[a]
        if lo_in and hi_in:
            g[a] = (_axis_sample(volume, pt, a, hi_c) - _axis_sample(volume, pt, a, lo_c)) / (2.0 * h)
        elif hi_in:
            g[a] = (_axis_sample(volume, pt, a, hi_c) - f0) / h
        elif lo_in:
            g[a] = (f0 - _axis_sample(volume, pt, a, lo_c)) / h
        else:
            # volume thinner than two voxels along this axis
            extent = box.max[a] - box.min[a]
            g[a] = (
                _axis_sample(volume, pt, a, box.max[a]) - _axis_sample(volume, pt, a, box.min[a])
            ) / extent
    return (g[0], g[1], g[2])


def _axis_sample(volume: ScalarVolume, p: list, axis: int, coord: float) -> float:
    q = list(p)
    q[axis] = coord
    v = sample_trilinear(volume, q)
    assert v is not None  # stencil points are clamped inside the box
    return v


def intersect_ray_aabb(ray: "Ray", box: Aabb) -> Optional[tuple[float, float]]:
    """Slab intersection of a ray with an axis-aligned box.

    Returns (t_near, t_far) with t_near clamped at 0 when the origin is
    inside, or None on a miss.
    """
    tn = -math.inf
    tf = math.inf
    for o, d, lo, hi in zip(ray.origin, ray.direction, box.min, box.max):
        if d == 0.0:
            if o < lo or o > hi:
                return None
            continue
        t0 = (lo - o) / d
        t1 = (hi - o) / d
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > tn:
            tn = t0
        if t1 < tf:
            tf = t1
    if tn > tf or tf < 0.0:
        return None
    return (max(tn, 0.0), tf)


def compute_histogram(volume: ScalarVolume, bin_count: int) -> Histogram:
    """Voxel-count histogram over [0, 1]; value 1.0 lands in the last bin."""
    bin_count = int(bin_count)
    if bin_count < 2:
        raise ValueError(f"bin_count must be >= 2, got {bin_count}")
    idx = np.floor(volume.samples * bin_count).astype(np.int64)
    idx[idx == bin_count] = bin_count - 1
    counts = np.bincount(idx, minlength=bin_count)
    counts.setflags(write=False)
    return Histogram(bin_count=bin_count, counts=counts)


def normalize_scalars(
    raw: Sequence[float] | np.ndarray,
    window: Optional[tuple[float, float]] = None,
) -> tuple[np.ndarray, tuple[float, float]]:
    """Map raw element values onto [0, 1].

    With ``window=(lo, hi)``: clamp then map linearly.  Without: map the
    observed (min, max); a constant input maps to all zeros with
    source_range (min, min + 1).
    """
    arr = np.asarray(raw, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("cannot normalize an empty sequence")
    if window is not None:
        lo, hi = float(window[0]), float(window[1])
        if not lo < hi:
            raise ValueError(f"window must satisfy lo < hi, got ({lo}, {hi})")
        out = (np.clip(arr, lo, hi) - lo) / (hi - lo)
        return out, (lo, hi)
    lo = float(arr.min())
    hi = float(arr.max())
    if lo == hi:
        return np.zeros_like(arr), (lo, lo + 1.0)
    return (arr - lo) / (hi - lo), (lo, hi)
