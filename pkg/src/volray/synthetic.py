"""Synthetic volumes: procedural stand-ins for scanned data in demos and tests."""

from __future__ import annotations

import numpy as np

from .volume import ScalarVolume

__all__ = [
    "constant_volume",
    "ramp_volume",
    "random_volume",
    "smooth_volume",
    "sphere_volume",
]


def _index_grids(dims):
    nx, ny, nz = dims
    return np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")


def constant_volume(dims=(8, 8, 8), value=0.5, spacing=(1.0, 1.0, 1.0)) -> ScalarVolume:
    nx, ny, nz = dims
    return ScalarVolume.from_grid(np.full((nx, ny, nz), float(value)), spacing=spacing)


def ramp_volume(dims=(8, 8, 8), axis=0, spacing=(1.0, 1.0, 1.0)) -> ScalarVolume:
    """Linear 0 -> 1 ramp along one axis: f(i) = i / (n - 1)."""
    idx = _index_grids(dims)[axis]
    return ScalarVolume.from_grid(idx / (dims[axis] - 1), spacing=spacing)


def sphere_volume(
    dims=(64, 64, 64),
    radius=None,
    spacing=(1.0, 1.0, 1.0),
    center=None,
) -> ScalarVolume:
    """Radial cone field f(p) = clamp(1 - |p - c| / R, 0, 1).

    The iso level set at value v is the sphere of radius (1 - v) * R, which
    makes surface-accuracy checks and shading demos easy to reason about.
    """
    xi, yi, zi = _index_grids(dims)
    sx, sy, sz = spacing
    x = xi * sx
    y = yi * sy
    z = zi * sz
    if center is None:
        center = ((dims[0] - 1) * sx / 2.0, (dims[1] - 1) * sy / 2.0, (dims[2] - 1) * sz / 2.0)
    if radius is None:
        radius = 0.45 * min((dims[0] - 1) * sx, (dims[1] - 1) * sy, (dims[2] - 1) * sz)
    r = np.sqrt((x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2)
    return ScalarVolume.from_grid(np.clip(1.0 - r / radius, 0.0, 1.0), spacing=spacing)


def smooth_volume(dims=(64, 64, 64), spacing=(1.0, 1.0, 1.0)) -> ScalarVolume:
    """Band-limited trig blob: smooth everywhere, good for convergence studies."""
    xi, yi, zi = _index_grids(dims)
    u = xi / (dims[0] - 1)
    v = yi / (dims[1] - 1)
    w = zi / (dims[2] - 1)
    f = (
        0.5
        + 0.25 * np.sin(2.0 * np.pi * u) * np.sin(2.0 * np.pi * v)
        + 0.25 * np.cos(2.0 * np.pi * w)
    )
    return ScalarVolume.from_grid(0.5 + 0.5 * (f - 0.5), spacing=spacing)


def random_volume(dims=(16, 16, 16), seed=0, spacing=(1.0, 1.0, 1.0)) -> ScalarVolume:
    rng = np.random.default_rng(seed)
    return ScalarVolume.from_grid(rng.random(dims), spacing=spacing)
