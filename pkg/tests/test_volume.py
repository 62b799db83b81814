from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volray import (
    Aabb,
    Ray,
    ScalarVolume,
    compute_histogram,
    gradient_central,
    intersect_ray_aabb,
    normalize_scalars,
    sample_trilinear,
)
from volray.synthetic import constant_volume, ramp_volume

from conftest import random_volume_grid


def trilinear_oracle(volume: ScalarVolume, p) -> float:
    """Brute-force 8-corner weighted sum, independent of the production path."""
    nx, ny, nz = volume.dims
    f = [(p[a] - volume.origin[a]) / volume.spacing[a] for a in range(3)]
    cell = [min(int(math.floor(f[a])), volume.dims[a] - 2) for a in range(3)]
    w = [f[a] - cell[a] for a in range(3)]
    total = 0.0
    for di in (0, 1):
        for dj in (0, 1):
            for dk in (0, 1):
                weight = (
                    (w[0] if di else 1 - w[0])
                    * (w[1] if dj else 1 - w[1])
                    * (w[2] if dk else 1 - w[2])
                )
                total += weight * volume.value_at(cell[0] + di, cell[1] + dj, cell[2] + dk)
    return total


class TestScalarVolume:
    def test_from_grid_layout_is_x_fastest(self):
        grid = np.arange(2 * 3 * 4, dtype=float).reshape(2, 3, 4) / 23.0
        vol = ScalarVolume.from_grid(grid)
        assert vol.dims == (2, 3, 4)
        # index = i + nx*(j + ny*k)
        assert vol.samples[1 + 2 * (2 + 3 * 3)] == grid[1, 2, 3]
        assert np.array_equal(vol.grid, grid)
        assert vol.value_at(1, 0, 2) == grid[1, 0, 2]

    def test_bounds(self):
        vol = constant_volume(dims=(3, 4, 5), spacing=(1.0, 2.0, 0.5))
        box = vol.bounds()
        assert box.min == (0.0, 0.0, 0.0)
        assert box.max == (2.0, 6.0, 2.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(dims=(1, 4, 4), spacing=(1, 1, 1), samples=np.zeros(16)),
            dict(dims=(4, 4, 4), spacing=(0, 1, 1), samples=np.zeros(64)),
            dict(dims=(4, 4, 4), spacing=(1, 1, 1), samples=np.zeros(63)),
            dict(dims=(2, 2, 2), spacing=(1, 1, 1), samples=np.full(8, 1.5)),
            dict(dims=(2, 2, 2), spacing=(1, 1, 1), samples=np.full(8, -0.1)),
        ],
    )
    def test_invalid_construction(self, kwargs):
        with pytest.raises(ValueError):
            ScalarVolume(**kwargs)

    def test_samples_are_read_only(self):
        vol = constant_volume()
        with pytest.raises(ValueError):
            vol.samples[0] = 1.0


class TestSampleTrilinear:
    def test_grid_points_reproduce_stored_values(self, rng):
        vol = ScalarVolume.from_grid(rng.random((3, 4, 5)), spacing=(0.7, 1.3, 2.0))
        for i in range(3):
            for j in range(4):
                for k in range(5):
                    p = (0.7 * i, 1.3 * j, 2.0 * k)
                    assert sample_trilinear(vol, p) == vol.value_at(i, j, k)

    def test_edge_midpoint_is_mean(self):
        grid = np.zeros((2, 2, 2))
        grid[1, 0, 0] = 1.0
        vol = ScalarVolume.from_grid(grid)
        assert sample_trilinear(vol, (0.5, 0.0, 0.0)) == 0.5

    def test_matches_corner_weight_oracle(self, rng):
        for _ in range(50):
            vol = random_volume_grid(rng)
            p = rng.random(3) * 3.0
            got = sample_trilinear(vol, p)
            assert got is not None
            assert abs(got - trilinear_oracle(vol, p)) <= 1e-12

    def test_bounded_by_enclosing_corners(self, rng):
        for _ in range(200):
            vol = random_volume_grid(rng)
            p = rng.random(3) * 3.0
            got = sample_trilinear(vol, p)
            cell = [min(int(c), 2) for c in p]
            corners = [
                vol.value_at(cell[0] + di, cell[1] + dj, cell[2] + dk)
                for di in (0, 1)
                for dj in (0, 1)
                for dk in (0, 1)
            ]
            assert min(corners) - 1e-12 <= got <= max(corners) + 1e-12

    def test_outside_returns_none(self):
        vol = constant_volume(dims=(4, 4, 4))
        for p in [(-0.001, 1, 1), (3.001, 1, 1), (1, -5, 1), (1, 1, 99)]:
            assert sample_trilinear(vol, p) is None

    def test_upper_boundary_face_is_inside(self):
        vol = ramp_volume(dims=(4, 4, 4))
        assert sample_trilinear(vol, (3.0, 3.0, 3.0)) == 1.0


class TestGradientCentral:
    def test_constant_volume_has_zero_gradient(self):
        vol = constant_volume(dims=(6, 6, 6), value=0.31)
        assert gradient_central(vol, (2.2, 3.1, 2.9)) == (0.0, 0.0, 0.0)

    def test_axis_ramp_slope(self):
        # f(i,j,k) = i/(nx-1) with nx = 5 and dx = 2 mm: df/dx = 1/((nx-1)*2)
        vol = ramp_volume(dims=(5, 5, 5), axis=0, spacing=(2.0, 1.0, 1.0))
        g = gradient_central(vol, (4.0, 2.0, 2.0))
        assert g is not None
        assert abs(g[0] - 1.0 / 8.0) <= 1e-12
        assert abs(g[1]) <= 1e-12 and abs(g[2]) <= 1e-12

    def test_linear_field_gradient_matches_coefficients(self, rng):
        a, b, c = 0.04, -0.03, 0.05
        nx = ny = nz = 6
        i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        vol = ScalarVolume.from_grid(0.5 + a * i + b * j + c * k, spacing=(1.0, 2.0, 0.5))
        coeffs = (a / 1.0, b / 2.0, c / 0.5)  # per-mm slopes
        for _ in range(25):
            p = rng.random(3) * np.array([5.0, 10.0, 2.5])
            g = gradient_central(vol, p)
            assert g is not None
            for got, want in zip(g, coeffs):
                assert abs(got - want) <= 1e-9

    def test_one_sided_near_faces_exact_on_linear_field(self):
        vol = ramp_volume(dims=(5, 5, 5))
        for x in (0.0, 0.5, 3.7, 4.0):
            g = gradient_central(vol, (x, 2.0, 2.0))
            assert abs(g[0] - 0.25) <= 1e-9

    def test_outside_returns_none(self):
        vol = constant_volume(dims=(4, 4, 4))
        assert gradient_central(vol, (5.0, 1.0, 1.0)) is None

    def test_thin_volume_fallback(self):
        vol = ramp_volume(dims=(2, 4, 4))
        g = gradient_central(vol, (0.5, 1.5, 1.5))
        assert abs(g[0] - 1.0) <= 1e-9


class TestIntersectRayAabb:
    def test_hand_computed_slab_case(self):
        ray = Ray(origin=(-5.0, 0.0, 0.0), direction=(1.0, 0.0, 0.0))
        box = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
        assert intersect_ray_aabb(ray, box) == (4.0, 6.0)

    def test_origin_inside_clamps_to_zero(self):
        ray = Ray(origin=(0.2, 0.1, -0.3), direction=(0.0, 0.0, 1.0))
        box = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
        t = intersect_ray_aabb(ray, box)
        assert t is not None
        assert t[0] == 0.0 and t[1] == pytest.approx(1.3)

    def test_parallel_outside_misses(self):
        ray = Ray(origin=(-5.0, 2.0, 0.0), direction=(1.0, 0.0, 0.0))
        box = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
        assert intersect_ray_aabb(ray, box) is None

    def test_parallel_inside_hits(self):
        ray = Ray(origin=(-5.0, 0.5, 0.5), direction=(1.0, 0.0, 0.0))
        box = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
        assert intersect_ray_aabb(ray, box) == (4.0, 6.0)

    def test_behind_origin_misses(self):
        ray = Ray(origin=(5.0, 0.0, 0.0), direction=(1.0, 0.0, 0.0))
        box = Aabb((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
        assert intersect_ray_aabb(ray, box) is None

    def test_entry_point_straddles_boundary(self, rng):
        box = Aabb((-2.0, -1.0, -3.0), (2.0, 1.0, 3.0))
        extent = max(hi - lo for lo, hi in zip(box.min, box.max))
        eps = 1e-6 * extent
        hits = 0
        for _ in range(300):
            origin = np.array(rng.uniform(-8, 8, 3))
            aim = rng.uniform(-1, 1, 3) * [2.0, 1.0, 3.0] + rng.normal(scale=2.0, size=3)
            d = aim - origin
            d /= np.linalg.norm(d)
            ray = Ray(origin=tuple(origin), direction=tuple(d))
            res = intersect_ray_aabb(ray, box)
            if res is None:
                continue
            tn, tf = res
            assert tn <= tf
            hits += 1
            inside_near = all(
                lo - eps <= c <= hi + eps
                for c, lo, hi in zip(ray.point_at(tn), box.min, box.max)
            )
            assert inside_near
            if tn > 0.0:
                before = ray.point_at(tn - eps)
                assert not box.contains(before)
        assert hits > 20


class TestComputeHistogram:
    def test_all_zero_volume(self):
        counts = compute_histogram(constant_volume(dims=(2, 2, 2), value=0.0), 4).counts
        assert list(counts) == [8, 0, 0, 0]

    def test_all_one_volume_clamps_to_top_bin(self):
        counts = compute_histogram(constant_volume(dims=(2, 2, 2), value=1.0), 4).counts
        assert list(counts) == [0, 0, 0, 8]

    def test_matches_per_voxel_tally(self, rng):
        vol = random_volume_grid(rng, dims=(5, 6, 7))
        bins = 13
        got = compute_histogram(vol, bins)
        tally = [0] * bins
        for v in vol.samples:
            b = int(math.floor(v * bins))
            if b == bins:
                b = bins - 1
            tally[b] += 1
        assert list(got.counts) == tally
        assert got.counts.sum() == 5 * 6 * 7

    @given(st.integers(min_value=2, max_value=64), st.integers(min_value=0, max_value=2**31))
    @settings(max_examples=30, deadline=None)
    def test_counts_sum_to_voxel_count(self, bins, seed):
        vol = random_volume_grid(np.random.default_rng(seed), dims=(3, 4, 2))
        assert compute_histogram(vol, bins).counts.sum() == 24

    def test_bin_count_below_two_rejected(self):
        with pytest.raises(ValueError):
            compute_histogram(constant_volume(), 1)


class TestNormalizeScalars:
    def test_eight_bit_endpoints(self):
        out, rng_ = normalize_scalars([0, 128, 255])
        assert out[0] == 0.0 and out[2] == 1.0
        assert out[1] == 128 / 255
        assert rng_ == (0.0, 255.0)

    def test_constant_input_degenerates_to_zero(self):
        out, rng_ = normalize_scalars([42, 42, 42])
        assert np.all(out == 0.0)
        assert rng_ == (42.0, 43.0)

    def test_window_clamps_then_maps(self):
        out, rng_ = normalize_scalars([10, 20, 30], window=(20, 30))
        assert list(out) == [0.0, 0.0, 1.0]
        assert rng_ == (20.0, 30.0)

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            normalize_scalars([])

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            normalize_scalars([1, 2], window=(5, 5))

    def test_output_always_in_unit_interval(self, rng):
        raw = rng.normal(scale=1000.0, size=500)
        out, _ = normalize_scalars(raw)
        assert out.min() >= 0.0 and out.max() <= 1.0
        out, _ = normalize_scalars(raw, window=(-100.0, 250.0))
        assert out.min() >= 0.0 and out.max() <= 1.0
