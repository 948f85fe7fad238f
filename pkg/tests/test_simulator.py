import time
from concurrent.futures import Future, ThreadPoolExecutor

import numpy as np
import pytest
from scipy.signal import convolve2d

import optics
from errors import DomainError, ShapeError
from models import BlurRegion, CameraConfig
from simulator import (DifferentialImage, RgbdImage, _splat_rows, bounded_map, deposit_box, integrate,
                       simulate_brute, simulate_fast, splat_corners)


def _region(y0, y1, z0, z1, area):
    return BlurRegion(y_min=y0, y_max=y1, z_min=z0, z_max=z1, scale=0.0, area=area)


def test_integrate_corner_delta_fills_everything():
    diff = np.zeros((5, 7, 1))
    diff[0, 0, 0] = 1.0
    np.testing.assert_array_equal(integrate(diff), np.ones((5, 7, 1)))


def test_integrate_box_deltas_give_indicator():
    diff = DifferentialImage.zeros(10, 10)
    splat_corners(diff, _region(2.0, 5.0, 3.0, 6.0, 9.0), 9.0)
    expected = np.zeros((10, 10, 1))
    expected[3:6, 2:5] = 1.0
    np.testing.assert_allclose(integrate(diff), expected, atol=1e-12)


def test_integrate_matches_double_loop(rng):
    diff = rng.normal(size=(32, 32, 2))
    expected = np.zeros_like(diff)
    for r in range(32):
        for c in range(32):
            expected[r, c] = diff[:r + 1, :c + 1].sum(axis=(0, 1))
    np.testing.assert_allclose(integrate(diff), expected, atol=1e-12)


def test_splat_unit_square_signs():
    diff = splat_corners(DifferentialImage.zeros(4, 4), _region(0.0, 1.0, 0.0, 1.0, 1.0), 1.0)
    v = diff.values[..., 0]
    assert (v[0, 0], v[0, 1], v[1, 0], v[1, 1]) == (1.0, -1.0, -1.0, 1.0)
    assert np.count_nonzero(v) == 4
    out = integrate(diff)[..., 0]
    assert out[0, 0] == 1.0
    assert out.sum() == pytest.approx(1.0)


def test_splat_fractional_corners_split_bilinearly():
    diff = splat_corners(DifferentialImage.zeros(5, 5), _region(0.5, 2.5, 0.5, 2.5, 4.0), 4.0)
    v = diff.values[..., 0]
    np.testing.assert_allclose(v[:2, :2], 0.25)
    np.testing.assert_allclose(v[:2, 2:4], -0.25)
    np.testing.assert_allclose(v[2:4, :2], -0.25)
    np.testing.assert_allclose(v[2:4, 2:4], 0.25)

    out = integrate(diff)[..., 0]
    assert out[0, 0] == pytest.approx(0.25)
    assert out[0, 1] == pytest.approx(0.5)
    assert out[1, 1] == pytest.approx(1.0)
    assert out[2, 2] == pytest.approx(0.25)
    assert out.sum() == pytest.approx(4.0)


def test_degenerate_region_deposits_one_pixel():
    box = deposit_box(_region(2.0, 2.0, 3.0, 3.0, 1.0))
    assert (box.y_min, box.y_max, box.z_min, box.z_max) == (2.0, 3.0, 3.0, 4.0)
    out = integrate(splat_corners(DifferentialImage.zeros(6, 6), box, 5.0))[..., 0]
    expected = np.zeros((6, 6))
    expected[3, 2] = 5.0
    np.testing.assert_allclose(out, expected, atol=1e-12)


def test_splat_tracks_clipped_energy():
    diff = splat_corners(DifferentialImage.zeros(3, 3), _region(-1.0, 1.0, 0.0, 1.0, 2.0), 2.0)
    out = integrate(diff)[..., 0]
    assert out[0, 0] == pytest.approx(1.0)
    assert out.sum() == pytest.approx(1.0)
    assert diff.clipped[0] == pytest.approx(1.0)


def test_splat_rejects_non_finite_value():
    with pytest.raises(DomainError):
        splat_corners(DifferentialImage.zeros(3, 3), _region(0.0, 1.0, 0.0, 1.0, 1.0), np.nan)


def test_in_focus_scene_is_identity(cfg, rng):
    intensity = rng.uniform(size=(40, 40, 3))
    img = RgbdImage(intensity, np.full((40, 40), 2100.0))
    for pair in (simulate_fast(img, cfg), simulate_brute(img, cfg)):
        np.testing.assert_allclose(pair.left, intensity, atol=1e-6)
        np.testing.assert_allclose(pair.right, intensity, atol=1e-6)


def test_point_source_views_offset_by_disparity(cfg):
    intensity = np.zeros((41, 41))
    intensity[20, 20] = 1.0
    pair = simulate_fast(RgbdImage(intensity, np.full((41, 41), 420.0)), cfg)

    region = optics.blur_region((0.0, 0.0), 420.0, cfg.aperture_left, cfg)
    # row 20, column 19 sits fully inside the left footprint
    assert pair.left[20, 19, 0] == pytest.approx(1.0 / region.area, rel=1e-9)

    cols = np.arange(41)
    rows = np.arange(41)[:, None]
    left = pair.left[..., 0]
    right = pair.right[..., 0]
    assert left.sum() == pytest.approx(1.0)
    assert right.sum() == pytest.approx(1.0)
    offset = (left * cols).sum() - (right * cols).sum()
    assert offset == pytest.approx(optics.disparity_for_depth(420.0, cfg), abs=0.05)
    assert (left * rows).sum() == pytest.approx(20.0)
    assert (right * rows).sum() == pytest.approx(20.0)


def test_fast_matches_brute_on_random_scenes(cfg):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        img = RgbdImage(rng.uniform(size=(64, 64, 3)), rng.uniform(200.0, 5000.0, size=(64, 64)))
        fast = simulate_fast(img, cfg)
        brute = simulate_brute(img, cfg)
        assert np.max(np.abs(fast.left - brute.left)) <= 1e-6
        assert np.max(np.abs(fast.right - brute.right)) <= 1e-6
        np.testing.assert_allclose(fast.stats.clipped_left, brute.stats.clipped_left, rtol=1e-9)


def test_energy_conserved_for_interior_footprints(cfg, rng):
    intensity = np.zeros((64, 64, 3))
    intensity[16:48, 16:48] = rng.uniform(size=(32, 32, 3))
    pair = simulate_fast(RgbdImage(intensity, np.full((64, 64), 300.0)), cfg)
    for view in (pair.left, pair.right):
        np.testing.assert_allclose(view.sum(axis=(0, 1)), intensity.sum(axis=(0, 1)), rtol=1e-9)
    assert pair.stats.clipped_energy == pytest.approx(0.0, abs=1e-9)


def test_clipped_energy_accounts_for_deficit(cfg, rng):
    intensity = rng.uniform(size=(48, 48, 3))
    pair = simulate_fast(RgbdImage(intensity, rng.uniform(150.0, 400.0, size=(48, 48))), cfg)
    assert pair.stats.clipped_energy > 0
    total = intensity.sum(axis=(0, 1))
    np.testing.assert_allclose(pair.left.sum(axis=(0, 1)) + pair.stats.clipped_left, total, rtol=1e-9)
    np.testing.assert_allclose(pair.right.sum(axis=(0, 1)) + pair.stats.clipped_right, total, rtol=1e-9)


def _box_kernel(region: BlurRegion, radius: int) -> np.ndarray:
    """Per-offset overlap of the one-pixel-floored footprint with unit cells, over its area"""
    width = max(region.y_max - region.y_min, 1.0)
    height = max(region.z_max - region.z_min, 1.0)
    cy = 0.5 * (region.y_min + region.y_max)
    cz = 0.5 * (region.z_min + region.z_max)
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    wy = np.clip(np.minimum(cy + width / 2, offsets + 0.5) - np.maximum(cy - width / 2, offsets - 0.5), 0.0, None)
    wz = np.clip(np.minimum(cz + height / 2, offsets + 0.5) - np.maximum(cz - height / 2, offsets - 0.5), 0.0, None)
    return np.outer(wz, wy) / region.area


@pytest.mark.parametrize('depth', [300.0, 1000.0, 6000.0])
def test_constant_depth_is_box_convolution(cfg, texture, depth):
    size, radius = 128, 8
    image = texture(size, size)
    img = RgbdImage(image, np.full((size, size), depth))
    fast = simulate_fast(img, cfg)
    brute = simulate_brute(img, cfg)

    for aperture, views in ((cfg.aperture_left, (fast.left, brute.left)),
                            (cfg.aperture_right, (fast.right, brute.right))):
        kernel = _box_kernel(optics.blur_region((0.0, 0.0), depth, aperture, cfg), radius)
        assert kernel.sum() == pytest.approx(1.0)
        expected = convolve2d(image, kernel, mode='full')[radius:radius + size, radius:radius + size]
        for view in views:
            np.testing.assert_allclose(view[..., 0], expected, atol=1e-6)


def test_simulation_is_linear_in_intensity(cfg, rng):
    depth = rng.uniform(150.0, 3000.0, size=(50, 50))
    i1 = rng.uniform(size=(50, 50, 3))
    i2 = rng.uniform(size=(50, 50, 3))
    a, b = 0.3, 0.7
    mixed = simulate_fast(RgbdImage(a * i1 + b * i2, depth), cfg)
    p1 = simulate_fast(RgbdImage(i1, depth), cfg)
    p2 = simulate_fast(RgbdImage(i2, depth), cfg)
    np.testing.assert_allclose(mixed.left, a * p1.left + b * p2.left, atol=1e-9)
    np.testing.assert_allclose(mixed.right, a * p1.right + b * p2.right, atol=1e-9)


def test_output_is_bitwise_identical_across_worker_counts(cfg, rng):
    img = RgbdImage(rng.uniform(size=(100, 70, 3)), rng.uniform(150.0, 8000.0, size=(100, 70)))
    reference = simulate_fast(img, cfg, workers=1)
    for workers in (2, 3, 8):
        pair = simulate_fast(img, cfg, workers=workers)
        assert np.array_equal(pair.left, reference.left)
        assert np.array_equal(pair.right, reference.right)
        assert np.array_equal(pair.stats.clipped_left, reference.stats.clipped_left)


def test_invalid_depth_deposits_nothing(cfg):
    intensity = np.zeros((20, 20))
    intensity[10, 10] = 1.0
    depth = np.full((20, 20), 420.0)
    depth[10, 10] = 0.0
    pair = simulate_fast(RgbdImage(intensity, depth), cfg)
    assert pair.left.sum() == 0.0 and pair.right.sum() == 0.0
    assert pair.stats.masked_pixels == 1
    assert not pair.stats.coverage[10, 10]


def test_depth_inside_focal_length_is_rejected(cfg):
    depth = np.full((8, 8), 420.0)
    depth[3, 3] = 90.0
    img = RgbdImage(np.ones((8, 8)), depth)
    with pytest.raises(DomainError, match="f="):
        simulate_fast(img, cfg)
    with pytest.raises(DomainError):
        simulate_brute(img, cfg)


def test_rgbd_shape_mismatch():
    with pytest.raises(ShapeError):
        RgbdImage(np.ones((8, 8, 3)), np.ones((8, 9)))


def test_outputs_are_non_negative(cfg, rng):
    img = RgbdImage(rng.uniform(size=(40, 40)), rng.uniform(120.0, 20000.0, size=(40, 40)))
    pair = simulate_fast(img, cfg)
    assert pair.left.min() >= 0.0 and pair.right.min() >= 0.0
    assert np.all(np.isfinite(pair.left)) and np.all(np.isfinite(pair.right))


def _best_time(fn, repeats=3):
    best = float('inf')
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


@pytest.mark.slow
def test_fast_runtime_independent_of_aperture(rng):
    img = RgbdImage(rng.uniform(size=(512, 512)), np.full((512, 512), 150.0))
    small = CameraConfig.symmetric(f=100.0, F=105.0, aperture_width=20.0)
    large = CameraConfig.symmetric(f=100.0, F=105.0, aperture_width=40.0)
    simulate_fast(img, small)
    t_small = _best_time(lambda: simulate_fast(img, small))
    t_large = _best_time(lambda: simulate_fast(img, large))
    assert max(t_small, t_large) / min(t_small, t_large) < 1.2


@pytest.mark.slow
def test_brute_runtime_grows_with_aperture(rng):
    img = RgbdImage(rng.uniform(size=(64, 64)), np.full((64, 64), 150.0))
    small = CameraConfig.symmetric(f=100.0, F=105.0, aperture_width=20.0)
    large = CameraConfig.symmetric(f=100.0, F=105.0, aperture_width=40.0)
    t_small = _best_time(lambda: simulate_brute(img, small), repeats=1)
    t_large = _best_time(lambda: simulate_brute(img, large), repeats=1)
    assert t_large > 2.0 * t_small


class _RecordingPool:
    """Synchronous stand-in for an executor that counts submissions"""

    def __init__(self):
        self.submitted = 0

    def submit(self, fn, item):
        self.submitted += 1
        future = Future()
        future.set_result(fn(item))
        return future


def test_bounded_map_limits_outstanding_tasks():
    pool = _RecordingPool()
    results = bounded_map(pool, lambda x: x * x, range(10), 3)
    assert next(results) == 0
    assert pool.submitted == 3
    assert list(results) == [x * x for x in range(1, 10)]
    assert pool.submitted == 10


def test_bounded_map_keeps_input_order():
    def slow_first(x):
        time.sleep(0.02 * (5 - x))
        return x

    with ThreadPoolExecutor(max_workers=4) as pool:
        assert list(bounded_map(pool, slow_first, range(6), 4)) == list(range(6))


def test_row_block_returns_only_touched_rows(cfg, rng):
    img = RgbdImage(rng.uniform(size=(256, 40, 3)), np.full((256, 40), 420.0))
    for deltas, first, _ in _splat_rows(img, cfg, 64, 96):
        assert 56 <= first <= 64
        assert first + len(deltas) <= 104
        assert deltas.shape[1:] == (40, 3)
