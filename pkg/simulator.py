#!/usr/bin/env python3
"""
Dual-pixel simulator
Spreads every pixel of an RGB-D image over its left and right footprints.

Two implementations share one footprint convention:

* ``simulate_fast`` writes four signed corner deltas per footprint into a
  differential image and integrates it once (summed-area table), so the
  cost does not depend on footprint size.
* ``simulate_brute`` loops over every source pixel and every covered
  destination pixel, weighting boundary pixels by fractional overlap. It is
  the correctness oracle for the fast path.

Footprints are real-valued rectangles. Pixel k covers [k - 1/2, k + 1/2);
a rectangle narrower than one pixel along an axis is widened to one pixel
around its centre. Corners that land between pixel sites are split
bilinearly over the four neighbours, which reproduces exact area overlap
after integration. Mass falling outside the frame is dropped and counted.
"""

import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple

import numpy as np

import optics
from errors import DomainError, ShapeError
from models import ApertureRect, BlurRegion, CameraConfig

logger = logging.getLogger(__name__)

# Rows per work unit. Fixed so the reduction order never depends on the worker count.
ROW_BLOCK = 32


@dataclass
class RgbdImage:
    """Sharp intensity image with per-pixel depth (pixel units)"""
    intensity: np.ndarray
    depth: np.ndarray
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.intensity = np.asarray(self.intensity, dtype=np.float64)
        if self.intensity.ndim == 2:
            self.intensity = self.intensity[..., None]
        if self.intensity.ndim != 3:
            raise ShapeError(f"intensity must be HxW or HxWxC, got shape {self.intensity.shape}")
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.shape != self.intensity.shape[:2]:
            raise ShapeError(
                f"depth shape {self.depth.shape} does not match image shape {self.intensity.shape[:2]}"
            )
        if self.mask is None:
            self.mask = np.isfinite(self.depth) & (self.depth > 0)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.depth.shape:
            raise ShapeError(f"mask shape {self.mask.shape} does not match depth shape {self.depth.shape}")
        if not np.all(np.isfinite(self.intensity)):
            raise DomainError("intensity contains non-finite values")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.intensity.shape


@dataclass
class SimulationStats:
    """Diagnostics gathered while synthesising a pair"""
    clipped_left: np.ndarray
    clipped_right: np.ndarray
    negative_clamped: float
    coverage: np.ndarray
    masked_pixels: int

    @property
    def clipped_energy(self) -> float:
        return float(self.clipped_left.sum() + self.clipped_right.sum())


@dataclass
class DpPair:
    """Left/right sub-aperture images B_L, B_R"""
    left: np.ndarray
    right: np.ndarray
    stats: Optional[SimulationStats] = field(default=None, compare=False)

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if self.left.ndim == 2:
            self.left = self.left[..., None]
        if self.right.ndim == 2:
            self.right = self.right[..., None]
        if self.left.shape != self.right.shape:
            raise ShapeError(f"left view {self.left.shape} and right view {self.right.shape} differ")

    @property
    def shape(self) -> Tuple[int, int, int]:
        return self.left.shape


@dataclass
class DifferentialImage:
    """Accumulated signed corner deltas for one view"""
    values: np.ndarray
    # mass of footprints that fell outside the frame, per channel
    clipped: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim == 2:
            self.values = self.values[..., None]
        if self.clipped is None:
            self.clipped = np.zeros(self.values.shape[2])

    @classmethod
    def zeros(cls, height: int, width: int, channels: int = 1) -> 'DifferentialImage':
        return cls(np.zeros((height, width, channels)))


def _deposit_edges(regions: optics.RegionArrays, offset_y: float, offset_z: float):
    """Footprints in cell-edge coordinates: pixel k spans [k, k + 1)"""
    width = np.maximum(regions.y_max - regions.y_min, 1.0)
    height = np.maximum(regions.z_max - regions.z_min, 1.0)
    center_y = 0.5 * (regions.y_min + regions.y_max) + offset_y + 0.5
    center_z = 0.5 * (regions.z_min + regions.z_max) + offset_z + 0.5
    return (center_y - 0.5 * width, center_y + 0.5 * width,
            center_z - 0.5 * height, center_z + 0.5 * height)


def _axis_fraction(e0, e1, size: int) -> np.ndarray:
    span = e1 - e0
    inside = np.clip(e1, 0.0, size) - np.clip(e0, 0.0, size)
    point_inside = ((e0 >= 0.0) & (e0 < size)).astype(np.float64)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(span > 0, inside / np.where(span > 0, span, 1.0), point_inside)


def _in_frame_fraction(e0y, e1y, e0z, e1z, height: int, width: int) -> np.ndarray:
    return _axis_fraction(e0y, e1y, width) * _axis_fraction(e0z, e1z, height)


def _accumulate(e0y, e1y, e0z, e1z, area, values, height: int, width: int):
    """Splat the box corners of N footprints.

    Returns (deltas, first_row, clipped per channel); deltas covers frame rows
    first_row .. first_row + len(deltas) and is zero elsewhere.
    """
    channels = values.shape[1]
    corners = ((e0y, e0z, 1.0), (e1y, e0z, -1.0), (e0y, e1z, -1.0), (e1y, e1z, 1.0))
    sites = []
    for cy, cz, sign in corners:
        # a corner left of / above the frame acts on every in-frame pixel, so it moves to 0;
        # one at or past the far edge acts on nothing in frame
        cy = np.clip(cy, 0.0, width)
        cz = np.clip(cz, 0.0, height)
        iy = np.floor(cy).astype(np.int64)
        iz = np.floor(cz).astype(np.int64)
        fy = cy - iy
        fz = cz - iz
        for dy, dz, w in ((0, 0, (1 - fy) * (1 - fz)), (1, 0, fy * (1 - fz)),
                          (0, 1, (1 - fy) * fz), (1, 1, fy * fz)):
            sy = iy + dy
            sz = iz + dz
            keep = (sy < width) & (sz < height)
            sites.append((sy, sz, np.where(keep, sign * w, 0.0), keep))

    kept_rows = [sz[keep] for _, sz, _, keep in sites if keep.any()]
    first = int(min(r.min() for r in kept_rows)) if kept_rows else 0
    band = int(max(r.max() for r in kept_rows)) + 1 - first if kept_rows else 0
    flat_index = np.concatenate([np.where(keep, (sz - first) * width + sy, 0) for sy, sz, _, keep in sites])
    flat_weight = np.concatenate([w for _, _, w, _ in sites])

    scaled = values / area[:, None]
    deltas = np.zeros((band, width, channels))
    for c in range(channels if band else 0):
        per_site = flat_weight * np.tile(scaled[:, c], 16)
        deltas[..., c] = np.bincount(flat_index, weights=per_site,
                                     minlength=band * width).reshape(band, width)

    outside = 1.0 - _in_frame_fraction(e0y, e1y, e0z, e1z, height, width)
    clipped = (values * outside[:, None]).sum(axis=0)
    return deltas, first, clipped


def deposit_box(region: BlurRegion, offset: Tuple[float, float] = (0.0, 0.0)) -> BlurRegion:
    """Convert a sensor footprint into the cell-edge rectangle that splat_corners expects"""
    r = optics.RegionArrays(*(np.array(v) for v in (region.y_min, region.y_max, region.z_min,
                                                      region.z_max, region.scale, region.area)))
    e0y, e1y, e0z, e1z = _deposit_edges(r, offset[0], offset[1])
    return BlurRegion(y_min=float(e0y), y_max=float(e1y), z_min=float(e0z), z_max=float(e1z),
                      scale=region.scale, area=region.area)


def splat_corners(diff: DifferentialImage, region: BlurRegion, value) -> DifferentialImage:
    """Add value/area at the four corners of region (signs +, -, -, +), in place.

    ``region`` is in cell-edge coordinates (see ``deposit_box``).
    """
    height, width, channels = diff.values.shape
    values = np.broadcast_to(np.asarray(value, dtype=np.float64), (channels,))[None, :]
    if not np.all(np.isfinite(values)):
        raise DomainError(f"splat value must be finite, got {value}")
    deltas, first, clipped = _accumulate(
        np.array([region.y_min]), np.array([region.y_max]),
        np.array([region.z_min]), np.array([region.z_max]),
        np.array([region.area]), values, height, width,
    )
    diff.values[first:first + len(deltas)] += deltas
    diff.clipped = diff.clipped + clipped
    return diff


def integrate(diff) -> np.ndarray:
    """Inclusive 2-D prefix sum per channel (rows first, then columns)"""
    values = diff.values if isinstance(diff, DifferentialImage) else np.asarray(diff, dtype=np.float64)
    return np.cumsum(np.cumsum(values, axis=0), axis=1)


def _check_depths(img: RgbdImage, cfg: CameraConfig) -> None:
    optics.virtual_depth(img.depth[img.mask], cfg)


def _footprint_edges(img: RgbdImage, cfg: CameraConfig, aperture: ApertureRect,
                     rows: np.ndarray, cols: np.ndarray):
    height, width, _ = img.shape
    cy = 0.5 * (width - 1)
    cz = 0.5 * (height - 1)
    regions = optics.blur_regions(cols - cy, rows - cz, img.depth[rows, cols], aperture, cfg)
    return _deposit_edges(regions, cy, cz) + (regions.area,)


def _splat_rows(img: RgbdImage, cfg: CameraConfig, r0: int, r1: int):
    height, width, channels = img.shape
    rows, cols = np.nonzero(img.mask[r0:r1])
    rows = rows + r0
    values = img.intensity[rows, cols]
    out = []
    for aperture in (cfg.aperture_left, cfg.aperture_right):
        if rows.size == 0:
            out.append((np.zeros((0, width, channels)), 0, np.zeros(channels)))
            continue
        e0y, e1y, e0z, e1z, area = _footprint_edges(img, cfg, aperture, rows, cols)
        out.append(_accumulate(e0y, e1y, e0z, e1z, area, values, height, width))
    return out


def bounded_map(pool, fn, items, window: int) -> Iterator:
    """Like pool.map, but keeps at most `window` tasks outstanding; results come in input order"""
    pending = deque()
    for item in items:
        pending.append(pool.submit(fn, item))
        if len(pending) >= window:
            yield pending.popleft().result()
    while pending:
        yield pending.popleft().result()


def _finish(left: np.ndarray, right: np.ndarray, clipped_left, clipped_right,
            img: RgbdImage) -> DpPair:
    negative = float(-left[left < 0].sum() - right[right < 0].sum())
    np.maximum(left, 0.0, out=left)
    np.maximum(right, 0.0, out=right)
    stats = SimulationStats(
        clipped_left=np.asarray(clipped_left, dtype=np.float64),
        clipped_right=np.asarray(clipped_right, dtype=np.float64),
        negative_clamped=negative,
        coverage=img.mask.copy(),
        masked_pixels=int(np.count_nonzero(~img.mask)),
    )
    return DpPair(left=left, right=right, stats=stats)


def simulate_fast(img: RgbdImage, cfg: CameraConfig, workers: int = 1) -> DpPair:
    """Synthesise a DP pair with the differential-mask + integral-image scatter.

    Rows are processed in fixed blocks; each block returns the band of
    differential rows it touches and bands are summed in row order, so the
    result is bitwise identical for any worker count. At most two blocks per
    worker are held at once.
    """
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    _check_depths(img, cfg)
    height, width, channels = img.shape
    blocks = [(r0, min(r0 + ROW_BLOCK, height)) for r0 in range(0, height, ROW_BLOCK)]

    diff_left = np.zeros((height, width, channels))
    diff_right = np.zeros((height, width, channels))
    clipped_left = np.zeros(channels)
    clipped_right = np.zeros(channels)

    def reduce(parts):
        for (dl, fl, cl), (dr, fr, cr) in parts:
            diff_left[fl:fl + len(dl)] += dl
            diff_right[fr:fr + len(dr)] += dr
            np.add(clipped_left, cl, out=clipped_left)
            np.add(clipped_right, cr, out=clipped_right)

    if workers == 1 or len(blocks) == 1:
        reduce(_splat_rows(img, cfg, r0, r1) for r0, r1 in blocks)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reduce(bounded_map(pool, lambda b: _splat_rows(img, cfg, *b), blocks, 2 * workers))

    pair = _finish(integrate(diff_left), integrate(diff_right), clipped_left, clipped_right, img)
    logger.debug(f"simulate_fast {height}x{width}x{channels}: clipped={pair.stats.clipped_energy:.6g}, "
                 f"masked={pair.stats.masked_pixels}, negative={pair.stats.negative_clamped:.3g}")
    return pair


def simulate_brute(img: RgbdImage, cfg: CameraConfig) -> DpPair:
    """Direct splatting over every covered pixel; slow reference for simulate_fast"""
    _check_depths(img, cfg)
    height, width, channels = img.shape
    rows, cols = np.nonzero(img.mask)
    views = []
    clipped = []
    for aperture in (cfg.aperture_left, cfg.aperture_right):
        out = np.zeros((height, width, channels))
        if rows.size == 0:
            views.append(out)
            clipped.append(np.zeros(channels))
            continue
        e0y, e1y, e0z, e1z, area = _footprint_edges(img, cfg, aperture, rows, cols)
        for n in range(rows.size):
            value = img.intensity[rows[n], cols[n]] / area[n]
            z_lo = max(int(np.floor(e0z[n])), 0)
            z_hi = min(int(np.ceil(e1z[n])), height)
            y_lo = max(int(np.floor(e0y[n])), 0)
            y_hi = min(int(np.ceil(e1y[n])), width)
            for zi in range(z_lo, z_hi):
                wz = min(e1z[n], zi + 1) - max(e0z[n], zi)
                if wz <= 0:
                    continue
                for yi in range(y_lo, y_hi):
                    wy = min(e1y[n], yi + 1) - max(e0y[n], yi)
                    if wy <= 0:
                        continue
                    out[zi, yi] += value * (wz * wy)
        views.append(out)
        outside = 1.0 - _in_frame_fraction(e0y, e1y, e0z, e1z, height, width)
        clipped.append((img.intensity[rows, cols] * outside[:, None]).sum(axis=0))
    return _finish(views[0], views[1], clipped[0], clipped[1], img)
