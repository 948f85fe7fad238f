"""
Classical depth recovery from a dual-pixel pair

* ``sweep_depth``: plane sweep over depth hypotheses scored by the reblur
  residual; needs the sharp image.
* ``block_match``: 1-D SSD search along the aperture-split axis with a small
  search range, optional parabolic subpixel refinement.

Both mark low-texture pixels invalid, since neither objective can tell
hypotheses apart on flat regions.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

import optics
from config import Config
from errors import ShapeError
from maps import DepthMap, DisparityMap
from models import CameraConfig, MatchConfig, SweepConfig
from simulator import DpPair, RgbdImage, bounded_map, simulate_fast

logger = logging.getLogger(__name__)

# rows per band in block matching; fixed so output does not depend on worker count
MATCH_ROW_BLOCK = 32


@dataclass
class SweepResult:
    """Selected depth plus a per-pixel summary of the residual volume"""
    depth: DepthMap
    index: np.ndarray
    best_residual: np.ndarray
    second_residual: np.ndarray
    hypotheses: np.ndarray


def local_variance(gray: np.ndarray, size: int) -> np.ndarray:
    mean = uniform_filter(gray, size=size, mode='nearest')
    mean_sq = uniform_filter(gray * gray, size=size, mode='nearest')
    return np.maximum(mean_sq - mean * mean, 0.0)


def _gray(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return image.mean(axis=-1) if image.ndim == 3 else image


def sweep_depth(sharp, observed: DpPair, cfg: CameraConfig, sw: SweepConfig, workers: int = 1,
                texture_threshold: float = Config.TEXTURE_THRESHOLD) -> SweepResult:
    """Pick, per pixel, the depth hypothesis whose re-synthesised pair best matches the observation.

    Ties go to the smaller hypothesis index.
    """
    sharp = np.asarray(sharp, dtype=np.float64)
    if sharp.ndim == 2:
        sharp = sharp[..., None]
    if sharp.shape != observed.shape:
        raise ShapeError(f"sharp image {sharp.shape} and observed pair {observed.shape} differ")
    hypotheses = np.asarray(sw.hypotheses, dtype=np.float64)
    optics.virtual_depth(hypotheses, cfg)

    height, width, _ = sharp.shape
    size = 2 * sw.window + 1

    def residual(d_k: float) -> np.ndarray:
        pair = simulate_fast(RgbdImage(sharp, np.full((height, width), d_k)), cfg)
        r = ((pair.left - observed.left) ** 2).sum(axis=-1) + ((pair.right - observed.right) ** 2).sum(axis=-1)
        return uniform_filter(r, size=size, mode='nearest') if sw.window > 0 else r

    best = np.full((height, width), np.inf)
    second = np.full((height, width), np.inf)
    index = np.zeros((height, width), dtype=np.int64)

    def select(residuals):
        for k, r in enumerate(residuals):
            better = r < best
            second[...] = np.where(better, best, np.minimum(second, r))
            index[better] = k
            best[...] = np.where(better, r, best)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            select(bounded_map(pool, residual, hypotheses, 2 * workers))
    else:
        select(residual(d_k) for d_k in hypotheses)

    textured = local_variance(_gray(sharp), max(size, 3)) >= texture_threshold
    depth = DepthMap(hypotheses[index], textured)
    logger.info(f"Plane sweep over {hypotheses.size} hypotheses: "
                f"{int(textured.sum())}/{textured.size} textured pixels")
    return SweepResult(depth=depth, index=index, best_residual=best, second_residual=second,
                       hypotheses=hypotheses)


def _match_band(left: np.ndarray, right: np.ndarray, mc: MatchConfig, r0: int, r1: int):
    height, width = left.shape
    halo = mc.block // 2
    b0, b1 = max(r0 - halo, 0), min(r1 + halo, height)
    lb = left[b0:b1]
    rb = np.pad(right[b0:b1], ((0, 0), (mc.max_disparity, mc.max_disparity)), mode='edge')

    offsets = np.arange(-mc.max_disparity, mc.max_disparity + 1)
    costs = np.empty((offsets.size, b1 - b0, width))
    for i, delta in enumerate(offsets):
        # left(u) ~ right(u - delta)
        start = mc.max_disparity - delta
        shifted = rb[:, start:start + width]
        costs[i] = uniform_filter((lb - shifted) ** 2, size=mc.block, mode='nearest')
    costs = costs[:, r0 - b0:r1 - b0]

    best = np.argmin(costs, axis=0)
    disparity = offsets[best].astype(np.float64)
    if mc.subpixel:
        interior = (best > 0) & (best < offsets.size - 1)
        rows, cols = np.nonzero(interior)
        k = best[rows, cols]
        c_minus = costs[k - 1, rows, cols]
        c_zero = costs[k, rows, cols]
        c_plus = costs[k + 1, rows, cols]
        denom = c_minus - 2.0 * c_zero + c_plus
        safe = denom > 0
        shift = np.zeros_like(denom)
        shift[safe] = 0.5 * (c_minus[safe] - c_plus[safe]) / denom[safe]
        disparity[rows, cols] += np.clip(shift, -0.5, 0.5)
    return disparity


def block_match(observed: DpPair, mc: MatchConfig, workers: int = 1) -> DisparityMap:
    """Per-pixel SSD search over integer offsets in [-max_disparity, +max_disparity]"""
    left = _gray(observed.left)
    right = _gray(observed.right)
    height, width = left.shape
    if width <= 2 * mc.max_disparity:
        raise ShapeError(f"image width {width} too small for a search range of +/-{mc.max_disparity}")

    bands = [(r0, min(r0 + MATCH_ROW_BLOCK, height)) for r0 in range(0, height, MATCH_ROW_BLOCK)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _match_band(left, right, mc, *b), bands))
    else:
        parts = [_match_band(left, right, mc, *b) for b in bands]
    disparity = np.concatenate(parts, axis=0)

    valid = local_variance(left, mc.block) >= mc.texture_threshold
    # the search window leaves the frame near the left/right borders
    valid[:, :mc.max_disparity] = False
    valid[:, width - mc.max_disparity:] = False
    logger.info(f"Block matching: {int(valid.sum())}/{valid.size} valid pixels")
    return DisparityMap(disparity, valid)


def disparity_to_depth_map(disp: DisparityMap, cfg: CameraConfig) -> DepthMap:
    """Convert disparities to depth; unattainable disparities become invalid, never clamped"""
    depth, attainable = optics.invert_disparity(disp.values, cfg)
    valid = disp.valid & attainable
    dropped = int(np.count_nonzero(disp.valid & ~attainable))
    if dropped:
        logger.warning(f"{dropped} disparities outside the attainable range marked invalid")
    return DepthMap(np.where(valid, depth, np.nan), valid)
