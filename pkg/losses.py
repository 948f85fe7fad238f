"""
Restoration, depth and reblur losses, plus their unweighted sum
"""

import logging
from typing import Literal, Optional

import numpy as np

from errors import EmptyMaskError, ShapeError
from maps import InverseDepthMap
from models import CameraConfig, LossReport
from simulator import DpPair, RgbdImage, simulate_fast

logger = logging.getLogger(__name__)

# transition of the smooth-l1 penalty, inverse-depth units
SMOOTH_L1_BETA = 1.0


def _as_image(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    return a[..., None] if a.ndim == 2 else a


def restoration_loss(pred, target) -> float:
    """Mean over pixels of the channel-vector l2 distance"""
    pred = _as_image(pred)
    target = _as_image(target)
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    return float(np.mean(np.sqrt(np.sum((pred - target) ** 2, axis=-1))))


def smooth_l1(x: np.ndarray, beta: float = SMOOTH_L1_BETA) -> np.ndarray:
    ax = np.abs(x)
    return np.where(ax < beta, 0.5 * ax ** 2 / beta, ax - 0.5 * beta)


def depth_loss(pred: InverseDepthMap, target: InverseDepthMap) -> float:
    """Smooth-l1 between inverse depths, averaged where the target is valid"""
    if pred.shape != target.shape:
        raise ShapeError(f"prediction {pred.shape} and target {target.shape} differ")
    mask = target.valid & np.isfinite(pred.values)
    if not mask.any():
        raise EmptyMaskError("target inverse depth has no valid pixels")
    return float(np.mean(smooth_l1(pred.values[mask] - target.values[mask])))


def reblur_loss(sharp, inv_depth: InverseDepthMap, observed: DpPair, cfg: CameraConfig,
                workers: int = 1) -> float:
    """Re-synthesise the DP pair from (sharp, depth) and compare it with the observed pair"""
    sharp = _as_image(sharp)
    if sharp.shape[:2] != inv_depth.shape:
        raise ShapeError(f"sharp image {sharp.shape[:2]} and inverse depth {inv_depth.shape} differ")
    if observed.shape != sharp.shape:
        raise ShapeError(f"observed pair {observed.shape} and sharp image {sharp.shape} differ")
    depth = inv_depth.to_depth()
    reblurred = simulate_fast(RgbdImage(sharp, np.nan_to_num(depth.values), depth.valid), cfg,
                              workers=workers)
    left = restoration_loss(reblurred.left, observed.left)
    right = restoration_loss(reblurred.right, observed.right)
    return 0.5 * (left + right)


def compute_losses(pred_sharp, pred_inv_depth: InverseDepthMap, observed: DpPair, cfg: CameraConfig,
                   target_sharp=None, target_inv_depth: Optional[InverseDepthMap] = None,
                   reblur_depth: Literal['predicted', 'target'] = 'predicted',
                   workers: int = 1) -> LossReport:
    """Evaluate L = L_res + L_d + L_reb; a term without its target contributes 0"""
    if target_sharp is None:
        logger.info("No target sharp image given; restoration term set to 0")
        restoration = 0.0
    else:
        restoration = restoration_loss(pred_sharp, target_sharp)

    if target_inv_depth is None:
        logger.info("No target inverse depth given; depth term set to 0")
        depth = 0.0
    else:
        depth = depth_loss(pred_inv_depth, target_inv_depth)

    if reblur_depth == 'target':
        if target_inv_depth is None:
            raise ValueError("reblur wiring 'target' needs a target inverse depth")
        reblur_inv = target_inv_depth
    else:
        reblur_inv = pred_inv_depth
    reblur = reblur_loss(pred_sharp, reblur_inv, observed, cfg, workers=workers)

    report = LossReport.from_components(restoration, depth, reblur)
    logger.debug(f"Losses: {report.model_dump()}")
    return report
