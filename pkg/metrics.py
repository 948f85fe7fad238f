"""
Evaluation metrics for depth maps and restored images.

Affine-invariant errors (AI(1), AI(2)) follow a fixed convention so numbers
are reproducible: fit g ~ a*p + b by ordinary least squares over the masked
pixels (a may be negative), take the residual r = a*p + b - g, and report
mean|r| and sqrt(mean r^2), each divided by the ground-truth range
max(g) - min(g).
"""

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np
from scipy import stats
from skimage.metrics import structural_similarity

from config import Config
from errors import DegenerateFitError, DomainError, EmptyMaskError, ShapeError
from maps import DepthMap
from models import DepthMetricReport, ImageMetricReport

logger = logging.getLogger(__name__)


def _masked(pred, gt, mask) -> Tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    keep = np.isfinite(pred) & np.isfinite(gt)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != gt.shape:
            raise ShapeError(f"mask {mask.shape} and ground truth {gt.shape} differ")
        keep &= mask
    if not keep.any():
        raise EmptyMaskError("no valid pixels under the mask")
    return pred[keep], gt[keep]


def affine_invariant_metrics(pred, gt, mask=None) -> Tuple[float, float]:
    """(AI(1), AI(2)) after the least-squares affine alignment of pred to gt"""
    p, g = _masked(pred, gt, mask)
    if p.size < 2 or np.all(p == p[0]):
        raise DegenerateFitError("prediction is constant on the mask; affine fit is undefined")
    g_range = float(g.max() - g.min())
    if g_range == 0.0:
        raise DegenerateFitError("ground truth is constant on the mask; range normalisation is undefined")
    design = np.column_stack([p, np.ones_like(p)])
    (a, b), *_ = np.linalg.lstsq(design, g, rcond=None)
    residual = a * p + b - g
    ai1 = float(np.mean(np.abs(residual))) / g_range
    ai2 = math.sqrt(float(np.mean(residual ** 2))) / g_range
    return ai1, ai2


def spearman_term(pred, gt, mask=None) -> float:
    """1 - |Spearman rank correlation|, ties ranked by their average"""
    p, g = _masked(pred, gt, mask)
    if p.size < 2 or np.all(p == p[0]) or np.all(g == g[0]):
        raise DegenerateFitError("rank correlation is undefined for constant input")
    rho = stats.spearmanr(p, g)[0]
    return float(np.clip(1.0 - abs(rho), 0.0, 1.0))


def depth_metrics(pred: Union[DepthMap, np.ndarray], gt: Union[DepthMap, np.ndarray],
                  mask=None) -> DepthMetricReport:
    """Standard depth errors over pixels with a valid, positive ground truth.

    DepthMap inputs contribute their validity masks; plain arrays are taken as is.
    """
    masks = [] if mask is None else [np.asarray(mask, dtype=bool)]
    if isinstance(pred, DepthMap):
        masks.append(pred.valid)
        pred = pred.values
    if isinstance(gt, DepthMap):
        masks.append(gt.valid)
        gt = gt.values
    gt_arr = np.asarray(gt, dtype=np.float64)
    if np.shape(pred) != gt_arr.shape:
        raise ShapeError(f"prediction {np.shape(pred)} and ground truth {gt_arr.shape} differ")
    base = np.isfinite(gt_arr) & (gt_arr > 0)
    for m in masks:
        if m.shape != gt_arr.shape:
            raise ShapeError(f"mask {m.shape} and ground truth {gt_arr.shape} differ")
        base &= m
    p, g = _masked(pred, gt_arr, base)
    if np.any(p <= 0):
        raise DomainError(f"{int(np.count_nonzero(p <= 0))} predicted depth(s) are <= 0; log errors are undefined")

    ratio = np.maximum(p / g, g / p)
    diff = p - g
    report = dict(
        abs_rel=float(np.mean(np.abs(diff) / g)),
        sq_rel=float(np.mean(diff ** 2 / g)),
        rmse=math.sqrt(float(np.mean(diff ** 2))),
        rmse_log=math.sqrt(float(np.mean((np.log(p) - np.log(g)) ** 2))),
        delta1=float(np.mean(ratio < 1.25)),
        delta2=float(np.mean(ratio < 1.25 ** 2)),
        delta3=float(np.mean(ratio < 1.25 ** 3)),
        valid_pixels=int(p.size),
    )
    try:
        report['ai1'], report['ai2'] = affine_invariant_metrics(p, g)
        report['spearman_term'] = spearman_term(p, g)
    except DegenerateFitError as e:
        logger.warning(f"Affine-invariant and rank metrics skipped: {e}")
    return DepthMetricReport(**report)


def psnr(pred, gt, cap: float = Config.PSNR_CAP) -> float:
    """PSNR in dB for images on the [0, 1] scale, capped for identical inputs"""
    mse = float(np.mean((np.asarray(pred, dtype=np.float64) - np.asarray(gt, dtype=np.float64)) ** 2))
    if mse == 0.0:
        return cap
    return min(10.0 * math.log10(1.0 / mse), cap)


def image_metrics(pred, gt) -> ImageMetricReport:
    """PSNR, SSIM (11x11 Gaussian window, sigma 1.5) and RMSE_rel in percent"""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction {pred.shape} and ground truth {gt.shape} differ")
    if pred.ndim == 3 and pred.shape[2] == 1:
        pred, gt = pred[..., 0], gt[..., 0]
    if min(gt.shape[:2]) < 11:
        raise ShapeError(f"SSIM needs at least 11x11 pixels, got {gt.shape[:2]}")

    ssim = structural_similarity(
        gt, pred,
        data_range=1.0,
        channel_axis=-1 if gt.ndim == 3 else None,
        gaussian_weights=True,
        sigma=1.5,
        use_sample_covariance=False,
        K1=0.01,
        K2=0.03,
    )
    rmse = math.sqrt(float(np.mean((pred - gt) ** 2)))
    return ImageMetricReport(
        psnr=psnr(pred, gt),
        ssim=float(np.clip(ssim, -1.0, 1.0)),
        rmse_rel=100.0 * rmse,
    )


def format_report(report) -> str:
    """key=value lines for any report model"""
    return "\n".join(f"{key}={format_value(value)}" for key, value in report.model_dump().items())


def format_value(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)
