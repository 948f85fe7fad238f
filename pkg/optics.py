"""
Thin-lens geometry of a dual-pixel camera

Conventions used throughout the toolkit:

* Image coordinates are (y, z) = (column, row). The lens plane is X = 0, the
  sensor sits at X = F and a scene point imaged at (y, z) with depth d lies
  at -d(1, y/f, z/f).
* ``aperture_left`` / ``aperture_right`` are the two half-apertures. Which
  half feeds which stored image on a real Canon or Pixel sensor is not known
  here; "left" simply means the half with the smaller Y.
* Disparity is centre(left footprint) - centre(right footprint) along Y. With
  the default mirrored halves it is negative for points nearer than the
  in-focus plane (d' > F) and positive beyond it.
"""

import logging
from typing import NamedTuple, Tuple, Union

import numpy as np

from errors import DomainError, RangeError
from models import ApertureRect, BlurRegion, CameraConfig

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class RegionArrays(NamedTuple):
    """Footprints of many pixels at once; every field has the input's shape"""
    y_min: np.ndarray
    y_max: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray
    scale: np.ndarray
    area: np.ndarray


def _as_output(values: np.ndarray, like) -> ArrayLike:
    return float(values) if np.ndim(like) == 0 else values


def _check_depth(d: np.ndarray, cfg: CameraConfig) -> None:
    bad = ~np.isfinite(d) | (d <= cfg.f)
    if np.any(bad):
        example = d[bad].flat[0] if d.ndim else float(d)
        raise DomainError(
            f"depth must be finite and > f={cfg.f:g}; {int(np.count_nonzero(bad))} "
            f"value(s) violate this (e.g. {example:g})"
        )


def virtual_depth(d: ArrayLike, cfg: CameraConfig) -> ArrayLike:
    """Depth d' of the virtual-world image of a point at depth d (1/d + 1/d' = 1/f)"""
    d_arr = np.asarray(d, dtype=np.float64)
    _check_depth(d_arr, cfg)
    return _as_output(cfg.f * d_arr / (d_arr - cfg.f), d)


def scale_factor(d: ArrayLike, cfg: CameraConfig) -> ArrayLike:
    """Signed scale s' = (d' - F) / d' between aperture and footprint"""
    d_prime = np.asarray(virtual_depth(d, cfg))
    return _as_output((d_prime - cfg.F) / d_prime, d)


def in_focus_depth(cfg: CameraConfig) -> float:
    """Scene depth whose virtual image lands on the sensor, fF / (F - f)"""
    if cfg.F <= cfg.f:
        raise DomainError(f"no in-focus plane: sensor distance F={cfg.F:g} must exceed f={cfg.f:g}")
    return cfg.f * cfg.F / (cfg.F - cfg.f)


def sensor_distance_for_focus(f: float, focus_depth: float) -> float:
    """Sensor distance F that brings the plane at focus_depth into focus"""
    if not np.isfinite(focus_depth) or focus_depth <= f:
        raise DomainError(f"focus depth must be finite and > f={f:g}, got {focus_depth:g}")
    return f * focus_depth / (focus_depth - f)


def _inside(corner: Tuple[float, float], rect: ApertureRect) -> bool:
    y, z = corner
    return rect.y_min <= y <= rect.y_max and rect.z_min <= z <= rect.z_max


def scatter_point(pixel: Tuple[float, float], d: float, corner: Tuple[float, float],
                  cfg: CameraConfig) -> Tuple[float, float]:
    """Where the ray from a pixel's scene point through a lens-plane point hits the sensor"""
    if not (_inside(corner, cfg.aperture_left) or _inside(corner, cfg.aperture_right)):
        raise DomainError(f"lens point {corner} lies outside both half-apertures")
    s = scale_factor(d, cfg)
    y, z = pixel
    y0, z0 = corner
    if cfg.magnification_normalized:
        k = cfg.sensor_scale
        return (k * s * y0 + y, k * s * z0 + z)
    return (s * y0 + cfg.F * y / cfg.f, s * z0 + cfg.F * z / cfg.f)


def blur_regions(ys: np.ndarray, zs: np.ndarray, d: np.ndarray, aperture: ApertureRect,
                 cfg: CameraConfig) -> RegionArrays:
    """Vectorised footprints for pixel coordinates (ys, zs) at depths d.

    Each axis of the footprint is floored at one pixel when computing the
    area, so a point-like footprint deposits into exactly one pixel.
    """
    ys = np.asarray(ys, dtype=np.float64)
    zs = np.asarray(zs, dtype=np.float64)
    s = np.asarray(scale_factor(np.asarray(d, dtype=np.float64), cfg))

    if cfg.magnification_normalized:
        k = cfg.sensor_scale
        base_y, base_z = ys, zs
    else:
        k = 1.0
        base_y = cfg.F * ys / cfg.f
        base_z = cfg.F * zs / cfg.f

    # corners map to an affine image of the rectangle; a negative scale swaps them
    a = base_y + k * s * aperture.y_min
    b = base_y + k * s * aperture.y_max
    c = base_z + k * s * aperture.z_min
    e = base_z + k * s * aperture.z_max
    y_min, y_max = np.minimum(a, b), np.maximum(a, b)
    z_min, z_max = np.minimum(c, e), np.maximum(c, e)

    area = np.maximum(y_max - y_min, 1.0) * np.maximum(z_max - z_min, 1.0)
    return RegionArrays(y_min, y_max, z_min, z_max, s, area)


def blur_region(pixel: Tuple[float, float], d: float, aperture: ApertureRect,
                cfg: CameraConfig) -> BlurRegion:
    """Footprint of a single pixel through one half-aperture"""
    r = blur_regions(np.array(pixel[0]), np.array(pixel[1]), np.array(d), aperture, cfg)
    return BlurRegion(
        y_min=float(r.y_min), y_max=float(r.y_max),
        z_min=float(r.z_min), z_max=float(r.z_max),
        scale=float(r.scale), area=float(r.area),
    )


def blur_size(d: ArrayLike, aperture: ApertureRect, cfg: CameraConfig) -> Tuple[ArrayLike, ArrayLike]:
    """Footprint extents (along Y, along Z) before the one-pixel floor"""
    s = np.abs(np.asarray(scale_factor(d, cfg))) * cfg.sensor_scale
    return _as_output(s * aperture.width, d), _as_output(s * aperture.height, d)


def baseline(cfg: CameraConfig) -> float:
    """Disparity per unit scale: k * (c_L - c_R) along Y"""
    return cfg.sensor_scale * (cfg.aperture_left.centroid[0] - cfg.aperture_right.centroid[0])


def disparity_for_depth(d: ArrayLike, cfg: CameraConfig) -> ArrayLike:
    """Signed Y offset between the left and right footprints of a point at depth d"""
    return _as_output(np.asarray(scale_factor(d, cfg)) * baseline(cfg), d)


def invert_disparity(disparity: np.ndarray, cfg: CameraConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Depths for an array of disparities plus a mask of the attainable ones"""
    delta = np.asarray(disparity, dtype=np.float64)
    shape = delta.shape
    b = baseline(cfg)
    if b == 0.0:
        raise RangeError("half-aperture centroids coincide along Y; disparity carries no depth")
    u = np.atleast_1d(delta).ravel() / b
    # s' ranges over the open interval (1 - F/f, 1) as d sweeps (f, inf)
    ok = np.isfinite(u) & (u < 1.0) & (u > 1.0 - cfg.F / cfg.f)
    depth = np.full(u.shape, np.nan)
    with np.errstate(divide='ignore', invalid='ignore'):
        d_prime = cfg.F / (1.0 - u[ok])
        depth[ok] = cfg.f * d_prime / (d_prime - cfg.f)
    # rounding can land exactly on the boundary
    ok &= np.isfinite(depth) & (np.nan_to_num(depth, nan=0.0) > cfg.f)
    depth[~ok] = np.nan
    return depth.reshape(shape), ok.reshape(shape)


def depth_for_disparity(disparity: float, cfg: CameraConfig) -> float:
    """Scene depth producing the given disparity"""
    depth, ok = invert_disparity(np.asarray(disparity, dtype=np.float64), cfg)
    if not bool(ok):
        lo, hi = sorted((baseline(cfg) * (1.0 - cfg.F / cfg.f), baseline(cfg)))
        raise RangeError(
            f"disparity {disparity:g} px is unattainable; valid range is the open interval ({lo:g}, {hi:g})"
        )
    return float(depth)
