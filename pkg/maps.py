"""
Per-pixel maps with a validity mask: depth, inverse depth and disparity
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import ShapeError


@dataclass
class PixelMap:
    """H x W float map; invalid pixels are carried by ``valid``, not by sentinel values"""
    values: np.ndarray
    valid: Optional[np.ndarray] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"{type(self).__name__} must be 2-D, got shape {self.values.shape}")
        if self.valid is None:
            self.valid = np.isfinite(self.values)
        self.valid = np.asarray(self.valid, dtype=bool) & np.isfinite(self.values)
        if self.valid.shape != self.values.shape:
            raise ShapeError(f"mask shape {self.valid.shape} does not match {self.values.shape}")

    @property
    def shape(self):
        return self.values.shape

    def filled(self, fill: float = 0.0) -> np.ndarray:
        """Values with invalid pixels replaced, for writing to disk"""
        return np.where(self.valid, self.values, fill)


class DepthMap(PixelMap):
    """Scene depth in pixel units"""

    def to_inverse(self) -> 'InverseDepthMap':
        valid = self.valid & (self.values > 0)
        with np.errstate(divide='ignore', invalid='ignore'):
            inv = np.where(valid, 1.0 / np.where(valid, self.values, 1.0), 0.0)
        return InverseDepthMap(inv, valid)


class InverseDepthMap(PixelMap):
    """Reciprocal depth 1/d; zero or negative entries are invalid"""

    def __post_init__(self):
        super().__post_init__()
        self.valid &= self.values > 0

    def to_depth(self) -> DepthMap:
        with np.errstate(divide='ignore', invalid='ignore'):
            depth = np.where(self.valid, 1.0 / np.where(self.valid, self.values, 1.0), np.nan)
        return DepthMap(depth, self.valid)


class DisparityMap(PixelMap):
    """Signed left-minus-right offset along Y, in pixels"""
