import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models import CameraConfig  # noqa: E402

IN_FOCUS_DEPTH = 2100.0


@pytest.fixture
def cfg():
    """f=100, F=105, 20x20 aperture split into two 10x20 halves; focus at d=2100"""
    return CameraConfig.symmetric(f=100.0, F=105.0, aperture_width=20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def texture():
    """Smooth random texture in [0.1, 0.9] with enough local variance for matching"""
    from scipy.ndimage import gaussian_filter

    def make(height, width, channels=None, seed=7, sigma=1.0):
        noise = np.random.default_rng(seed).uniform(size=(height, width) + ((channels,) if channels else ()))
        if sigma > 0:
            sigmas = (sigma, sigma, 0) if channels else sigma
            noise = gaussian_filter(noise, sigmas)
        lo, hi = noise.min(), noise.max()
        return 0.1 + 0.8 * (noise - lo) / (hi - lo)

    return make
