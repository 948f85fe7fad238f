import math

import numpy as np
import pytest
from pydantic import ValidationError

from errors import EmptyMaskError, ShapeError
from losses import compute_losses, depth_loss, reblur_loss, restoration_loss, smooth_l1
from maps import DepthMap, InverseDepthMap
from models import LossReport
from simulator import DpPair, RgbdImage, simulate_fast


def test_restoration_loss_examples(rng):
    target = rng.uniform(size=(16, 16, 3))
    assert restoration_loss(target, target) == 0.0
    assert restoration_loss(target + 0.5, target) == pytest.approx(0.5 * math.sqrt(3.0))

    pred = target.copy()
    pred[4, 9, 1] += 1.0
    assert restoration_loss(pred, target) == pytest.approx(1.0 / (16 * 16))


def test_restoration_loss_shape_mismatch():
    with pytest.raises(ShapeError):
        restoration_loss(np.zeros((4, 4, 3)), np.zeros((4, 5, 3)))


def test_smooth_l1_branches():
    x = np.array([0.0, 0.5, -0.5, 1.0, 2.0, -3.0])
    np.testing.assert_allclose(smooth_l1(x), [0.0, 0.125, 0.125, 0.5, 1.5, 2.5])


def test_depth_loss_examples():
    target = InverseDepthMap(np.full((6, 6), 0.01))
    assert depth_loss(target, target) == 0.0
    assert depth_loss(InverseDepthMap(np.full((6, 6), 0.51)), target) == pytest.approx(0.125)
    assert depth_loss(InverseDepthMap(np.full((6, 6), 2.01)), target) == pytest.approx(1.5)


def test_depth_loss_ignores_invalid_target_pixels():
    values = np.full((4, 4), 0.01)
    values[:2] = 0.0
    target = InverseDepthMap(values)
    pred = InverseDepthMap(np.where(target.valid, 0.51, 5.0))
    assert depth_loss(pred, target) == pytest.approx(0.125)


def test_depth_loss_errors():
    target = InverseDepthMap(np.zeros((4, 4)))
    with pytest.raises(EmptyMaskError):
        depth_loss(InverseDepthMap(np.ones((4, 4))), target)
    with pytest.raises(ShapeError):
        depth_loss(InverseDepthMap(np.ones((4, 5))), InverseDepthMap(np.ones((4, 4))))


def test_reblur_self_consistency(cfg, rng):
    depth = rng.uniform(300.0, 3000.0, size=(48, 48))
    sharp = rng.uniform(size=(48, 48, 3))
    observed = simulate_fast(RgbdImage(sharp, depth), cfg)
    assert reblur_loss(sharp, DepthMap(depth).to_inverse(), observed, cfg) < 1e-8


def test_reblur_detects_depth_error(cfg, rng):
    depth = rng.uniform(300.0, 1500.0, size=(48, 48))
    sharp = rng.uniform(size=(48, 48, 3))
    observed = simulate_fast(RgbdImage(sharp, depth), cfg)
    assert reblur_loss(sharp, DepthMap(1.1 * depth).to_inverse(), observed, cfg) > 0.0


def test_reblur_in_focus_equals_restoration(cfg, rng):
    sharp = rng.uniform(size=(32, 32, 3))
    observed_sharp = rng.uniform(size=(32, 32, 3))
    observed = DpPair(observed_sharp, observed_sharp * 0.5)
    inv = DepthMap(np.full((32, 32), 2100.0)).to_inverse()
    expected = 0.5 * (restoration_loss(sharp, observed.left) + restoration_loss(sharp, observed.right))
    assert reblur_loss(sharp, inv, observed, cfg) == pytest.approx(expected, rel=1e-9)


def test_reblur_minimum_at_true_depth(cfg, texture):
    sharp = texture(40, 40, 3)
    observed = simulate_fast(RgbdImage(sharp, np.full((40, 40), 420.0)), cfg)
    offsets = [-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2]
    losses = [reblur_loss(sharp, DepthMap(np.full((40, 40), 420.0 * (1 + o))).to_inverse(), observed, cfg)
              for o in offsets]
    assert int(np.argmin(losses)) == offsets.index(0.0)


def test_compute_losses_sums_components(cfg, rng):
    depth = rng.uniform(300.0, 3000.0, size=(24, 24))
    sharp = rng.uniform(size=(24, 24, 3))
    observed = simulate_fast(RgbdImage(sharp, depth), cfg)
    target_inv = DepthMap(depth).to_inverse()
    pred_inv = DepthMap(depth * 1.05).to_inverse()

    report = compute_losses(sharp + 0.1, pred_inv, observed, cfg,
                            target_sharp=sharp, target_inv_depth=target_inv)
    assert report.restoration == pytest.approx(0.1 * math.sqrt(3.0))
    assert report.depth > 0.0
    assert report.reblur > 0.0
    assert report.total == report.restoration + report.depth + report.reblur

    target_wired = compute_losses(sharp, pred_inv, observed, cfg, target_inv_depth=target_inv,
                                  reblur_depth='target')
    assert target_wired.reblur < 1e-8
    assert target_wired.restoration == 0.0


def test_compute_losses_without_targets(cfg, rng):
    sharp = rng.uniform(size=(16, 16))
    inv = DepthMap(np.full((16, 16), 2100.0)).to_inverse()
    observed = simulate_fast(RgbdImage(sharp, np.full((16, 16), 2100.0)), cfg)
    report = compute_losses(sharp, inv, observed, cfg)
    assert report.restoration == 0.0 and report.depth == 0.0
    assert report.reblur == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        compute_losses(sharp, inv, observed, cfg, reblur_depth='target')


def test_loss_report_invariants():
    report = LossReport.from_components(0.1, 0.2, 0.3)
    assert report.total == 0.1 + 0.2 + 0.3
    with pytest.raises(ValidationError):
        LossReport(restoration=0.1, depth=0.2, reblur=0.3, total=1.0)
    with pytest.raises(ValidationError):
        LossReport.from_components(-0.1, 0.2, 0.3)
