#!/usr/bin/env python3
"""
Command-line entry point for the dual-pixel toolkit

Subcommands: simulate, dataset-gen, depth, loss, metrics, psf.
Exit codes: 0 success, 1 runtime/data error, 2 usage error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

import dataset
import estimator
import losses
import metrics
import optics
from config import Config
from errors import DpSimError
from maps import DepthMap, InverseDepthMap
from models import CameraConfig, MatchConfig, SweepConfig
from simulator import DpPair, simulate_brute, simulate_fast

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Arguments are individually valid but do not fit together"""


def configure_logging(verbosity: int) -> None:
    level = getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO)
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if Config.LOG_FILE:
        handlers.append(logging.FileHandler(Config.LOG_FILE))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )


def resolve_camera(args) -> CameraConfig:
    if args.config:
        cfg = dataset.load_camera_config(args.config)
        logger.info(f"Camera from {args.config}: f={cfg.f:g} F={cfg.F:g}")
        return cfg
    cfg = dataset.default_camera()
    print(f"notice: no --config given; using defaults f={cfg.f:g} F={cfg.F:g} "
          f"aperture={Config.APERTURE_WIDTH:g}x{Config.APERTURE_HEIGHT:g} "
          f"magnification_normalized={cfg.magnification_normalized}")
    return cfg


def summary(**fields) -> None:
    """Single machine-parsable result line"""
    print("SUMMARY " + " ".join(f"{key}={metrics.format_value(value)}" for key, value in fields.items()))


def write_json(path: Optional[str], report) -> None:
    if path:
        Path(path).write_text(report.model_dump_json(indent=2) + "\n")


def cmd_simulate(args) -> int:
    cfg = resolve_camera(args)
    img = dataset.load_rgbd(args.rgb, args.depth, args.depth_scale)
    if args.brute:
        pair = simulate_brute(img, cfg)
    else:
        pair = simulate_fast(img, cfg, workers=args.workers)

    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    left_path = prefix.parent / f"{prefix.name}_left.png"
    right_path = prefix.parent / f"{prefix.name}_right.png"
    saturated = dataset.write_image(left_path, pair.left, args.bit_depth)
    saturated += dataset.write_image(right_path, pair.right, args.bit_depth)

    coverage = float(pair.stats.coverage.mean())
    print(f"wrote {left_path} and {right_path}")
    print(f"clipped_energy={pair.stats.clipped_energy:.6g} coverage={coverage:.4f} "
          f"negative_clamped={pair.stats.negative_clamped:.3g}")
    if saturated:
        print(f"warning: {saturated} sample value(s) above 1.0 were clipped in the PNG output")
    summary(command='simulate', clipped_energy=pair.stats.clipped_energy, coverage=coverage,
            masked_pixels=pair.stats.masked_pixels, saturated=saturated)
    return EXIT_OK


def cmd_dataset_gen(args) -> int:
    manifest, base_dir = dataset.load_manifest(args.manifest)
    if args.seed is not None:
        manifest = manifest.model_copy(update={'seed': args.seed})
    out_dir = Path(args.out)
    report = dataset.generate_dataset(manifest, base_dir, out_dir, workers=args.workers,
                                      bit_depth=args.bit_depth)
    if report.samples:
        (out_dir / 'report.json').write_text(report.model_dump_json(indent=2) + "\n")
    if report.failed:
        print(f"warning: {report.failed} entr{'y' if report.failed == 1 else 'ies'} failed; see report.json")
        for record in report.samples:
            if record.status == 'failed':
                print(f"  {record.name}: {record.error}")
    summary(command='dataset-gen', succeeded=report.succeeded, failed=report.failed,
            clipped_energy=report.total_clipped_energy)
    return EXIT_OK


def _load_gt_depth(args) -> DepthMap:
    gt = dataset.read_depth(args.gt) * args.gt_scale
    return DepthMap(gt, np.isfinite(gt) & (gt > 0))


def cmd_depth(args) -> int:
    if args.mode == 'sweep' and not args.sharp:
        raise UsageError("sweep mode needs --sharp")
    cfg = resolve_camera(args)
    observed = DpPair(dataset.read_image(args.left), dataset.read_image(args.right))

    if args.mode == 'sweep':
        sharp = dataset.read_image(args.sharp)
        near = args.near if args.near else 2.0 * cfg.f
        far = args.far if args.far else 4.0 * optics.in_focus_depth(cfg)
        sw = SweepConfig.uniform_inverse(near, far, args.hypotheses, args.window)
        depth = estimator.sweep_depth(sharp, observed, cfg, sw, workers=args.workers,
                                      texture_threshold=args.texture_threshold).depth
    else:
        mc = MatchConfig(max_disparity=args.max_disparity, block=args.block,
                         subpixel=not args.no_subpixel, texture_threshold=args.texture_threshold)
        disparity = estimator.block_match(observed, mc, workers=args.workers)
        if disparity.valid.any():
            print(f"median_disparity={float(np.median(disparity.values[disparity.valid])):.4f}")
        depth = estimator.disparity_to_depth_map(disparity, cfg)

    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    depth_path = prefix.parent / f"{prefix.name}_depth.pfm"
    mask_path = prefix.parent / f"{prefix.name}_mask.png"
    dataset.write_pfm(depth_path, depth.filled(0.0))
    dataset.write_mask(mask_path, depth.valid)
    print(f"wrote {depth_path} and {mask_path}")

    fields = dict(command='depth', mode=args.mode, valid=float(depth.valid.mean()))
    if args.gt:
        gt = _load_gt_depth(args)
        report = metrics.depth_metrics(depth, gt)
        print(metrics.format_report(report))
        write_json(args.json, report)
        fields.update(abs_rel=report.abs_rel, rmse=report.rmse, delta1=report.delta1)
    summary(**fields)
    return EXIT_OK


def cmd_loss(args) -> int:
    cfg = resolve_camera(args)
    sharp = dataset.read_image(args.sharp)
    inv = InverseDepthMap(dataset.read_depth(args.inv_depth))
    observed = DpPair(dataset.read_image(args.left), dataset.read_image(args.right))
    target_sharp = dataset.read_image(args.target_sharp) if args.target_sharp else None
    target_inv = InverseDepthMap(dataset.read_depth(args.target_inv_depth)) if args.target_inv_depth else None
    if args.reblur_depth == 'target' and target_inv is None:
        raise UsageError("--reblur-depth target needs --target-inv-depth")

    report = losses.compute_losses(sharp, inv, observed, cfg, target_sharp=target_sharp,
                                   target_inv_depth=target_inv, reblur_depth=args.reblur_depth,
                                   workers=args.workers)
    print(metrics.format_report(report))
    write_json(args.json, report)
    return EXIT_OK


def cmd_metrics(args) -> int:
    if args.kind == 'image':
        report = metrics.image_metrics(dataset.read_image(args.pred), dataset.read_image(args.gt))
    else:
        pred = dataset.read_depth(args.pred) * args.scale
        gt = dataset.read_depth(args.gt) * args.scale
        if args.inverse:
            pred = InverseDepthMap(pred).to_depth()
            gt = InverseDepthMap(gt).to_depth()
        mask = dataset.read_image(args.mask)[..., 0] > 0.5 if args.mask else None
        report = metrics.depth_metrics(pred, gt, mask)
    print(metrics.format_report(report))
    write_json(args.json, report)
    return EXIT_OK


def cmd_psf(args) -> int:
    cfg = resolve_camera(args)
    print(f"{'depth':>12} {'d_virtual':>12} {'scale':>10} {'extent_y':>10} {'extent_z':>10} {'disparity':>10}")
    print("-" * 70)
    invalid = 0
    for d in args.depths:
        try:
            d_prime = optics.virtual_depth(d, cfg)
            s = optics.scale_factor(d, cfg)
            ext_y, ext_z = optics.blur_size(d, cfg.aperture_left, cfg)
            disparity = optics.disparity_for_depth(d, cfg)
        except DpSimError as e:
            invalid += 1
            print(f"{d:>12.4f} invalid ({e})")
            continue
        print(f"{d:>12.4f} {d_prime:>12.4f} {s:>10.4f} {ext_y:>10.4f} {ext_z:>10.4f} {disparity:>10.4f}")
    summary(command='psf', rows=len(args.depths), invalid=invalid)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='dpsim',
        description="Dual-pixel simulation, depth estimation and evaluation toolkit",
    )
    parser.add_argument('--config', help="camera parameter JSON (pixel units)")
    parser.add_argument('--workers', type=int, default=Config.WORKERS,
                        help="worker threads (env DPSIM_WORKERS, default %(default)s)")
    parser.add_argument('--seed', type=int, default=None, help="override the manifest seed")
    parser.add_argument('-v', '--verbose', action='count', default=0)
    parser.add_argument('-q', '--quiet', action='count', default=0)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help="synthesise a DP pair from an RGB-D image")
    p.add_argument('--rgb', required=True)
    p.add_argument('--depth', required=True)
    p.add_argument('--depth-scale', type=float, default=1.0, help="stored depth to pixel units")
    p.add_argument('--out', required=True, help="output prefix; writes <prefix>_left/_right.png")
    p.add_argument('--brute', action='store_true', help="use the direct splatting reference")
    p.add_argument('--bit-depth', type=int, choices=(8, 16), default=Config.OUTPUT_BIT_DEPTH)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser('dataset-gen', help="generate a synthetic DP dataset from a manifest")
    p.add_argument('--manifest', required=True)
    p.add_argument('--out', required=True)
    p.add_argument('--bit-depth', type=int, choices=(8, 16), default=Config.OUTPUT_BIT_DEPTH)
    p.set_defaults(handler=cmd_dataset_gen)

    p = sub.add_parser('depth', help="estimate depth from a DP pair")
    p.add_argument('--left', required=True)
    p.add_argument('--right', required=True)
    p.add_argument('--sharp', help="sharp image (required for sweep)")
    p.add_argument('--mode', choices=('sweep', 'match'), default='sweep')
    p.add_argument('--out', required=True, help="output prefix; writes <prefix>_depth.pfm/_mask.png")
    p.add_argument('--gt', help="ground-truth depth for evaluation")
    p.add_argument('--gt-scale', type=float, default=1.0)
    p.add_argument('--json', help="also write the metric report as JSON")
    p.add_argument('--near', type=float, help="nearest sweep depth (default 2f)")
    p.add_argument('--far', type=float, help="farthest sweep depth (default 4x in-focus depth)")
    p.add_argument('--hypotheses', type=int, default=Config.SWEEP_HYPOTHESES)
    p.add_argument('--window', type=int, default=Config.SWEEP_WINDOW)
    p.add_argument('--max-disparity', type=int, default=Config.MATCH_MAX_DISPARITY)
    p.add_argument('--block', type=int, default=Config.MATCH_BLOCK)
    p.add_argument('--no-subpixel', action='store_true')
    p.add_argument('--texture-threshold', type=float, default=Config.TEXTURE_THRESHOLD)
    p.set_defaults(handler=cmd_depth)

    p = sub.add_parser('loss', help="evaluate restoration, depth and reblur losses")
    p.add_argument('--sharp', required=True, help="predicted sharp image")
    p.add_argument('--inv-depth', required=True, help="predicted inverse depth (PFM)")
    p.add_argument('--left', required=True)
    p.add_argument('--right', required=True)
    p.add_argument('--target-sharp')
    p.add_argument('--target-inv-depth')
    p.add_argument('--reblur-depth', choices=('predicted', 'target'), default='predicted')
    p.add_argument('--json')
    p.set_defaults(handler=cmd_loss)

    p = sub.add_parser('metrics', help="evaluate a depth map or a restored image")
    p.add_argument('--kind', choices=('depth', 'image'), required=True)
    p.add_argument('--pred', required=True)
    p.add_argument('--gt', required=True)
    p.add_argument('--mask', help="8-bit mask image, nonzero = evaluate")
    p.add_argument('--scale', type=float, default=1.0, help="depth scale applied to both maps")
    p.add_argument('--inverse', action='store_true', help="inputs are inverse depth maps")
    p.add_argument('--json')
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser('psf', help="print blur-region geometry per depth")
    p.add_argument('depths', type=float, nargs='+')
    p.set_defaults(handler=cmd_psf)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    configure_logging(args.verbose - args.quiet)

    if args.workers < 1:
        print("usage error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DpSimError, OSError, ValueError) as e:
        logger.error(f"❌ {args.command} failed: {e}")
        message = str(e).splitlines()[0] if str(e) else "no details"
        print(f"error: {type(e).__name__}: {message}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
