#!/usr/bin/env python3
"""
RGB-D ingestion, camera configuration files and bulk DP dataset generation
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Tuple, Union

import cv2
import numpy as np
from pydantic import ValidationError

import optics
from config import Config
from errors import DomainError, DpSimError, FormatError, ImageIOError, ShapeMismatchError
from maps import InverseDepthMap
from models import (CameraConfig, CameraRanges, DatasetManifest, GenerationReport, ManifestEntry,
                    SampleRecord, SampleSidecar)
from simulator import DpPair, RgbdImage, simulate_fast

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SAMPLE_FILES = {
    'left': 'left.png',
    'right': 'right.png',
    'sharp': 'sharp.png',
    'inv_depth': 'inv_depth.pfm',
    'sidecar': 'camera.json',
}


def _imread(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise ImageIOError(f"file not found: {path}")
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise FormatError(f"cannot decode image: {path}")
    return raw


def read_image(path: PathLike) -> np.ndarray:
    """8/16-bit PNG (gray, RGB or RGBA) as an HxWxC float array in [0, 1], RGB order"""
    raw = _imread(path)
    if raw.dtype == np.uint8:
        image = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        image = raw.astype(np.float64) / 65535.0
    else:
        raise FormatError(f"{path}: unsupported image sample type {raw.dtype}")
    if image.ndim == 2:
        return image[..., None]
    if image.shape[2] == 4:
        image = image[..., :3]
    if image.shape[2] != 3:
        raise FormatError(f"{path}: unsupported channel count {image.shape[2]}")
    return np.ascontiguousarray(image[..., ::-1])


def read_depth(path: PathLike) -> np.ndarray:
    """16-bit PNG or float PFM depth as an HxW float array (unscaled)"""
    raw = _imread(path)
    if raw.ndim == 3:
        if raw.shape[2] != 1 and not np.all(raw == raw[..., :1]):
            raise FormatError(f"{path}: depth must be single channel")
        raw = raw[..., 0]
    if raw.dtype not in (np.uint16, np.float32, np.float64):
        raise FormatError(f"{path}: unsupported depth sample type {raw.dtype}")
    return raw.astype(np.float64)


def write_image(path: PathLike, image: np.ndarray, bit_depth: int = 16) -> int:
    """Write an RGB or gray float image in [0, 1] as 8- or 16-bit PNG.

    Samples outside [0, 1] are clipped; returns how many were.
    """
    if bit_depth not in (8, 16):
        raise ValueError(f"bit depth must be 8 or 16, got {bit_depth}")
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[2] == 1:
        image = image[..., 0]
    if image.ndim == 3:
        image = image[..., ::-1]
    top = 65535 if bit_depth == 16 else 255
    dtype = np.uint16 if bit_depth == 16 else np.uint8
    saturated = int(np.count_nonzero((image < 0.0) | (image > 1.0)))
    encoded = np.floor(np.clip(image, 0.0, 1.0) * top + 0.5).astype(dtype)
    if not cv2.imwrite(str(path), np.ascontiguousarray(encoded)):
        raise ImageIOError(f"could not write image: {path}")
    return saturated


def write_pfm(path: PathLike, values: np.ndarray) -> None:
    """Write a single-channel float32 PFM"""
    if not cv2.imwrite(str(path), np.ascontiguousarray(values, dtype=np.float32)):
        raise ImageIOError(f"could not write PFM: {path}")


def write_mask(path: PathLike, mask: np.ndarray) -> None:
    if not cv2.imwrite(str(path), np.where(mask, 255, 0).astype(np.uint8)):
        raise ImageIOError(f"could not write mask: {path}")


def load_rgbd(rgb_path: PathLike, depth_path: PathLike, depth_scale: float = 1.0) -> RgbdImage:
    """Load an RGB-D pair; depth is scaled into pixel units and zero/NaN entries are masked"""
    if not depth_scale > 0:
        raise DomainError(f"depth scale must be > 0, got {depth_scale}")
    intensity = read_image(rgb_path)
    depth = read_depth(depth_path)
    if depth.shape != intensity.shape[:2]:
        raise ShapeMismatchError(
            f"rgb {intensity.shape[:2]} and depth {depth.shape} differ ({rgb_path}, {depth_path})"
        )
    depth = depth * depth_scale
    mask = np.isfinite(depth) & (depth > 0)
    logger.debug(f"Loaded {rgb_path}: {intensity.shape}, {int((~mask).sum())} missing depth pixel(s)")
    return RgbdImage(intensity, np.where(mask, depth, 0.0), mask)


def default_camera() -> CameraConfig:
    return CameraConfig.symmetric(
        f=Config.FOCAL_LENGTH,
        F=Config.SENSOR_DISTANCE,
        aperture_width=Config.APERTURE_WIDTH,
        aperture_height=Config.APERTURE_HEIGHT,
        magnification_normalized=Config.MAGNIFICATION_NORMALIZED,
    )


def load_camera_config(path: PathLike) -> CameraConfig:
    """Read a flat JSON camera file (explicit aperture rectangles or aperture_width/height)"""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ImageIOError(f"camera file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e
    try:
        if 'aperture_left' in data:
            return CameraConfig.model_validate(data)
        missing = [key for key in ('f', 'F', 'aperture_width') if key not in data]
        if missing:
            raise FormatError(f"{path}: missing camera field(s) {', '.join(missing)}")
        return CameraConfig.symmetric(
            f=data['f'],
            F=data['F'],
            aperture_width=data['aperture_width'],
            aperture_height=data.get('aperture_height'),
            magnification_normalized=data.get('magnification_normalized', True),
        )
    except ValidationError as e:
        raise DomainError(f"{path}: invalid camera parameters: {e}") from e


def save_camera_config(cfg: CameraConfig, path: PathLike) -> None:
    Path(path).write_text(cfg.model_dump_json(indent=2) + "\n")


def load_manifest(path: PathLike) -> Tuple[DatasetManifest, Path]:
    """Parse a manifest; returns it with the directory its relative paths resolve against"""
    path = Path(path)
    try:
        manifest = DatasetManifest.model_validate_json(path.read_text())
    except FileNotFoundError as e:
        raise ImageIOError(f"manifest not found: {path}") from e
    except ValidationError as e:
        raise FormatError(f"{path}: invalid manifest: {e}") from e
    return manifest, path.resolve().parent


def sample_camera(ranges: CameraRanges, seed: int, index: int,
                  img: RgbdImage) -> Tuple[CameraConfig, float, float]:
    """Draw (camera, focus depth, f-number) for one entry, deterministic in (seed, index)"""
    rng = np.random.default_rng([seed, index])
    f = float(rng.uniform(*ranges.focal_length))
    f_number = float(rng.uniform(*ranges.f_number))
    u = float(rng.uniform())

    usable = img.depth[img.mask & (img.depth > f)]
    if usable.size == 0:
        raise DomainError(f"every valid depth is <= f={f:g}; nothing to simulate")
    lo, hi = ranges.focus_depth if ranges.focus_depth else (float(usable.min()), float(usable.max()))
    focus = lo + u * (hi - lo)
    F = optics.sensor_distance_for_focus(f, focus)

    width = f / f_number
    cfg = CameraConfig.symmetric(f, F, width, width * ranges.aperture_aspect,
                                 magnification_normalized=ranges.magnification_normalized)
    return cfg, focus, f_number


def _generate_one(index: int, entry: ManifestEntry, manifest: DatasetManifest, base_dir: Path,
                  out_dir: Path, bit_depth: int) -> SampleRecord:
    name = f"sample_{index:05d}"
    try:
        img = load_rgbd(base_dir / entry.rgb, base_dir / entry.depth, entry.depth_scale)
        if entry.camera is not None:
            cfg = entry.camera
            focus = optics.in_focus_depth(cfg) if cfg.F > cfg.f else None
            f_number = None
        else:
            cfg, focus, f_number = sample_camera(manifest.camera_ranges, manifest.seed, index, img)

        too_near = img.mask & (img.depth <= cfg.f)
        if not (img.mask & ~too_near).any():
            raise DomainError(f"every valid depth is <= f={cfg.f:g}; nothing to simulate")
        if too_near.any():
            logger.warning(f"{name}: masking {int(too_near.sum())} pixel(s) with depth <= f")
            img = RgbdImage(img.intensity, img.depth, img.mask & ~too_near)

        pair = simulate_fast(img, cfg)

        sample_dir = out_dir / name
        sample_dir.mkdir(parents=True, exist_ok=True)
        # overlapping footprints can exceed 1; views are stored divided by the peak
        intensity_scale = max(1.0, float(pair.left.max(initial=0.0)), float(pair.right.max(initial=0.0)))
        if intensity_scale > 1.0:
            logger.debug(f"{name}: views peak at {intensity_scale:.4f}, stored normalised")
        saturated = write_image(sample_dir / SAMPLE_FILES['left'], pair.left / intensity_scale, bit_depth)
        saturated += write_image(sample_dir / SAMPLE_FILES['right'], pair.right / intensity_scale, bit_depth)
        saturated += write_image(sample_dir / SAMPLE_FILES['sharp'], img.intensity, bit_depth)
        if saturated:
            raise DomainError(f"{saturated} sample value(s) outside [0, 1] would be clipped on export")
        inv = np.zeros(img.depth.shape)
        inv[img.mask] = 1.0 / img.depth[img.mask]
        write_pfm(sample_dir / SAMPLE_FILES['inv_depth'], inv)

        sidecar = SampleSidecar(
            name=entry.name or name,
            index=index,
            rgb=entry.rgb,
            depth=entry.depth,
            depth_scale=entry.depth_scale,
            camera=cfg,
            focus_depth=focus,
            f_number=f_number,
            bit_depth=bit_depth,
            intensity_scale=intensity_scale,
            masked_pixels=pair.stats.masked_pixels,
            clipped_energy_left=pair.stats.clipped_left.tolist(),
            clipped_energy_right=pair.stats.clipped_right.tolist(),
        )
        (sample_dir / SAMPLE_FILES['sidecar']).write_text(sidecar.model_dump_json(indent=2) + "\n")
        logger.info(f"✓ {name}: f={cfg.f:.1f} F={cfg.F:.3f} focus={focus}")
        return SampleRecord(index=index, name=name, status='ok', sample_dir=name,
                            clipped_energy=pair.stats.clipped_energy)
    except (DpSimError, OSError, ValueError) as e:
        logger.error(f"❌ {name} ({entry.rgb}): {e}")
        return SampleRecord(index=index, name=name, status='failed', error=str(e))


def generate_dataset(manifest: DatasetManifest, base_dir: PathLike, out_dir: PathLike,
                     workers: int = 1, bit_depth: int = Config.OUTPUT_BIT_DEPTH) -> GenerationReport:
    """Simulate every manifest entry; per-entry failures are recorded, not raised"""
    if not manifest.entries:
        logger.info("Manifest has no entries; nothing generated")
        return GenerationReport()
    base_dir = Path(base_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def run(item):
        index, entry = item
        return _generate_one(index, entry, manifest, base_dir, out_dir, bit_depth)

    items = list(enumerate(manifest.entries))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, items))
    else:
        records = [run(item) for item in items]

    report = GenerationReport(samples=records)
    index_doc = {'samples': [r.sample_dir for r in records if r.status == 'ok']}
    (out_dir / 'index.json').write_text(json.dumps(index_doc, indent=2) + "\n")
    logger.info(f"Generated {report.succeeded}/{len(records)} samples ({report.failed} failed)")
    return report


@dataclass
class Sample:
    """A generated sample read back from disk"""
    sharp: np.ndarray
    inv_depth: InverseDepthMap
    pair: DpPair
    camera: CameraConfig
    sidecar: SampleSidecar


def load_sample(sample_dir: PathLike) -> Sample:
    sample_dir = Path(sample_dir)
    sidecar_path = sample_dir / SAMPLE_FILES['sidecar']
    try:
        sidecar = SampleSidecar.model_validate_json(sidecar_path.read_text())
    except FileNotFoundError as e:
        raise ImageIOError(f"sidecar not found: {sidecar_path}") from e
    except ValidationError as e:
        raise FormatError(f"{sidecar_path}: invalid sidecar: {e}") from e
    inv = read_depth(sample_dir / SAMPLE_FILES['inv_depth'])
    scale = sidecar.intensity_scale
    return Sample(
        sharp=read_image(sample_dir / SAMPLE_FILES['sharp']),
        inv_depth=InverseDepthMap(inv),
        pair=DpPair(scale * read_image(sample_dir / SAMPLE_FILES['left']),
                    scale * read_image(sample_dir / SAMPLE_FILES['right'])),
        camera=sidecar.camera,
        sidecar=sidecar,
    )


def list_samples(out_dir: PathLike) -> List[Path]:
    out_dir = Path(out_dir)
    index_path = out_dir / 'index.json'
    if not index_path.is_file():
        return []
    return [out_dir / name for name in json.loads(index_path.read_text())['samples']]
