#!/usr/bin/env python3
"""
Quick setup script - writes a .env, a camera file and a starter manifest
"""

import json
import os

from config import Config
from models import CameraConfig, CameraRanges, DatasetManifest, ManifestEntry


def print_banner():
    """Print setup banner"""
    print("="*60)
    print("🚀 DUAL-PIXEL TOOLKIT QUICK SETUP")
    print("="*60)
    print()


def create_env_file():
    """Create .env file if it doesn't exist"""
    if not os.path.exists('.env'):
        print("📝 Creating .env file...")
        with open('.env', 'w') as f:
            f.write("# Camera defaults (pixel units)\n")
            f.write(f"DPSIM_FOCAL_LENGTH={Config.FOCAL_LENGTH:g}\n")
            f.write(f"DPSIM_SENSOR_DISTANCE={Config.SENSOR_DISTANCE:g}\n")
            f.write(f"DPSIM_APERTURE_WIDTH={Config.APERTURE_WIDTH:g}\n")
            f.write(f"DPSIM_APERTURE_HEIGHT={Config.APERTURE_HEIGHT:g}\n")
            f.write("DPSIM_MAGNIFICATION_NORMALIZED=true\n")
            f.write("\n# Parallelism\n")
            f.write("DPSIM_WORKERS=1\n")
            f.write("\n# Logging Configuration\n")
            f.write("LOG_LEVEL=INFO\n")
            f.write("LOG_FILE=dpsim.log\n")

        print("✅ .env file created")
    else:
        print("✅ .env file already exists")


def create_camera_file():
    """Create camera.json with the default symmetric split aperture"""
    if not os.path.exists('camera.json'):
        print("📝 Creating camera.json...")
        cfg = CameraConfig.symmetric(
            f=Config.FOCAL_LENGTH,
            F=Config.SENSOR_DISTANCE,
            aperture_width=Config.APERTURE_WIDTH,
            aperture_height=Config.APERTURE_HEIGHT,
        )
        with open('camera.json', 'w') as f:
            f.write(cfg.model_dump_json(indent=2) + "\n")
        print("✅ camera.json created")
    else:
        print("✅ camera.json already exists")


def create_sample_manifest():
    """Create a manifest listing one RGB-D pair to be filled in"""
    if not os.path.exists('manifest.json'):
        print("📝 Creating manifest.json...")
        manifest = DatasetManifest(
            entries=[ManifestEntry(rgb='scenes/scene_0000.png', depth='scenes/scene_0000_depth.png',
                                   depth_scale=1.0)],
            camera_ranges=CameraRanges(),
            seed=0,
        )
        with open('manifest.json', 'w') as f:
            json.dump(manifest.model_dump(exclude_none=True), f, indent=2)
            f.write("\n")
        print("✅ manifest.json created")
    else:
        print("✅ manifest.json already exists")


def main():
    """Main setup function"""
    print_banner()

    print("This quick setup will:")
    print("1. Create .env configuration file")
    print("2. Create camera.json")
    print("3. Create a starter dataset manifest")
    print()

    create_env_file()
    create_camera_file()
    create_sample_manifest()

    print("\n" + "="*60)
    print("🎉 QUICK SETUP COMPLETE!")
    print("="*60)
    print("\nNext steps:")
    print("1. Edit camera.json (all lengths in pixels)")
    print("2. Inspect the blur geometry: python main.py --config camera.json psf 150 420 2100")
    print("3. Point manifest.json at your RGB-D images")
    print("4. Generate a dataset: python main.py dataset-gen --manifest manifest.json --out data/")


if __name__ == "__main__":
    main()
