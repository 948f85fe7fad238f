import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

class Config:
    """Configuration settings for the dual-pixel toolkit"""

    # Camera defaults (pixel units), used when no camera file is given
    FOCAL_LENGTH = float(os.getenv('DPSIM_FOCAL_LENGTH', '100'))
    SENSOR_DISTANCE = float(os.getenv('DPSIM_SENSOR_DISTANCE', '105'))
    APERTURE_WIDTH = float(os.getenv('DPSIM_APERTURE_WIDTH', '20'))
    APERTURE_HEIGHT = float(os.getenv('DPSIM_APERTURE_HEIGHT', '20'))
    MAGNIFICATION_NORMALIZED = os.getenv('DPSIM_MAGNIFICATION_NORMALIZED', 'true').lower() == 'true'

    # Parallelism
    WORKERS = int(os.getenv('DPSIM_WORKERS', '1'))

    # Estimators
    TEXTURE_THRESHOLD = float(os.getenv('DPSIM_TEXTURE_THRESHOLD', '1e-4'))
    SWEEP_HYPOTHESES = int(os.getenv('DPSIM_SWEEP_HYPOTHESES', '64'))
    SWEEP_WINDOW = int(os.getenv('DPSIM_SWEEP_WINDOW', '2'))
    MATCH_MAX_DISPARITY = int(os.getenv('DPSIM_MATCH_MAX_DISPARITY', '4'))
    MATCH_BLOCK = int(os.getenv('DPSIM_MATCH_BLOCK', '9'))

    # Metrics
    PSNR_CAP = 100.0

    # Dataset output
    OUTPUT_BIT_DEPTH = int(os.getenv('DPSIM_OUTPUT_BIT_DEPTH', '16'))

    # Logging Configuration
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', '')
