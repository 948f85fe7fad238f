import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ApertureRect(BaseModel):
    """Axis-aligned rectangle in the lens plane (Y, Z), pixel units"""
    model_config = ConfigDict(frozen=True)

    y_min: float
    y_max: float
    z_min: float
    z_max: float

    @model_validator(mode='after')
    def check_extent(self):
        values = (self.y_min, self.y_max, self.z_min, self.z_max)
        if not all(math.isfinite(v) for v in values):
            raise ValueError("aperture corners must be finite")
        if self.y_max <= self.y_min or self.z_max <= self.z_min:
            raise ValueError(f"aperture rectangle is empty or degenerate: {values}")
        return self

    @property
    def width(self) -> float:
        return self.y_max - self.y_min

    @property
    def height(self) -> float:
        return self.z_max - self.z_min

    @property
    def centroid(self) -> Tuple[float, float]:
        return (0.5 * (self.y_min + self.y_max), 0.5 * (self.z_min + self.z_max))

    def corners(self) -> List[Tuple[float, float]]:
        """Corners in top-left, top-right, bottom-left, bottom-right order"""
        return [
            (self.y_min, self.z_min),
            (self.y_max, self.z_min),
            (self.y_min, self.z_max),
            (self.y_max, self.z_max),
        ]


class CameraConfig(BaseModel):
    """Thin-lens and dual-pixel sensor parameters, all lengths in pixel units"""
    model_config = ConfigDict(frozen=True)

    f: float = Field(description="focal length of the lens")
    F: float = Field(description="lens-to-sensor distance")
    aperture_left: ApertureRect
    aperture_right: ApertureRect
    magnification_normalized: bool = True

    @field_validator('f', 'F')
    @classmethod
    def check_positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"must be finite and > 0, got {value}")
        return value

    @classmethod
    def symmetric(cls, f: float, F: float, aperture_width: float,
                  aperture_height: Optional[float] = None,
                  magnification_normalized: bool = True) -> 'CameraConfig':
        """Split a width x height aperture into mirrored left/right halves"""
        height = aperture_width if aperture_height is None else aperture_height
        half_w = 0.5 * aperture_width
        half_h = 0.5 * height
        return cls(
            f=f,
            F=F,
            aperture_left=ApertureRect(y_min=-half_w, y_max=0.0, z_min=-half_h, z_max=half_h),
            aperture_right=ApertureRect(y_min=0.0, y_max=half_w, z_min=-half_h, z_max=half_h),
            magnification_normalized=magnification_normalized,
        )

    @property
    def sensor_scale(self) -> float:
        """Factor applied to sensor coordinates (f/F when normalised)"""
        return self.f / self.F if self.magnification_normalized else 1.0


class BlurRegion(BaseModel):
    """Footprint of one pixel on the sensor for one half-aperture"""
    model_config = ConfigDict(frozen=True)

    y_min: float
    y_max: float
    z_min: float
    z_max: float
    scale: float
    # max(dy, 1) * max(dz, 1): each axis floored at one pixel, so a 0.52 x 1.05 footprint
    # has area 1.05 rather than max(dy * dz, 1) = 1; this is the box actually deposited
    area: float = Field(description="deposit area in pixels, each extent floored at one pixel")

    @model_validator(mode='after')
    def check_ordering(self):
        if self.y_min > self.y_max or self.z_min > self.z_max:
            raise ValueError("blur region corners are not normalised")
        if self.area < 1.0:
            raise ValueError(f"blur region area must be >= 1, got {self.area}")
        return self

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.y_min + self.y_max), 0.5 * (self.z_min + self.z_max))


class LossReport(BaseModel):
    """Model for the summed training objective L = L_res + L_d + L_reb"""
    restoration: float = Field(ge=0.0)
    depth: float = Field(ge=0.0)
    reblur: float = Field(ge=0.0)
    total: float = Field(ge=0.0)

    @classmethod
    def from_components(cls, restoration: float, depth: float, reblur: float) -> 'LossReport':
        return cls(restoration=restoration, depth=depth, reblur=reblur,
                   total=restoration + depth + reblur)

    @model_validator(mode='after')
    def check_total(self):
        if self.total != self.restoration + self.depth + self.reblur:
            raise ValueError("total must equal restoration + depth + reblur")
        return self


class DepthMetricReport(BaseModel):
    """Model for depth-map evaluation results"""
    abs_rel: float = Field(ge=0.0)
    sq_rel: float = Field(ge=0.0)
    rmse: float = Field(ge=0.0)
    rmse_log: float = Field(ge=0.0)
    delta1: float = Field(ge=0.0, le=1.0)
    delta2: float = Field(ge=0.0, le=1.0)
    delta3: float = Field(ge=0.0, le=1.0)
    # None when the prediction is constant on the mask
    ai1: Optional[float] = None
    ai2: Optional[float] = None
    spearman_term: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    valid_pixels: int = 0

    @model_validator(mode='after')
    def check_deltas(self):
        if not self.delta1 <= self.delta2 <= self.delta3:
            raise ValueError("delta inlier ratios must be non-decreasing")
        return self


class ImageMetricReport(BaseModel):
    """Model for restored-image evaluation results"""
    psnr: float
    ssim: float = Field(ge=-1.0, le=1.0)
    rmse_rel: float = Field(ge=0.0, description="RMSE in percent of full scale")


class SweepConfig(BaseModel):
    """Depth hypotheses and residual window for the plane sweep"""
    hypotheses: List[float]
    window: int = Field(default=2, ge=0, description="aggregation radius in pixels")

    @field_validator('hypotheses')
    @classmethod
    def check_increasing(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one depth hypothesis is required")
        if any(not math.isfinite(v) for v in value):
            raise ValueError("hypotheses must be finite")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("hypotheses must be strictly increasing")
        return value

    @classmethod
    def uniform_inverse(cls, near: float, far: float, count: int, window: int = 2) -> 'SweepConfig':
        """Hypotheses spaced uniformly in inverse depth between near and far"""
        if not 0 < near < far:
            raise ValueError(f"need 0 < near < far, got near={near}, far={far}")
        if count < 2:
            raise ValueError("need at least two hypotheses")
        inv_near, inv_far = 1.0 / near, 1.0 / far
        step = (inv_near - inv_far) / (count - 1)
        depths = [1.0 / (inv_near - i * step) for i in range(count)]
        depths[0], depths[-1] = near, far
        return cls(hypotheses=depths, window=window)


class MatchConfig(BaseModel):
    """Block matching parameters for the tiny dual-pixel baseline"""
    max_disparity: int = Field(default=4, ge=1)
    block: int = Field(default=9, ge=3)
    subpixel: bool = True
    texture_threshold: float = Field(default=1e-4, ge=0.0)

    @field_validator('block')
    @classmethod
    def check_odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError(f"block size must be odd, got {value}")
        return value


class CameraRanges(BaseModel):
    """Sampling ranges for randomised camera parameters"""
    focal_length: Tuple[float, float] = (1500.0, 3000.0)
    f_number: Tuple[float, float] = (4.0, 22.0)
    aperture_aspect: float = Field(default=1.0, gt=0.0, description="height / width of the full aperture")
    # None selects the focus-in-scene policy
    focus_depth: Optional[Tuple[float, float]] = None
    magnification_normalized: bool = True

    @field_validator('focal_length', 'f_number', 'focus_depth')
    @classmethod
    def check_range(cls, value):
        if value is None:
            return value
        lo, hi = value
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo <= 0 or hi < lo:
            raise ValueError(f"invalid range {value}")
        return value


class ManifestEntry(BaseModel):
    """One RGB-D source image; paths are relative to the manifest"""
    rgb: str
    depth: str
    depth_scale: float = Field(default=1.0, gt=0.0)
    name: Optional[str] = None
    camera: Optional[CameraConfig] = None


class DatasetManifest(BaseModel):
    """Model for a dataset generation request"""
    entries: List[ManifestEntry] = Field(default_factory=list)
    camera_ranges: CameraRanges = Field(default_factory=CameraRanges)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)


class SampleSidecar(BaseModel):
    """Per-sample record of the exact parameters used to synthesise it"""
    name: str
    index: int
    rgb: str
    depth: str
    depth_scale: float
    camera: CameraConfig
    # None when the sensor sits at or inside f and nothing is in focus
    focus_depth: Optional[float] = None
    f_number: Optional[float] = None
    bit_depth: int
    # left/right PNGs hold view / intensity_scale
    intensity_scale: float = Field(default=1.0, ge=1.0)
    masked_pixels: int
    clipped_energy_left: List[float]
    clipped_energy_right: List[float]


class SampleRecord(BaseModel):
    """Model for one entry's generation result"""
    index: int
    name: str
    status: Literal['ok', 'failed']
    error: Optional[str] = None
    sample_dir: Optional[str] = None
    clipped_energy: float = 0.0


class GenerationReport(BaseModel):
    """Model for a dataset generation run"""
    samples: List[SampleRecord] = Field(default_factory=list)

    @property
    def succeeded(self) -> int:
        return sum(1 for s in self.samples if s.status == 'ok')

    @property
    def failed(self) -> int:
        return sum(1 for s in self.samples if s.status == 'failed')

    @property
    def total_clipped_energy(self) -> float:
        return sum(s.clipped_energy for s in self.samples)
