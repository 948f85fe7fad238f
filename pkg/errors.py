"""
Exception hierarchy for the dual-pixel toolkit
"""


class DpSimError(Exception):
    """Base class for every error raised by the toolkit"""


class DomainError(DpSimError, ValueError):
    """A value lies outside the domain of the thin-lens model (e.g. depth <= f)"""


class RangeError(DpSimError, ValueError):
    """A disparity cannot be produced by any depth in (f, inf)"""


class ShapeError(DpSimError, ValueError):
    """Array dimensions disagree"""


class ShapeMismatchError(ShapeError):
    """RGB image and depth map have different sizes"""


class EmptyMaskError(DpSimError):
    """No valid pixels left to evaluate"""


class DegenerateFitError(DpSimError):
    """Input is constant on the mask, so a fit or rank correlation is undefined"""


class FormatError(DpSimError):
    """A file was read but its content is not a supported image/depth format"""


class ImageIOError(DpSimError, OSError):
    """A file is missing, unreadable or could not be written"""
