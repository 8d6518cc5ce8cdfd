"""Exception hierarchy shared by all mvmask modules."""


class MvmaskError(Exception):
    """Base class for all mvmask errors."""


class FormatError(MvmaskError, ValueError):
    """Malformed image file: bad magic, unsupported maxval, truncated payload."""


class OddDimensionError(MvmaskError, ValueError):
    """Image dimension not divisible by the downsampling factor."""


class ChannelError(MvmaskError, ValueError):
    """Operation received an image with the wrong channel count."""


class DimensionError(MvmaskError, ValueError):
    """Image too small for the requested patch grid."""


class DimensionMismatch(MvmaskError, ValueError):
    """Two objects that must share dimensions do not."""


class RangeError(MvmaskError, ValueError):
    """Scalar parameter outside its permitted range."""


class TruncationError(MvmaskError, ValueError):
    """Wire frame ends before its declared length."""


class VersionError(MvmaskError, ValueError):
    """Wire frame has an unknown magic or version byte."""


class EmptyFrameError(MvmaskError, ValueError):
    """Reconstruction method needs received pixels but the frame has none."""


class DegenerateCamera(MvmaskError, ValueError):
    """Camera's ground-plane mapping is not invertible."""


class BehindCamera(MvmaskError, ValueError):
    """Ground point projects behind the camera (non-positive depth)."""


class AtInfinity(MvmaskError, ValueError):
    """Pixel ray is parallel to the ground plane (no finite intersection)."""


class ConfigError(MvmaskError, ValueError):
    """Scenario or calibration file is syntactically or semantically invalid."""
