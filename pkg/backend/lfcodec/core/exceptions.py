"""
Exception hierarchy shared by every pipeline stage
"""

from typing import Optional


class LFCodecError(Exception):
    """Base class for all errors raised by the toolkit"""


# Light field container and sequencing

class InvalidGrid(LFCodecError):
    """Grid dimensions must both be at least one"""


class InvalidGop(LFCodecError):
    """GOP size is not a power of two"""


class MissingView(LFCodecError):
    """A view file of the grid does not exist"""

    def __init__(self, s: int, t: int, path: Optional[str] = None):
        self.s = s
        self.t = t
        self.path = path
        super().__init__(f"Missing view ({s}, {t})" + (f": {path}" if path else ""))


class InconsistentDimensions(LFCodecError):
    """Views of one light field do not share their dimensions"""


class FormatError(LFCodecError):
    """Input file cannot be decoded as a supported 8-bit image"""


class DisparityOutOfRange(LFCodecError):
    """Layer disparity exceeds the supported parallax"""


# Codec

class IllegalDrop(LFCodecError):
    """Only temporal levels 3 and 4 may be dropped"""


class BrokenReference(LFCodecError):
    """A coded frame references a dropped frame"""


class CorruptStream(LFCodecError):
    """Bitstream is malformed or truncated"""

    def __init__(self, message: str, poc: Optional[int] = None):
        self.poc = poc
        super().__init__(message if poc is None else f"{message} (poc {poc})")


class VersionError(LFCodecError):
    """Bitstream or model file version is not supported"""


class InvalidQp(LFCodecError):
    """QP outside [0, 51]"""


# Synthesis and training

class ShapeError(LFCodecError):
    """Array dimensions do not match"""


class NoReferences(LFCodecError):
    """Feature extraction needs reference views"""


class ModelShapeError(LFCodecError):
    """Network layer chain does not fit the requested configuration"""


class ModelFormatError(LFCodecError):
    """Model file is malformed or truncated"""


class DomainError(LFCodecError):
    """Argument outside the mathematical domain of the operation"""


class NumericalDivergence(LFCodecError):
    """Non-finite gradient encountered during training"""


class PatchTooLarge(LFCodecError):
    """Training patch does not fit inside the views"""


# Rate-distortion optimisation

class MissingReference(LFCodecError):
    """A reference required for evaluation is not available"""


class NoModelForQp(MissingReference):
    """No generator model is available for the requested QP"""

    def __init__(self, qp: int):
        self.qp = qp
        super().__init__(f"No generator model available for QP {qp}")


# Metrics

class NoOverlap(LFCodecError):
    """RD curves do not overlap on the integration axis"""


class DegenerateFit(LFCodecError):
    """RD curve cannot be fitted with a cubic polynomial"""
