"""
Layered bitstream model and container format
"""

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Tuple, Union

from pydantic import BaseModel, Field, field_validator

from lfcodec.core.exceptions import CorruptStream, InvalidQp, VersionError

MAGIC = b"LFBS"
VERSION = 1

_HEADER = struct.Struct("<4sBHHBBBBB")
_UNIT = struct.Struct("<HBBBI")

# coded flag + temporal id + POC, as a real codec's unit header would cost
UNIT_SYNTAX_BITS = 16

MAX_QP = 51

# decoders pad references by this many samples
MAX_VECTOR = 64

# temporal ids 0..4
MAX_GOP_SIZE = 16


def check_gop_size(value: int) -> int:
    if value < 1 or value & (value - 1) or value > MAX_GOP_SIZE:
        raise ValueError(f"GOP size must be a power of two <= {MAX_GOP_SIZE}, got {value}")
    return value


class CodecConfig(BaseModel):
    """Parameters of the hierarchical pseudo-video codec"""

    qp: int = Field(28, ge=0, le=MAX_QP)
    gop_size: int = 16
    block_size: int = 8
    search_range: int = Field(8, ge=0, le=MAX_VECTOR)
    qp_offset_per_level: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4])
    lossless_bypass: bool = False
    scan: str = "spiral"

    @field_validator("gop_size")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        return check_gop_size(value)

    @field_validator("block_size")
    @classmethod
    def _fixed_block(cls, value: int) -> int:
        if value != 8:
            raise ValueError("Only 8x8 transform blocks are supported")
        return value

    @field_validator("scan")
    @classmethod
    def _known_scan(cls, value: str) -> str:
        if value not in ("spiral", "raster"):
            raise ValueError(f"Unknown scan order: {value}")
        return value

    def qp_for_level(self, level: int) -> int:
        """Base QP plus the level offset, clamped to [0, 51]"""
        offsets = self.qp_offset_per_level
        offset = offsets[min(level, len(offsets) - 1)] if offsets else 0
        return max(0, min(MAX_QP, self.qp + offset))

    @classmethod
    def from_settings(cls, settings, qp: int = None, **overrides) -> "CodecConfig":
        values = dict(
            qp=settings.qp_values[0] if qp is None else qp,
            gop_size=settings.GOP_SIZE,
            block_size=settings.BLOCK_SIZE,
            search_range=settings.SEARCH_RANGE,
            qp_offset_per_level=settings.qp_level_offsets,
            lossless_bypass=settings.LOSSLESS_BYPASS,
            scan=settings.SCAN,
        )
        values.update(overrides)
        return cls(**values)


def check_qp(qp: int) -> int:
    if not 0 <= qp <= MAX_QP:
        raise InvalidQp(f"QP must lie in [0, {MAX_QP}], got {qp}")
    return qp


@dataclass(frozen=True)
class Unit:
    """One coded (or dropped) view of the pseudo-sequence"""

    poc: int
    temporal_id: int
    coded_flag: bool
    qp: int
    payload: bytes = b""

    @property
    def bits(self) -> int:
        return UNIT_SYNTAX_BITS + 8 * len(self.payload)

    @classmethod
    def dropped(cls, poc: int, temporal_id: int, qp: int) -> "Unit":
        return cls(poc=poc, temporal_id=temporal_id, coded_flag=False, qp=qp, payload=b"")


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    grid_s: int
    grid_t: int
    gop_size: int
    base_qp: int
    scan: int
    version: int = VERSION

    @property
    def num_frames(self) -> int:
        return self.grid_s * self.grid_t


@dataclass(frozen=True)
class Bitstream:
    """Header plus units in coding order"""

    header: StreamHeader
    units: Tuple[Unit, ...] = field(default_factory=tuple)

    def unit_for(self, poc: int) -> Unit:
        for unit in self.units:
            if unit.poc == poc:
                return unit
        raise KeyError(poc)

    def dropped_pocs(self) -> List[int]:
        return sorted(unit.poc for unit in self.units if not unit.coded_flag)

    def with_units(self, units) -> "Bitstream":
        return replace(self, units=tuple(units))

    def to_bytes(self) -> bytes:
        h = self.header
        parts = [_HEADER.pack(MAGIC, h.version, h.width, h.height, h.grid_s, h.grid_t, h.gop_size, h.base_qp, h.scan)]
        for unit in self.units:
            parts.append(_UNIT.pack(unit.poc, unit.temporal_id, int(unit.coded_flag), unit.qp, len(unit.payload)))
            parts.append(unit.payload)
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Bitstream":
        if len(data) < _HEADER.size:
            raise CorruptStream("Stream shorter than its header")
        magic, version, width, height, grid_s, grid_t, gop_size, base_qp, scan = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise CorruptStream(f"Bad magic {magic!r}")
        if version != VERSION:
            raise VersionError(f"Unsupported bitstream version {version}")
        header = StreamHeader(width, height, grid_s, grid_t, gop_size, base_qp, scan, version)

        units = []
        offset = _HEADER.size
        while offset < len(data):
            if len(data) - offset < _UNIT.size:
                raise CorruptStream("Truncated unit header", poc=units[-1].poc if units else None)
            poc, temporal_id, coded_flag, qp, length = _UNIT.unpack_from(data, offset)
            offset += _UNIT.size
            payload = data[offset:offset + length]
            if len(payload) != length:
                raise CorruptStream("Truncated payload", poc=poc)
            if coded_flag not in (0, 1) or (not coded_flag and length):
                raise CorruptStream("Invalid coded flag", poc=poc)
            offset += length
            units.append(Unit(poc, temporal_id, bool(coded_flag), qp, payload))
        return cls(header, tuple(units))

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Bitstream":
        return cls.from_bytes(Path(path).read_bytes())


class RateReport(BaseModel):
    """Bit accounting of a stream restricted to a POC range"""

    poc_bits: Dict[int, int]
    level_bits: Dict[int, int]
    total_bits: int
    num_pixels: int
    bpp: float
    level_share: Dict[int, float]
