"""
Pseudo-sequence ordering and hierarchical GOP layout
"""

from typing import List, Optional, Tuple

import structlog

from lfcodec.core.exceptions import InvalidGop, InvalidGrid
from lfcodec.models.lightfield import GopLayout, PseudoSequence

logger = structlog.get_logger()

SCAN_CODES = {"spiral": 0, "raster": 1}
SCAN_NAMES = {code: name for name, code in SCAN_CODES.items()}

# right, down, left, up in (ds, dt)
_CLOCKWISE = ((0, 1), (1, 0), (0, -1), (-1, 0))


def spiral_scan(grid_s: int, grid_t: int) -> PseudoSequence:
    """Center-out clockwise spiral, first step to the right"""
    if grid_s < 1 or grid_t < 1:
        raise InvalidGrid(f"Grid must be at least 1x1, got {grid_s}x{grid_t}")

    total = grid_s * grid_t
    s, t = (grid_s + 1) // 2 - 1, (grid_t + 1) // 2 - 1
    cells = [(s, t)]
    arm, direction = 1, 0

    while len(cells) < total:
        # two arms per length: 1,1,2,2,3,3,...
        for _ in range(2):
            ds, dt = _CLOCKWISE[direction]
            for _ in range(arm):
                s, t = s + ds, t + dt
                if 0 <= s < grid_s and 0 <= t < grid_t:
                    cells.append((s, t))
            direction = (direction + 1) % 4
        arm += 1

    order = tuple((poc, s, t) for poc, (s, t) in enumerate(cells[:total]))
    return PseudoSequence(order, grid_s, grid_t, scan="spiral")


def raster_scan(grid_s: int, grid_t: int) -> PseudoSequence:
    """Row-major scan"""
    if grid_s < 1 or grid_t < 1:
        raise InvalidGrid(f"Grid must be at least 1x1, got {grid_s}x{grid_t}")
    order = tuple((s * grid_t + t, s, t) for s in range(grid_s) for t in range(grid_t))
    return PseudoSequence(order, grid_s, grid_t, scan="raster")


def scan_sequence(grid_s: int, grid_t: int, scan: str = "spiral") -> PseudoSequence:
    if scan == "spiral":
        return spiral_scan(grid_s, grid_t)
    if scan == "raster":
        return raster_scan(grid_s, grid_t)
    raise ValueError(f"Unknown scan order: {scan}")


def _check_gop(gop_size: int) -> int:
    if gop_size < 1 or gop_size & (gop_size - 1):
        raise InvalidGop(f"GOP size must be a power of two, got {gop_size}")
    return gop_size.bit_length() - 1


def temporal_level(poc: int, gop_size: int) -> int:
    """Temporal level of a POC in a dyadic hierarchical GOP"""
    depth = _check_gop(gop_size)
    if poc < 0:
        raise ValueError(f"POC must be non-negative, got {poc}")
    offset = poc % gop_size
    if offset == 0:
        return 0
    valuation = (offset & -offset).bit_length() - 1
    return depth - valuation


def build_gop_layout(num_frames: int, gop_size: int = 16) -> GopLayout:
    _check_gop(gop_size)
    levels = {poc: temporal_level(poc, gop_size) for poc in range(num_frames)}
    return GopLayout(gop_size=gop_size, level_of_poc=levels)


def coding_order(layout: GopLayout) -> List[int]:
    """POC 0, then each GOP sorted by (temporal level, POC)"""
    order = [0] if layout.num_frames else []
    for gop in range(layout.num_gops()):
        members = [poc for poc in layout.gop_pocs(gop) if poc != 0]
        order.extend(sorted(members, key=lambda poc: (layout.level(poc), poc)))
    return order


def reference_pocs(poc: int, layout: GopLayout) -> Tuple[Optional[int], Optional[int]]:
    """Nearest preceding and following frames of strictly lower level.

    Level-0 frames are intra coded and have no references. A missing side
    (end of a partial GOP) is returned as None.
    """
    level = layout.level(poc)
    if level == 0:
        return None, None

    backward = forward = None
    for candidate in range(poc - 1, max(-1, poc - layout.gop_size - 1), -1):
        if layout.level(candidate) < level:
            backward = candidate
            break
    for candidate in range(poc + 1, min(layout.num_frames, poc + layout.gop_size + 1)):
        if layout.level(candidate) < level:
            forward = candidate
            break
    return backward, forward


def dependent_pocs(poc: int, layout: GopLayout) -> List[int]:
    """Frames that use this POC as a prediction reference"""
    lo = max(0, poc - layout.gop_size)
    hi = min(layout.num_frames, poc + layout.gop_size + 1)
    return [other for other in range(lo, hi) if other != poc and poc in reference_pocs(other, layout)]
