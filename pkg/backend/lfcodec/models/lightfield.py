"""
Light field containers: views, view grids, pseudo-sequences and GOP layouts
"""

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from lfcodec.core.exceptions import InconsistentDimensions, InvalidGrid, ShapeError


@dataclass(frozen=True)
class View:
    """One sub-aperture view stored as 8-bit YCbCr 4:4:4 planes, shape (3, H, W)"""

    planes: np.ndarray

    def __post_init__(self):
        planes = np.asarray(self.planes)
        if planes.ndim != 3 or planes.shape[0] != 3:
            raise ShapeError(f"View planes must have shape (3, H, W), got {planes.shape}")
        if planes.dtype != np.uint8:
            if planes.size and (planes.min() < 0 or planes.max() > 255):
                raise ShapeError("View samples must lie in [0, 255]")
            planes = planes.astype(np.uint8)
        planes = np.array(planes, copy=True)
        planes.setflags(write=False)
        object.__setattr__(self, "planes", planes)

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def luma(self) -> np.ndarray:
        return self.planes[0]

    def as_float(self) -> np.ndarray:
        """Planes scaled to [0, 1] for network input"""
        return self.planes.astype(np.float64) / 255.0

    @classmethod
    def from_float(cls, data: np.ndarray) -> "View":
        """Denormalize [0, 1] planes, rounding and clamping to 8 bits"""
        return cls(np.clip(np.rint(np.asarray(data) * 255.0), 0, 255).astype(np.uint8))

    def __eq__(self, other) -> bool:
        return isinstance(other, View) and np.array_equal(self.planes, other.planes)

    def __hash__(self) -> int:
        return hash(self.planes.tobytes())


@dataclass(frozen=True)
class LightField:
    """S x T grid of equally sized views in row-major order"""

    grid_s: int
    grid_t: int
    views: Tuple[View, ...]
    view_pitch: float = 1.0

    def __post_init__(self):
        if self.grid_s < 1 or self.grid_t < 1:
            raise InvalidGrid(f"Grid must be at least 1x1, got {self.grid_s}x{self.grid_t}")
        views = tuple(self.views)
        if len(views) != self.grid_s * self.grid_t:
            raise InvalidGrid(f"Expected {self.grid_s * self.grid_t} views, got {len(views)}")
        shapes = {view.planes.shape for view in views}
        if len(shapes) != 1:
            raise InconsistentDimensions(f"Views have differing shapes: {sorted(shapes)}")
        object.__setattr__(self, "views", views)

    @property
    def width(self) -> int:
        return self.views[0].width

    @property
    def height(self) -> int:
        return self.views[0].height

    @property
    def num_views(self) -> int:
        return len(self.views)

    def view(self, s: int, t: int) -> View:
        if not (0 <= s < self.grid_s and 0 <= t < self.grid_t):
            raise IndexError(f"View ({s}, {t}) outside {self.grid_s}x{self.grid_t} grid")
        return self.views[s * self.grid_t + t]

    def positions(self) -> Iterator[Tuple[int, int]]:
        for s in range(self.grid_s):
            for t in range(self.grid_t):
                yield s, t


@dataclass(frozen=True)
class PseudoSequence:
    """Frame order of a light field: (poc, s, t) triples"""

    order: Tuple[Tuple[int, int, int], ...]
    grid_s: int
    grid_t: int
    scan: str = "spiral"
    _poc_of: Dict[Tuple[int, int], int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        order = tuple(tuple(entry) for entry in self.order)
        cells = {(s, t) for _, s, t in order}
        if len(order) != self.grid_s * self.grid_t or len(cells) != len(order):
            raise InvalidGrid("Pseudo-sequence is not a permutation of the grid")
        if [poc for poc, _, _ in order] != list(range(len(order))):
            raise InvalidGrid("POC values must be consecutive from 0")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "_poc_of", {(s, t): poc for poc, s, t in order})

    def __len__(self) -> int:
        return len(self.order)

    def position(self, poc: int) -> Tuple[int, int]:
        _, s, t = self.order[poc]
        return s, t

    def poc_of(self, s: int, t: int) -> int:
        return self._poc_of[(s, t)]

    def frames(self, lightfield: LightField) -> List[View]:
        """Views of a light field in coding (POC) order"""
        return [lightfield.view(s, t) for _, s, t in self.order]

    def assemble(self, frames: Dict[int, View], view_pitch: float = 1.0) -> LightField:
        """Place POC-indexed frames back at their grid coordinates"""
        views = [frames[self.poc_of(s, t)] for s in range(self.grid_s) for t in range(self.grid_t)]
        return LightField(self.grid_s, self.grid_t, tuple(views), view_pitch)


@dataclass(frozen=True)
class GopLayout:
    """Temporal level of every POC for a hierarchical GOP structure"""

    gop_size: int
    level_of_poc: Dict[int, int]

    @property
    def num_frames(self) -> int:
        return len(self.level_of_poc)

    @property
    def max_level(self) -> int:
        return self.gop_size.bit_length() - 1

    def level(self, poc: int) -> int:
        return self.level_of_poc[poc]

    def pocs_at(self, level: int) -> List[int]:
        return [poc for poc, lvl in sorted(self.level_of_poc.items()) if lvl == level]

    def gop_index(self, poc: int) -> int:
        """GOP g owns the frames (g*G, (g+1)*G]; POC 0 belongs to GOP 0"""
        return 0 if poc == 0 else (poc - 1) // self.gop_size

    def num_gops(self) -> int:
        return max(1, self.gop_index(self.num_frames - 1) + 1)

    def gop_pocs(self, gop: int) -> List[int]:
        """Frames of one GOP, POC 0 included in the first"""
        start = gop * self.gop_size + (0 if gop == 0 else 1)
        stop = min((gop + 1) * self.gop_size, self.num_frames - 1)
        return list(range(start, stop + 1))
