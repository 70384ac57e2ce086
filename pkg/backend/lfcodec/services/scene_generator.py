"""
Synthetic light field generation from fronto-parallel textured layers

Stands in for captured datasets: every layer has a constant disparity, so the
ground-truth disparity of the center view is known exactly.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import structlog

from lfcodec.core.exceptions import DisparityOutOfRange, ShapeError
from lfcodec.models.lightfield import LightField, View
from lfcodec.utils.image_io import rgb_to_ycbcr

logger = structlog.get_logger()

MIN_DIMENSION = 16
_LATTICE = 64
_OCTAVES = ((8.0, 0.65), (3.0, 0.35))


@dataclass(frozen=True)
class LayerSpec:
    seed: int
    disparity: float


class TexturedLayer:
    """Periodic value-noise texture with an optional rectangular support"""

    def __init__(self, spec: LayerSpec, width: int, height: int, background: bool):
        rng = np.random.default_rng(spec.seed)
        self.disparity = float(spec.disparity)
        self.lattices = [rng.random((3, _LATTICE, _LATTICE)) for _ in _OCTAVES]
        self.base = rng.uniform(0.1, 0.3, size=3)
        self.gain = rng.uniform(0.5, 0.7, size=3)
        if background:
            self.rect = None
        else:
            x0 = rng.uniform(0.1, 0.5) * width
            y0 = rng.uniform(0.1, 0.5) * height
            self.rect = (x0, y0, x0 + rng.uniform(0.25, 0.45) * width, y0 + rng.uniform(0.25, 0.45) * height)

    def covers(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        if self.rect is None:
            return np.ones(np.broadcast(u, v).shape, dtype=bool)
        x0, y0, x1, y1 = self.rect
        return (u >= x0) & (u < x1) & (v >= y0) & (v < y1)

    def color(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """RGB values in [0, 255] at world coordinates, shape (3,) + u.shape"""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
        value = np.zeros((3,) + u.shape)
        for lattice, (cell, weight) in zip(self.lattices, _OCTAVES):
            gu, gv = u / cell, v / cell
            iu, iv = np.floor(gu), np.floor(gv)
            fu, fv = gu - iu, gv - iv
            iu0 = iu.astype(np.int64) % _LATTICE
            iv0 = iv.astype(np.int64) % _LATTICE
            iu1, iv1 = (iu0 + 1) % _LATTICE, (iv0 + 1) % _LATTICE
            top = lattice[:, iv0, iu0] * (1 - fu) + lattice[:, iv0, iu1] * fu
            bottom = lattice[:, iv1, iu0] * (1 - fu) + lattice[:, iv1, iu1] * fu
            value += weight * (top * (1 - fv) + bottom * fv)
        expand = (3,) + (1,) * u.ndim
        return 255.0 * (self.base.reshape(expand) + self.gain.reshape(expand) * value)


def center_position(grid_s: int, grid_t: int) -> Tuple[int, int]:
    return (grid_s + 1) // 2 - 1, (grid_t + 1) // 2 - 1


def build_layers(width: int, height: int, layers: Sequence[LayerSpec]) -> List[TexturedLayer]:
    """Back-to-front layer stack; the first layer is a full background"""
    return [TexturedLayer(spec, width, height, background=(i == 0)) for i, spec in enumerate(layers)]


def render_view(
    stack: Sequence[TexturedLayer], width: int, height: int, off_s: float, off_t: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Composite the stack seen from a view offset; returns (RGB float (H, W, 3), disparity)"""
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    rgb = np.zeros((3, height, width))
    disparity = np.zeros((height, width))
    for layer in stack:
        u = x + layer.disparity * off_t
        v = y + layer.disparity * off_s
        mask = layer.covers(u, v)
        rgb = np.where(mask[None], layer.color(u, v), rgb)
        disparity = np.where(mask, layer.disparity, disparity)
    return np.moveaxis(rgb, 0, -1), disparity


def generate_synthetic_lf(
    width: int,
    height: int,
    grid_s: int,
    grid_t: int,
    layers: Sequence[LayerSpec],
    noise: float = 0.0,
    noise_seed: int = 0,
) -> Tuple[LightField, np.ndarray]:
    """Render a layered scene on an S x T grid with known center disparity"""
    if width < MIN_DIMENSION or height < MIN_DIMENSION:
        raise ShapeError(f"Synthetic views must be at least {MIN_DIMENSION}x{MIN_DIMENSION}")
    if not layers:
        raise ValueError("At least one layer is required")
    for spec in layers:
        if abs(spec.disparity) > width / 4:
            raise DisparityOutOfRange(f"Disparity {spec.disparity} exceeds width/4 = {width / 4}")

    stack = build_layers(width, height, layers)
    center_s, center_t = center_position(grid_s, grid_t)

    views = []
    for s in range(grid_s):
        for t in range(grid_t):
            rgb, _ = render_view(stack, width, height, s - center_s, t - center_t)
            if noise > 0:
                rng = np.random.default_rng([noise_seed, s, t])
                rgb = rgb + rng.normal(0.0, noise, size=rgb.shape)
            rgb = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)
            views.append(View(rgb_to_ycbcr(rgb)))

    _, center_disparity = render_view(stack, width, height, 0.0, 0.0)
    logger.info(
        "Synthetic light field generated",
        width=width,
        height=height,
        grid_s=grid_s,
        grid_t=grid_t,
        layers=len(layers),
    )
    return LightField(grid_s, grid_t, tuple(views)), center_disparity.astype(np.float32)
