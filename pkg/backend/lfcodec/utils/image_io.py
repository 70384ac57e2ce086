"""
Image I/O and colour conversion utilities
"""

import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np
import structlog
from PIL import Image, UnidentifiedImageError

from lfcodec.core.exceptions import FormatError, InconsistentDimensions, MissingView
from lfcodec.models.lightfield import LightField, View

logger = structlog.get_logger()

VIEW_TEMPLATE = "view_{s:02}_{t:02}.ppm"
DISPARITY_FILE = "disparity.lfdm"
DISPARITY_MAGIC = b"LFDM\x00\x00\x00\x00"

# 8-bit modes Pillow can turn into RGB without losing precision
_SUPPORTED_MODES = {"RGB", "L", "P", "RGBA", "CMYK", "YCbCr"}


def rgb_to_ycbcr(rgb: np.ndarray) -> np.ndarray:
    """BT.601 full-range conversion, (H, W, 3) RGB -> (3, H, W) YCbCr uint8"""
    rgb = rgb.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b
    planes = np.stack([y, cb, cr])
    return np.clip(np.rint(planes), 0, 255).astype(np.uint8)


def ycbcr_to_rgb(planes: np.ndarray) -> np.ndarray:
    """Inverse of rgb_to_ycbcr, (3, H, W) -> (H, W, 3) uint8"""
    y, cb, cr = (planes[i].astype(np.float64) for i in range(3))
    r = y + 1.402 * (cr - 128.0)
    g = y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0)
    b = y + 1.772 * (cb - 128.0)
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(rgb), 0, 255).astype(np.uint8)


def read_view(path: Union[str, Path]) -> View:
    """Decode one image file into a YCbCr view"""
    try:
        with Image.open(path) as image:
            if image.mode not in _SUPPORTED_MODES:
                raise FormatError(f"Unsupported image mode {image.mode}: {path}")
            rgb = np.asarray(image.convert("RGB"))
    except UnidentifiedImageError as e:
        raise FormatError(f"Cannot decode image {path}") from e
    return View(rgb_to_ycbcr(rgb))


def write_view(view: View, path: Union[str, Path]) -> None:
    """Write a view as binary PPM (P6)"""
    Image.fromarray(ycbcr_to_rgb(view.planes)).save(path, format="PPM")


def load_lightfield(path_pattern: str, grid_s: int, grid_t: int, view_pitch: float = 1.0) -> LightField:
    """Load an S x T grid of views from a file template with {s} and {t} fields"""
    views = []
    shape = None
    for s in range(grid_s):
        for t in range(grid_t):
            path = Path(path_pattern.format(s=s, t=t))
            if not path.exists():
                logger.error("View file missing", s=s, t=t, path=str(path))
                raise MissingView(s, t, str(path))
            view = read_view(path)
            if shape is None:
                shape = view.planes.shape
            elif view.planes.shape != shape:
                raise InconsistentDimensions(
                    f"View ({s}, {t}) is {view.width}x{view.height}, expected {shape[2]}x{shape[1]}"
                )
            views.append(view)

    logger.info("Light field loaded", pattern=path_pattern, grid_s=grid_s, grid_t=grid_t)
    return LightField(grid_s, grid_t, tuple(views), view_pitch)


def discover_grid(directory: Union[str, Path]) -> Tuple[int, int]:
    """Infer the grid size from view_SS_TT.ppm files in a directory"""
    cells = []
    for path in Path(directory).glob("view_*_*.ppm"):
        try:
            _, s, t = path.stem.split("_")
            cells.append((int(s), int(t)))
        except ValueError:
            continue
    if not cells:
        raise FormatError(f"No view files found in {directory}")
    return max(s for s, _ in cells) + 1, max(t for _, t in cells) + 1


def load_lightfield_dir(directory: Union[str, Path]) -> LightField:
    grid_s, grid_t = discover_grid(directory)
    return load_lightfield(str(Path(directory) / VIEW_TEMPLATE), grid_s, grid_t)


def save_lightfield(lightfield: LightField, directory: Union[str, Path]) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for s, t in lightfield.positions():
        write_view(lightfield.view(s, t), directory / VIEW_TEMPLATE.format(s=s, t=t))
    logger.info("Light field written", directory=str(directory), views=lightfield.num_views)
    return directory


def write_disparity_map(disparity: np.ndarray, path: Union[str, Path]) -> None:
    """Little-endian float32 map behind an 8-byte magic and u32 width/height"""
    height, width = disparity.shape
    with open(path, "wb") as handle:
        handle.write(DISPARITY_MAGIC)
        handle.write(struct.pack("<II", width, height))
        handle.write(np.ascontiguousarray(disparity, dtype="<f4").tobytes())


def read_disparity_map(path: Union[str, Path]) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:8] != DISPARITY_MAGIC:
        raise FormatError(f"Not a disparity map file: {path}")
    width, height = struct.unpack("<II", data[8:16])
    body = data[16:]
    if len(body) != 4 * width * height:
        raise FormatError(f"Disparity map truncated: {path}")
    return np.frombuffer(body, dtype="<f4").reshape(height, width).astype(np.float32)
