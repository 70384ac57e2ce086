"""
Integer 8x8 transform, dead-zone quantisation and zig-zag scan

Every decoder-side operation uses integer arithmetic only, so reconstructions
are bit-exact across platforms.
"""

from functools import lru_cache

import numpy as np

from lfcodec.models.bitstream import check_qp

BLOCK = 8

# 8-point core transform matrix (scaled DCT-II, row norm^2 = 2^15)
DCT8 = np.array(
    [
        [64, 64, 64, 64, 64, 64, 64, 64],
        [89, 75, 50, 18, -18, -50, -75, -89],
        [83, 36, -36, -83, -83, -36, 36, 83],
        [75, -18, -89, -50, 50, 89, 18, -75],
        [64, -64, -64, 64, 64, -64, -64, 64],
        [50, -89, 18, 75, -75, -18, 89, -50],
        [36, -83, 83, -36, -36, 83, -83, 36],
        [18, -50, 75, -89, 89, -75, 50, -18],
    ],
    dtype=np.int64,
)
_TRANSFORM_SHIFT = 15

# quantiser scales per qp % 6: forward in Q14, inverse in Q6
QUANT_SCALE = np.array([26214, 23302, 20560, 18396, 16384, 14564], dtype=np.int64)
LEVEL_SCALE = np.array([40, 45, 51, 57, 64, 72], dtype=np.int64)
_QUANT_SHIFT = 14

# dead-zone rounding offsets (fractions of a step)
INTRA_ROUNDING = 1.0 / 3.0
INTER_ROUNDING = 1.0 / 6.0


def quantizer_step(qp: int) -> float:
    """Quantisation step 2^((qp - 4) / 6)"""
    check_qp(qp)
    return 2.0 ** ((qp - 4) / 6.0)


def _round_shift(values: np.ndarray, shift: int) -> np.ndarray:
    return (values + (1 << (shift - 1))) >> shift


def forward_transform(blocks: np.ndarray) -> np.ndarray:
    """(N, 8, 8) integer residuals -> orthonormal-scale integer coefficients"""
    blocks = blocks.astype(np.int64)
    return _round_shift(DCT8 @ blocks @ DCT8.T, _TRANSFORM_SHIFT)


def inverse_transform(coefficients: np.ndarray) -> np.ndarray:
    coefficients = coefficients.astype(np.int64)
    return _round_shift(DCT8.T @ coefficients @ DCT8, _TRANSFORM_SHIFT)


def quantize(coefficients: np.ndarray, qp: int, intra: bool) -> np.ndarray:
    """Dead-zone uniform quantiser with step quantizer_step(qp)"""
    check_qp(qp)
    shift = _QUANT_SHIFT + qp // 6
    rounding = INTRA_ROUNDING if intra else INTER_ROUNDING
    offset = int(rounding * (1 << shift))
    magnitude = (np.abs(coefficients) * QUANT_SCALE[qp % 6] + offset) >> shift
    return np.sign(coefficients) * magnitude


def dequantize(levels: np.ndarray, qp: int) -> np.ndarray:
    check_qp(qp)
    scaled = levels.astype(np.int64) * (LEVEL_SCALE[qp % 6] << (qp // 6))
    return _round_shift(scaled, 6)


@lru_cache(maxsize=None)
def zigzag_order(size: int = BLOCK) -> np.ndarray:
    """Flat indices of a size x size block in JPEG zig-zag order"""
    cells = sorted(
        ((r, c) for r in range(size) for c in range(size)),
        key=lambda rc: (rc[0] + rc[1], rc[0] if (rc[0] + rc[1]) % 2 else rc[1]),
    )
    return np.array([r * size + c for r, c in cells], dtype=np.int64)


def to_blocks(plane: np.ndarray, size: int = BLOCK) -> np.ndarray:
    """(H, W) with H, W multiples of size -> (rows, cols, size, size)"""
    height, width = plane.shape
    return plane.reshape(height // size, size, width // size, size).transpose(0, 2, 1, 3)


def from_blocks(blocks: np.ndarray) -> np.ndarray:
    rows, cols, size, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(rows * size, cols * size)


def pad_to_blocks(planes: np.ndarray, size: int = BLOCK) -> np.ndarray:
    """Edge-pad (C, H, W) planes up to multiples of the block size"""
    _, height, width = planes.shape
    pad_h = (-height) % size
    pad_w = (-width) % size
    if pad_h == 0 and pad_w == 0:
        return planes
    return np.pad(planes, ((0, 0), (0, pad_h), (0, pad_w)), mode="edge")
