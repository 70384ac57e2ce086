"""
Backward warping with bilinear sampling and its disparity gradient
"""

from typing import NamedTuple, Tuple, Union

import numpy as np

from lfcodec.core.exceptions import ShapeError
from lfcodec.models.lightfield import View


class WarpCache(NamedTuple):
    dx_dd: float
    dy_dd: float
    grad_x: np.ndarray
    grad_y: np.ndarray


def bilinear_warp(
    source: np.ndarray,
    disparity: Union[float, np.ndarray],
    delta: Tuple[float, float],
    origin: Tuple[int, int] = (0, 0),
    shape: Tuple[int, int] = None,
) -> Tuple[np.ndarray, WarpCache]:
    """Sample (C, H, W) source at p + origin + disparity(p) * (dt, ds).

    delta is the (ds, dt) offset from the source view to the target view.
    Coordinates clamp to the source borders; the disparity gradient is zero
    along a clamped axis.
    """
    channels, src_h, src_w = source.shape
    if shape is None:
        shape = np.shape(disparity) if np.ndim(disparity) == 2 else (src_h, src_w)
    height, width = shape
    disparity = np.broadcast_to(np.asarray(disparity, dtype=source.dtype), (height, width))

    ds, dt = delta
    ys, xs = np.mgrid[0:height, 0:width]
    sx = xs + origin[1] + disparity * dt
    sy = ys + origin[0] + disparity * ds

    cx = np.clip(sx, 0, src_w - 1)
    cy = np.clip(sy, 0, src_h - 1)
    x0 = np.floor(cx).astype(np.int64)
    y0 = np.floor(cy).astype(np.int64)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = (cx - x0).astype(source.dtype)
    fy = (cy - y0).astype(source.dtype)

    top_left = source[:, y0, x0]
    top_right = source[:, y0, x1]
    bottom_left = source[:, y1, x0]
    bottom_right = source[:, y1, x1]
    top = top_left + fx * (top_right - top_left)
    bottom = bottom_left + fx * (bottom_right - bottom_left)
    out = top + fy * (bottom - top)

    inside_x = ((sx > 0) & (sx < src_w - 1)).astype(source.dtype)
    inside_y = ((sy > 0) & (sy < src_h - 1)).astype(source.dtype)
    grad_x = ((1 - fy) * (top_right - top_left) + fy * (bottom_right - bottom_left)) * inside_x
    grad_y = (bottom - top) * inside_y
    return out, WarpCache(float(dt), float(ds), grad_x, grad_y)


def bilinear_warp_backward(cache: WarpCache, grad_out: np.ndarray) -> np.ndarray:
    """Gradient of the warped output w.r.t. the per-pixel disparity, shape (H, W)"""
    return (grad_out * (cache.grad_x * cache.dx_dd + cache.grad_y * cache.dy_dd)).sum(axis=0)


def warp_view(view: View, disparity: Union[float, np.ndarray], delta: Tuple[float, float]) -> View:
    """Backward-warp a view towards a target offset by delta = (ds, dt)"""
    if np.ndim(disparity) and np.shape(disparity) != (view.height, view.width):
        raise ShapeError(f"Disparity map {np.shape(disparity)} does not match view {view.height}x{view.width}")
    warped, _ = bilinear_warp(view.planes.astype(np.float64), disparity, delta)
    return View(np.clip(np.rint(warped), 0, 255).astype(np.uint8))
