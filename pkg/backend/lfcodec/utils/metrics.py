"""
Quality and coding-efficiency metrics
"""

import math
from pathlib import Path
from typing import Dict, List, NamedTuple, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import BaseModel, field_validator

from lfcodec.core.exceptions import DegenerateFit, NoOverlap, ShapeError
from lfcodec.models.lightfield import View

PEAK = 255.0
INF_PSNR = float("inf")

SSIM_WINDOW = 8
SSIM_C1 = (0.01 * PEAK) ** 2
SSIM_C2 = (0.03 * PEAK) ** 2

CURVE_COLUMNS = ["rate_bpp", "quality", "ssim", "qp"]


class PlanePsnr(NamedTuple):
    y: float
    cb: float
    cr: float

    @property
    def luma(self) -> float:
        return self.y


def _check_shapes(a: View, b: View) -> None:
    if a.planes.shape != b.planes.shape:
        raise ShapeError(f"View shapes differ: {a.planes.shape} vs {b.planes.shape}")


def plane_mse(a: View, b: View) -> np.ndarray:
    """Mean squared error of each of the three planes"""
    _check_shapes(a, b)
    diff = a.planes.astype(np.float64) - b.planes.astype(np.float64)
    return np.mean(diff * diff, axis=(1, 2))


def psnr_from_mse(mse: float) -> float:
    """10 log10(255^2 / MSE); zero MSE maps to +inf"""
    if mse <= 0:
        return INF_PSNR
    return 10.0 * math.log10(PEAK * PEAK / mse)


def psnr(a: View, b: View) -> PlanePsnr:
    return PlanePsnr(*(psnr_from_mse(float(mse)) for mse in plane_mse(a, b)))


def ssim(a: View, b: View) -> float:
    """Mean luma SSIM over all 8x8 uniform windows"""
    _check_shapes(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise ShapeError(f"SSIM needs views of at least {SSIM_WINDOW}x{SSIM_WINDOW}")

    wa = sliding_window_view(a.luma.astype(np.float64), (SSIM_WINDOW, SSIM_WINDOW))
    wb = sliding_window_view(b.luma.astype(np.float64), (SSIM_WINDOW, SSIM_WINDOW))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a * mu_a
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b * mu_b
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b

    numerator = (2 * mu_a * mu_b + SSIM_C1) * (2 * cov + SSIM_C2)
    denominator = (mu_a * mu_a + mu_b * mu_b + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(numerator / denominator))


def lightfield_psnr(originals: Sequence[View], reconstructed: Sequence[View]) -> float:
    """Luma PSNR of the pooled MSE over all views"""
    if len(originals) != len(reconstructed):
        raise ShapeError(f"View counts differ: {len(originals)} vs {len(reconstructed)}")
    pooled = float(np.mean([plane_mse(a, b)[0] for a, b in zip(originals, reconstructed)]))
    return psnr_from_mse(pooled)


# Bjontegaard deltas

class RdCurve(BaseModel):
    """Rate (bpp) / quality points of one configuration"""

    points: List[Tuple[float, float]]
    label: str = ""

    @field_validator("points")
    @classmethod
    def _valid_points(cls, points: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
        for rate, quality in points:
            if not rate > 0:
                raise ValueError(f"Rates must be positive, got {rate}")
            if not math.isfinite(quality):
                raise ValueError(f"Qualities must be finite, got {quality}")
        points = sorted(points)
        for (rate, _), (following, _) in zip(points, points[1:]):
            if following == rate:
                raise ValueError(f"Rates must be distinct, got {rate} twice")
        return points

    @property
    def rates(self) -> np.ndarray:
        return np.array([rate for rate, _ in self.points])

    @property
    def qualities(self) -> np.ndarray:
        return np.array([quality for _, quality in self.points])


def _fit(x: np.ndarray, y: np.ndarray, label: str, axis: str) -> np.ndarray:
    if len(x) < 4:
        raise DegenerateFit(f"{label}: a cubic fit needs at least 4 points, got {len(x)}")
    if len(np.unique(x)) != len(x):
        raise DegenerateFit(f"{label}: duplicate {axis} values")
    return np.polyfit(x, y, 3)


def _average_gap(anchor_x, anchor_y, test_x, test_y, anchor_label: str, test_label: str, axis: str) -> float:
    anchor_poly = _fit(anchor_x, anchor_y, anchor_label, axis)
    test_poly = _fit(test_x, test_y, test_label, axis)

    low = max(anchor_x.min(), test_x.min())
    high = min(anchor_x.max(), test_x.max())
    if low >= high:
        raise NoOverlap(f"Curves {anchor_label!r} and {test_label!r} do not overlap in {axis}")

    anchor_int = np.polyint(anchor_poly)
    test_int = np.polyint(test_poly)
    anchor_area = np.polyval(anchor_int, high) - np.polyval(anchor_int, low)
    test_area = np.polyval(test_int, high) - np.polyval(test_int, low)
    return float((test_area - anchor_area) / (high - low))


def bd_rate(anchor: RdCurve, test: RdCurve) -> float:
    """Average rate difference in percent at equal quality (negative = savings)"""
    avg = _average_gap(
        anchor.qualities, np.log10(anchor.rates), test.qualities, np.log10(test.rates), anchor.label, test.label, "quality"
    )
    return (10.0 ** avg - 1.0) * 100.0


def bd_quality(anchor: RdCurve, test: RdCurve) -> float:
    """Average quality difference at equal rate (dB for PSNR curves)"""
    return _average_gap(
        np.log10(anchor.rates), anchor.qualities, np.log10(test.rates), test.qualities, anchor.label, test.label, "rate"
    )


# RD-curve CSV files

def append_rd_point(path: Union[str, Path], rate_bpp: float, quality: float, ssim_value: float, qp: int) -> pd.DataFrame:
    """Add one (rate, PSNR, SSIM, QP) row, replacing an existing row of the same QP"""
    path = Path(path)
    row = pd.DataFrame([[rate_bpp, quality, ssim_value, qp]], columns=CURVE_COLUMNS)
    if path.exists():
        frame = pd.read_csv(path)
        frame = pd.concat([frame[frame["qp"] != qp], row], ignore_index=True)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = row
    frame = frame.sort_values("rate_bpp").reset_index(drop=True)
    frame.to_csv(path, index=False)
    return frame


def load_curves(path: Union[str, Path], label: str = "") -> Dict[str, RdCurve]:
    """PSNR and SSIM curves from an RD-curve CSV"""
    frame = pd.read_csv(path)
    label = label or Path(path).stem
    curves = {"psnr": RdCurve(points=list(zip(frame["rate_bpp"], frame["quality"])), label=label)}
    if "ssim" in frame.columns:
        curves["ssim"] = RdCurve(points=list(zip(frame["rate_bpp"], frame["ssim"])), label=label)
    return curves
