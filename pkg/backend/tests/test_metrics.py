import math

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import quad

from lfcodec.core.exceptions import DegenerateFit, NoOverlap, ShapeError
from lfcodec.models.lightfield import View
from lfcodec.utils.metrics import (
    CURVE_COLUMNS,
    RdCurve,
    append_rd_point,
    bd_quality,
    bd_rate,
    lightfield_psnr,
    load_curves,
    psnr,
    psnr_from_mse,
    ssim,
)
from lfcodec.utils.plotting import plot_rd_curves


def _offset(view: View, delta: int) -> View:
    return View(np.clip(view.planes.astype(int) + delta, 0, 255))


@pytest.fixture
def midtone(rng):
    return View(rng.integers(20, 236, size=(3, 16, 16)))


def test_psnr_known_values(midtone):
    assert psnr(midtone, midtone) == (math.inf, math.inf, math.inf)
    assert psnr(midtone, _offset(midtone, 1)).y == pytest.approx(48.1308, abs=1e-4)
    assert psnr_from_mse(0.0) == math.inf
    assert psnr_from_mse(65025.0) == 0.0


def test_psnr_reports_each_plane(midtone):
    planes = midtone.planes.astype(int)
    planes[0] += 2
    result = psnr(midtone, View(planes))
    assert result.y == pytest.approx(10 * math.log10(255**2 / 4))
    assert result.cb == math.inf and result.cr == math.inf


def test_psnr_checks_shapes(make_view):
    with pytest.raises(ShapeError):
        psnr(make_view(16, 16), make_view(16, 8))


def _naive_ssim(a, b, window=8):
    a, b = a.astype(float), b.astype(float)
    c1, c2 = (0.01 * 255) ** 2, (0.03 * 255) ** 2
    scores = []
    for y in range(a.shape[0] - window + 1):
        for x in range(a.shape[1] - window + 1):
            wa, wb = a[y:y + window, x:x + window], b[y:y + window, x:x + window]
            mu_a, mu_b = wa.mean(), wb.mean()
            cov = ((wa - mu_a) * (wb - mu_b)).mean()
            scores.append(
                (2 * mu_a * mu_b + c1) * (2 * cov + c2) / ((mu_a**2 + mu_b**2 + c1) * (wa.var() + wb.var() + c2))
            )
    return float(np.mean(scores))


def test_ssim_matches_windowed_loop(make_view):
    a, b = make_view(12, 14), make_view(12, 14)
    assert ssim(a, b) == pytest.approx(_naive_ssim(a.luma, b.luma), rel=1e-9)
    assert ssim(a, a) == pytest.approx(1.0)


def test_ssim_needs_a_full_window(make_view):
    with pytest.raises(ShapeError):
        ssim(make_view(7, 16), make_view(7, 16))


def test_lightfield_psnr_pools_mse(midtone):
    pooled = lightfield_psnr([midtone, midtone], [_offset(midtone, 1), _offset(midtone, 2)])
    assert pooled == pytest.approx(10 * math.log10(255**2 / 2.5))
    with pytest.raises(ShapeError):
        lightfield_psnr([midtone], [])


def test_rd_curve_validation():
    curve = RdCurve(points=[(0.4, 38.0), (0.1, 30.0)])
    assert curve.rates.tolist() == [0.1, 0.4]
    with pytest.raises(ValueError):
        RdCurve(points=[(0.0, 30.0)])
    with pytest.raises(ValueError):
        RdCurve(points=[(0.1, float("inf"))])


def test_rd_curve_rejects_repeated_rates(tmp_path):
    with pytest.raises(ValueError, match="distinct"):
        RdCurve(points=[(0.4, 38.0), (0.1, 30.0), (0.4, 37.5)])

    path = tmp_path / "curve.csv"
    pd.DataFrame([[0.2, 35.0, 0.9, 28], [0.2, 36.0, 0.92, 24]], columns=CURVE_COLUMNS).to_csv(path, index=False)
    with pytest.raises(ValueError, match="distinct"):
        load_curves(path)


ANCHOR = RdCurve(points=[(0.05, 30.0), (0.1, 33.0), (0.2, 36.0), (0.4, 38.5)], label="anchor")


def test_bd_of_a_curve_with_itself():
    assert bd_rate(ANCHOR, ANCHOR) == pytest.approx(0.0, abs=1e-9)
    assert bd_quality(ANCHOR, ANCHOR) == pytest.approx(0.0, abs=1e-9)


def test_halved_rates_save_fifty_percent():
    test = RdCurve(points=[(rate / 2, quality) for rate, quality in ANCHOR.points])
    assert bd_rate(ANCHOR, test) == pytest.approx(-50.0, abs=0.01)


def test_constant_quality_offset():
    test = RdCurve(points=[(rate, quality + 1.0) for rate, quality in ANCHOR.points])
    assert bd_quality(ANCHOR, test) == pytest.approx(1.0, abs=1e-9)


def test_bd_quality_matches_numeric_integration():
    def anchor(x):
        return 30 + 5 * x + 2 * x**2 - 0.5 * x**3

    def test(x):
        return 31 + 4 * x + x**2 + 0.2 * x**3

    anchor_x = [-1.0, -0.5, 0.0, 0.5]
    test_x = [-0.8, -0.3, 0.2, 0.7]
    anchor_curve = RdCurve(points=[(10**x, anchor(x)) for x in anchor_x])
    test_curve = RdCurve(points=[(10**x, test(x)) for x in test_x])

    expected, _ = quad(lambda x: test(x) - anchor(x), -0.8, 0.5)
    assert bd_quality(anchor_curve, test_curve) == pytest.approx(expected / 1.3, abs=1e-6)


def test_bd_errors():
    far = RdCurve(points=[(rate * 100, quality + 20) for rate, quality in ANCHOR.points])
    with pytest.raises(NoOverlap):
        bd_quality(ANCHOR, far)
    with pytest.raises(DegenerateFit):
        bd_rate(ANCHOR, RdCurve(points=ANCHOR.points[:3]))
    with pytest.raises(DegenerateFit):
        bd_rate(ANCHOR, RdCurve(points=[(0.05, 30.0), (0.1, 33.0), (0.2, 33.0), (0.4, 38.5)]))


def test_rd_point_csv(tmp_path):
    path = tmp_path / "curves" / "rdo.csv"
    append_rd_point(path, 0.1, 31.0, 0.90, 32)
    append_rd_point(path, 0.5, 40.0, 0.97, 18)
    frame = append_rd_point(path, 0.2, 33.0, 0.93, 32)

    assert frame["qp"].tolist() == [32, 18]
    assert frame["rate_bpp"].tolist() == pytest.approx([0.2, 0.5])

    curves = load_curves(path)
    assert curves["psnr"].label == "rdo"
    assert curves["psnr"].rates.tolist() == pytest.approx([0.2, 0.5])
    assert curves["psnr"].qualities.tolist() == pytest.approx([33.0, 40.0])
    assert curves["ssim"].qualities.tolist() == pytest.approx([0.93, 0.97])


def test_rd_plot_is_reproducible(tmp_path):
    curves = [ANCHOR, RdCurve(points=[(rate, quality + 0.5) for rate, quality in ANCHOR.points], label="rdo")]
    first = plot_rd_curves(curves, tmp_path / "a" / "rd.svg")
    second = plot_rd_curves(curves, tmp_path / "b" / "rd.svg")
    content = first.read_bytes()
    assert b"<svg" in content
    assert content == second.read_bytes()
