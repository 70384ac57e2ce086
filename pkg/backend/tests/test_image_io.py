import numpy as np
import pytest
from PIL import Image

from lfcodec.core.exceptions import FormatError, InconsistentDimensions, MissingView
from lfcodec.models.lightfield import LightField, View
from lfcodec.utils.image_io import (
    VIEW_TEMPLATE,
    discover_grid,
    load_lightfield,
    load_lightfield_dir,
    read_disparity_map,
    read_view,
    rgb_to_ycbcr,
    save_lightfield,
    write_disparity_map,
    write_view,
    ycbcr_to_rgb,
)


def _rgb_view(rng, height=8, width=8) -> View:
    return View(rgb_to_ycbcr(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)))


def _write_rgb(path, height, width, value=100):
    Image.fromarray(np.full((height, width, 3), value, dtype=np.uint8)).save(path, format="PPM")


def test_gray_converts_to_neutral_chroma():
    planes = rgb_to_ycbcr(np.full((2, 2, 3), 90, dtype=np.uint8))
    assert np.all(planes[0] == 90)
    assert np.all(planes[1:] == 128)
    assert np.all(ycbcr_to_rgb(planes) == 90)


def test_primary_colours():
    planes = rgb_to_ycbcr(np.array([[[255, 0, 0], [0, 0, 255]]], dtype=np.uint8))
    # BT.601 full range: red -> (76, 85, 255), blue -> (29, 255, 107)
    assert planes[:, 0, 0].tolist() == [76, 85, 255]
    assert planes[:, 0, 1].tolist() == [29, 255, 107]


def test_view_file_round_trip_is_close(tmp_path, rng):
    view = _rgb_view(rng)
    write_view(view, tmp_path / "v.ppm")
    loaded = read_view(tmp_path / "v.ppm")
    assert loaded.planes.shape == view.planes.shape
    assert np.abs(loaded.planes.astype(int) - view.planes.astype(int)).max() <= 3


def test_read_view_rejects_garbage(tmp_path):
    path = tmp_path / "broken.ppm"
    path.write_bytes(b"not an image at all")
    with pytest.raises(FormatError):
        read_view(path)


def test_load_lightfield_grid(tmp_path):
    for s in range(2):
        for t in range(3):
            _write_rgb(tmp_path / VIEW_TEMPLATE.format(s=s, t=t), 8, 8, value=10 * (s * 3 + t))
    lightfield = load_lightfield(str(tmp_path / VIEW_TEMPLATE), 2, 3)
    assert lightfield.num_views == 6
    assert lightfield.view(1, 2).luma[0, 0] == 50
    assert discover_grid(tmp_path) == (2, 3)


def test_missing_view_names_its_coordinates(tmp_path):
    for s in range(3):
        for t in range(3):
            if (s, t) != (2, 1):
                _write_rgb(tmp_path / VIEW_TEMPLATE.format(s=s, t=t), 8, 8)
    with pytest.raises(MissingView) as info:
        load_lightfield(str(tmp_path / VIEW_TEMPLATE), 3, 3)
    assert (info.value.s, info.value.t) == (2, 1)


def test_mixed_dimensions_rejected(tmp_path):
    _write_rgb(tmp_path / VIEW_TEMPLATE.format(s=0, t=0), 64, 64)
    _write_rgb(tmp_path / VIEW_TEMPLATE.format(s=0, t=1), 60, 60)
    with pytest.raises(InconsistentDimensions):
        load_lightfield_dir(tmp_path)


def test_empty_directory_has_no_grid(tmp_path):
    with pytest.raises(FormatError):
        discover_grid(tmp_path)


def test_save_then_load_lightfield(tmp_path, rng):
    lightfield = LightField(2, 2, tuple(_rgb_view(rng) for _ in range(4)))
    save_lightfield(lightfield, tmp_path / "lf")
    loaded = load_lightfield_dir(tmp_path / "lf")
    assert (loaded.grid_s, loaded.grid_t) == (2, 2)
    for s, t in lightfield.positions():
        diff = loaded.view(s, t).planes.astype(int) - lightfield.view(s, t).planes.astype(int)
        assert np.abs(diff).max() <= 3


def test_disparity_map_round_trip(tmp_path, rng):
    disparity = rng.normal(size=(5, 7)).astype(np.float32)
    write_disparity_map(disparity, tmp_path / "d.lfdm")
    assert np.array_equal(read_disparity_map(tmp_path / "d.lfdm"), disparity)


def test_disparity_map_errors(tmp_path):
    bad = tmp_path / "bad.lfdm"
    bad.write_bytes(b"XXXXXXXX" + bytes(8))
    with pytest.raises(FormatError):
        read_disparity_map(bad)

    write_disparity_map(np.zeros((4, 4), dtype=np.float32), tmp_path / "ok.lfdm")
    data = (tmp_path / "ok.lfdm").read_bytes()
    (tmp_path / "short.lfdm").write_bytes(data[:-4])
    with pytest.raises(FormatError):
        read_disparity_map(tmp_path / "short.lfdm")
