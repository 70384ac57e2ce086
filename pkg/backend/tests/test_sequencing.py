import numpy as np
import pytest

from lfcodec.core.exceptions import InconsistentDimensions, InvalidGop, InvalidGrid, ShapeError
from lfcodec.models.lightfield import LightField, View
from lfcodec.services.sequencing import (
    build_gop_layout,
    coding_order,
    dependent_pocs,
    raster_scan,
    reference_pocs,
    scan_sequence,
    spiral_scan,
    temporal_level,
)


def _cells(sequence):
    return [(s, t) for _, s, t in sequence.order]


def test_view_validates_shape_and_range():
    with pytest.raises(ShapeError):
        View(np.zeros((2, 4, 4), dtype=np.uint8))
    with pytest.raises(ShapeError):
        View(np.full((3, 4, 4), 300))
    view = View(np.full((3, 4, 5), 7))
    assert view.planes.dtype == np.uint8
    assert (view.height, view.width) == (4, 5)
    assert not view.planes.flags.writeable


def test_view_float_round_trip(make_view):
    view = make_view(8, 8)
    assert View.from_float(view.as_float()) == view


def test_lightfield_checks_grid(make_view):
    views = tuple(make_view() for _ in range(4))
    lightfield = LightField(2, 2, views)
    assert lightfield.view(1, 0) is views[2]
    assert list(lightfield.positions()) == [(0, 0), (0, 1), (1, 0), (1, 1)]

    with pytest.raises(InvalidGrid):
        LightField(0, 2, ())
    with pytest.raises(InvalidGrid):
        LightField(2, 2, views[:3])
    with pytest.raises(InconsistentDimensions):
        LightField(1, 2, (make_view(16, 16), make_view(8, 16)))


def test_spiral_single_cell():
    assert _cells(spiral_scan(1, 1)) == [(0, 0)]


def test_spiral_three_by_three():
    assert _cells(spiral_scan(3, 3)) == [(1, 1), (1, 2), (2, 2), (2, 1), (2, 0), (1, 0), (0, 0), (0, 1), (0, 2)]


def test_spiral_starts_at_center_of_even_grid():
    cells = _cells(spiral_scan(8, 8))
    assert cells[0] == (3, 3)
    assert cells[1] == (3, 4)
    assert len(set(cells)) == 64


@pytest.mark.parametrize("seed", range(20))
def test_spiral_is_a_permutation(seed):
    rng = np.random.default_rng(seed)
    grid_s, grid_t = (int(v) for v in rng.integers(1, 17, size=2))
    sequence = spiral_scan(grid_s, grid_t)
    assert sorted(_cells(sequence)) == [(s, t) for s in range(grid_s) for t in range(grid_t)]
    for poc in range(len(sequence)):
        assert sequence.poc_of(*sequence.position(poc)) == poc


def test_spiral_rejects_empty_grid():
    with pytest.raises(InvalidGrid):
        spiral_scan(0, 3)


def test_raster_scan_and_dispatch():
    assert _cells(raster_scan(2, 2)) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert scan_sequence(2, 2, "raster").scan == "raster"
    with pytest.raises(ValueError):
        scan_sequence(2, 2, "zigzag")


def test_assemble_inverts_the_scan(make_view):
    lightfield = LightField(3, 3, tuple(make_view(8, 8) for _ in range(9)))
    sequence = spiral_scan(3, 3)
    frames = dict(enumerate(sequence.frames(lightfield)))
    assert sequence.assemble(frames) == lightfield


@pytest.mark.parametrize("poc,level", [(0, 0), (16, 0), (8, 1), (4, 2), (12, 2), (6, 3), (2, 3), (1, 4), (15, 4)])
def test_temporal_level_gop16(poc, level):
    assert temporal_level(poc, 16) == level


def test_temporal_level_rejects_bad_gop():
    with pytest.raises(InvalidGop):
        temporal_level(3, 12)
    with pytest.raises(InvalidGop):
        build_gop_layout(9, 6)


def test_coding_order_partial_gop():
    layout = build_gop_layout(9, 16)
    assert coding_order(layout) == [0, 8, 4, 2, 6, 1, 3, 5, 7]


def test_coding_order_two_gops():
    layout = build_gop_layout(33, 16)
    order = coding_order(layout)
    assert order[:2] == [0, 16]
    assert order[17:19] == [32, 24]
    assert sorted(order) == list(range(33))


def test_reference_pocs():
    layout = build_gop_layout(17, 16)
    assert reference_pocs(0, layout) == (None, None)
    assert reference_pocs(16, layout) == (None, None)
    assert reference_pocs(8, layout) == (0, 16)
    assert reference_pocs(1, layout) == (0, 2)
    assert reference_pocs(6, layout) == (4, 8)


def test_reference_pocs_at_sequence_end():
    layout = build_gop_layout(9, 16)
    assert reference_pocs(8, layout) == (0, None)
    assert reference_pocs(7, layout) == (6, 8)


def test_dependent_pocs():
    layout = build_gop_layout(17, 16)
    assert dependent_pocs(2, layout) == [1, 3]
    assert dependent_pocs(14, layout) == [13, 15]
    assert dependent_pocs(1, layout) == []


def test_gop_membership():
    layout = build_gop_layout(25, 8)
    assert layout.num_gops() == 3
    assert layout.gop_pocs(0) == list(range(0, 9))
    assert layout.gop_pocs(2) == list(range(17, 25))
    assert layout.pocs_at(0) == [0, 8, 16, 24]
