import numpy as np
import pytest

from lfcodec.core.exceptions import BrokenReference, CorruptStream, IllegalDrop, MissingReference, VersionError
from lfcodec.models.bitstream import UNIT_SYNTAX_BITS, Bitstream, CodecConfig, Unit
from lfcodec.models.lightfield import View
from lfcodec.services.codec import (
    SequenceEncoder,
    decode_sequence,
    encode_sequence,
    extract_layers,
    measure_rate,
    validate_drop_set,
)
from lfcodec.services.sequencing import build_gop_layout, spiral_scan
from lfcodec.utils.metrics import psnr


def _random_frames(rng, count, height=16, width=16):
    return [View(rng.integers(0, 256, size=(3, height, width), dtype=np.uint8)) for _ in range(count)]


def _smooth_frames(rng, count, height=16, width=16):
    """Slowly drifting gradients, closer to real content than white noise"""
    y, x = np.mgrid[0:height, 0:width]
    frames = []
    for i in range(count):
        base = 60 + 4 * x + 3 * y + 2 * i
        noise = rng.integers(-3, 4, size=(3, height, width))
        frames.append(View(np.clip(base[None] + noise + np.array([0, 20, -20])[:, None, None], 0, 255)))
    return frames


@pytest.fixture
def seventeen(rng):
    return _smooth_frames(rng, 17)


def test_lossless_bypass_is_bit_exact(rng):
    frames = _random_frames(rng, 17)
    config = CodecConfig(lossless_bypass=True, search_range=2)
    bitstream, _, recon = encode_sequence(frames, config)
    assert all(recon[poc] == frames[poc] for poc in range(17))

    decoded, dropped = decode_sequence(Bitstream.from_bytes(bitstream.to_bytes()))
    assert dropped == set()
    assert all(decoded[poc] == frames[poc] for poc in range(17))


def test_decoder_matches_encoder_reconstruction(seventeen, codec_config):
    bitstream, _, recon = encode_sequence(seventeen, codec_config)
    decoded, _ = decode_sequence(bitstream)
    assert decoded.keys() == recon.keys()
    assert all(decoded[poc] == recon[poc] for poc in recon)


def test_odd_dimensions_are_cropped(rng):
    frames = _smooth_frames(rng, 3, height=13, width=21)
    bitstream, _, recon = encode_sequence(frames, CodecConfig(qp=22, gop_size=2, search_range=2))
    decoded, _ = decode_sequence(bitstream)
    assert decoded[1].planes.shape == (3, 13, 21)
    assert decoded[2] == recon[2]


def test_drop_all_level_four(seventeen, codec_config):
    odd = set(range(1, 17, 2))
    bitstream, report, recon = encode_sequence(seventeen, codec_config, drop_set=odd)
    flag_only = [unit for unit in bitstream.units if not unit.coded_flag]
    assert {unit.poc for unit in flag_only} == odd
    assert all(unit.payload == b"" and unit.bits == UNIT_SYNTAX_BITS for unit in flag_only)
    assert set(recon) == set(range(17)) - odd

    decoded, dropped = decode_sequence(bitstream)
    assert dropped == odd
    assert set(decoded) == set(range(17)) - odd
    assert report.poc_bits[1] == UNIT_SYNTAX_BITS


def test_drop_constraints(seventeen, codec_config):
    with pytest.raises(BrokenReference):
        encode_sequence(seventeen, codec_config, drop_set={2})
    with pytest.raises(IllegalDrop):
        encode_sequence(seventeen, codec_config, drop_set={4})

    layout = build_gop_layout(17, 16)
    assert validate_drop_set(layout, {1, 2, 3}) == {1, 2, 3}
    with pytest.raises(IllegalDrop):
        validate_drop_set(layout, {40})


def test_sequence_encoder_guards(seventeen, codec_config):
    encoder = SequenceEncoder(codec_config, 16, 16, 17)
    with pytest.raises(MissingReference):
        encoder.encode(8, seventeen[8])
    encoder.encode(0, seventeen[0])
    with pytest.raises(MissingReference):
        encoder.bitstream()
    with pytest.raises(IllegalDrop):
        encoder.drop(16)


def test_trial_does_not_commit(seventeen, codec_config):
    encoder = SequenceEncoder(codec_config, 16, 16, 17)
    encoder.encode(0, seventeen[0])
    encoder.encode(16, seventeen[16])
    unit, recon, _ = encoder.trial(8, seventeen[8])
    assert unit.poc == 8 and unit.temporal_id == 1
    with pytest.raises(MissingReference):
        encoder.references(4)
    committed, committed_recon = encoder.encode(8, seventeen[8])
    assert committed == unit
    assert committed_recon == recon


def test_inter_frame_is_cheaper_than_intra(rng):
    frame = _smooth_frames(rng, 1)[0]
    bitstream, report, _ = encode_sequence([frame, frame], CodecConfig(qp=28, gop_size=2, search_range=2))
    assert bitstream.unit_for(1).temporal_id == 1
    assert report.poc_bits[1] < report.poc_bits[0]


def test_unit_qp_follows_level_offsets(seventeen):
    bitstream, _, _ = encode_sequence(seventeen, CodecConfig(qp=30, search_range=2))
    assert bitstream.unit_for(0).qp == 30
    assert bitstream.unit_for(8).qp == 31
    assert bitstream.unit_for(1).qp == 34


def test_container_round_trip(tmp_path, seventeen, codec_config):
    bitstream, _, _ = encode_sequence(seventeen, codec_config, drop_set={1, 3})
    path = tmp_path / "stream.lfbs"
    bitstream.save(path)
    loaded = Bitstream.load(path)
    assert loaded == bitstream
    assert loaded.to_bytes() == path.read_bytes()


def test_truncated_final_unit(seventeen, codec_config):
    bitstream, _, _ = encode_sequence(seventeen, codec_config)
    data = bitstream.to_bytes()
    with pytest.raises(CorruptStream) as info:
        Bitstream.from_bytes(data[:-1])
    assert info.value.poc == bitstream.units[-1].poc


def test_truncated_payload_names_its_poc(seventeen, codec_config):
    bitstream, _, _ = encode_sequence(seventeen, codec_config)
    units = list(bitstream.units)
    victim = units[1]
    units[1] = Unit(victim.poc, victim.temporal_id, True, victim.qp, victim.payload[: len(victim.payload) // 2])
    with pytest.raises(CorruptStream) as info:
        decode_sequence(bitstream.with_units(units))
    assert info.value.poc == victim.poc


def test_container_errors(seventeen, codec_config):
    data = bytearray(encode_sequence(seventeen[:2], codec_config)[0].to_bytes())
    with pytest.raises(CorruptStream):
        Bitstream.from_bytes(b"XXXX" + bytes(data[4:]))
    with pytest.raises(CorruptStream):
        Bitstream.from_bytes(bytes(data[:5]))
    data[4] = 9
    with pytest.raises(VersionError):
        Bitstream.from_bytes(bytes(data))


def test_missing_reference_is_corrupt(seventeen, codec_config):
    bitstream, _, _ = encode_sequence(seventeen, codec_config)
    without_anchor = bitstream.with_units(unit for unit in bitstream.units if unit.poc != 16)
    with pytest.raises(CorruptStream) as info:
        decode_sequence(without_anchor)
    assert info.value.poc == 8


def test_extract_layers_examples(seventeen, codec_config):
    bitstream, _, _ = encode_sequence(seventeen, codec_config)
    assert extract_layers(bitstream, 4).to_bytes() == bitstream.to_bytes()
    assert sorted(unit.poc for unit in extract_layers(bitstream, 2).units) == [0, 4, 8, 12, 16]
    assert extract_layers(bitstream, 0).header == bitstream.header
    with pytest.raises(ValueError):
        extract_layers(bitstream, -1)


@pytest.mark.parametrize("trial", range(100))
def test_temporal_scalability(trial):
    rng = np.random.default_rng(1000 + trial)
    count = int(rng.integers(1, 18))
    gop = int(rng.choice([2, 4, 8, 16]))
    config = CodecConfig(qp=int(rng.integers(10, 45)), gop_size=gop, search_range=2)
    frames = _random_frames(rng, count, height=8, width=8)

    bitstream, _, _ = encode_sequence(frames, config)
    full, _ = decode_sequence(bitstream)
    layout = build_gop_layout(count, gop)
    for k in range(5):
        partial, _ = decode_sequence(extract_layers(bitstream, k))
        expected = {poc: view for poc, view in full.items() if layout.level(poc) <= k}
        assert partial.keys() == expected.keys()
        assert all(partial[poc] == expected[poc] for poc in expected)


def test_measure_rate_accounting(seventeen, codec_config):
    bitstream, report, _ = encode_sequence(seventeen, codec_config, drop_set={1, 3, 5})
    assert report.total_bits == sum(unit.bits for unit in bitstream.units)
    assert sum(report.level_share.values()) == pytest.approx(1.0, abs=1e-9)
    assert report.bpp == report.total_bits / (16 * 16 * 17)

    subset = measure_rate(bitstream, pocs=[0, 1])
    assert set(subset.poc_bits) == {0, 1}
    assert subset.poc_bits[1] == UNIT_SYNTAX_BITS
    assert subset.num_pixels == 16 * 16 * 2


def test_quality_and_rate_fall_with_qp(shifted_lightfield):
    frames = spiral_scan(3, 3).frames(shifted_lightfield)
    results = []
    for qp in (18, 24, 28, 32):
        _, report, recon = encode_sequence(frames, CodecConfig(qp=qp, search_range=4))
        mean_psnr = float(np.mean([psnr(frames[poc], recon[poc]).y for poc in recon]))
        results.append((mean_psnr, report.bpp))
    for (psnr_hi, bpp_hi), (psnr_lo, bpp_lo) in zip(results, results[1:]):
        assert psnr_lo <= psnr_hi
        assert bpp_lo <= bpp_hi
