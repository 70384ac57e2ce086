"""
Hierarchical, temporally scalable pseudo-video codec

Level-0 frames are intra coded with DC prediction; every other frame is
predicted from the nearest preceding and following frames of lower temporal
level (full-search integer motion, forward/backward/bi modes). Residuals go
through the integer 8x8 transform and a dead-zone quantiser and are written
as zig-zag run/level pairs with Exp-Golomb codes.
"""

from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np
import structlog

from lfcodec.core.exceptions import BrokenReference, CorruptStream, IllegalDrop, MissingReference
from lfcodec.models.bitstream import MAX_VECTOR, Bitstream, CodecConfig, RateReport, StreamHeader, Unit
from lfcodec.models.lightfield import GopLayout, View
from lfcodec.services.sequencing import SCAN_CODES, build_gop_layout, coding_order, reference_pocs
from lfcodec.utils.bit_io import BitReader, BitstreamExhausted, BitWriter
from lfcodec.utils.transform import (
    BLOCK,
    dequantize,
    forward_transform,
    from_blocks,
    inverse_transform,
    pad_to_blocks,
    quantize,
    to_blocks,
    zigzag_order,
)

logger = structlog.get_logger()

DROPPABLE_LEVELS = (3, 4)

MODE_FORWARD = 0
MODE_BACKWARD = 1
MODE_BI = 2


# Residual entropy coding

def _write_levels(writer: BitWriter, levels: np.ndarray) -> None:
    """Zig-zag ordered levels as count, then (run, level) pairs"""
    nonzero = np.flatnonzero(levels)
    writer.write_ue(len(nonzero))
    previous = -1
    for index in nonzero:
        writer.write_ue(int(index - previous - 1))
        writer.write_se(int(levels[index]))
        previous = index


def _read_levels(reader: BitReader) -> np.ndarray:
    levels = np.zeros(BLOCK * BLOCK, dtype=np.int64)
    count = reader.read_ue()
    if count > BLOCK * BLOCK:
        raise CorruptStream("Coefficient count out of range")
    position = -1
    for _ in range(count):
        position += reader.read_ue() + 1
        if position >= BLOCK * BLOCK:
            raise CorruptStream("Coefficient run out of range")
        levels[position] = reader.read_se()
    return levels


def _scan(block: np.ndarray) -> np.ndarray:
    return block.reshape(-1)[zigzag_order()]


def _unscan(levels: np.ndarray) -> np.ndarray:
    block = np.zeros(BLOCK * BLOCK, dtype=np.int64)
    block[zigzag_order()] = levels
    return block.reshape(BLOCK, BLOCK)


def _code_residual(residual: np.ndarray, qp: int, intra: bool, bypass: bool) -> Tuple[np.ndarray, np.ndarray]:
    """(N, 8, 8) residual -> (levels in block layout, reconstructed residual)"""
    if bypass:
        return residual, residual
    levels = quantize(forward_transform(residual), qp, intra)
    return levels, inverse_transform(dequantize(levels, qp))


def _rebuild_residual(levels: np.ndarray, qp: int, bypass: bool) -> np.ndarray:
    if bypass:
        return levels
    return inverse_transform(dequantize(levels, qp))


# Prediction

def _dc_prediction(recon: np.ndarray, y0: int, x0: int) -> int:
    samples = []
    if y0 > 0:
        samples.append(recon[y0 - 1, x0:x0 + BLOCK])
    if x0 > 0:
        samples.append(recon[y0:y0 + BLOCK, x0 - 1])
    if not samples:
        return 128
    values = np.concatenate(samples)
    return int((int(values.sum()) + len(values) // 2) // len(values))


def _candidate_vectors(search_range: int) -> List[Tuple[int, int]]:
    """Integer displacements, zero first, then by L1 length"""
    return sorted(
        ((dy, dx) for dy in range(-search_range, search_range + 1) for dx in range(-search_range, search_range + 1)),
        key=lambda v: (abs(v[0]) + abs(v[1]), v[0], v[1]),
    )


class _MotionCompensator:
    """Block fetches from an edge-extended reference frame"""

    def __init__(self, reference: np.ndarray, margin: int):
        self.margin = margin
        self.padded = np.pad(reference, ((0, 0), (margin, margin), (margin, margin)), mode="edge")

    def block(self, y0: int, x0: int, mv: Tuple[int, int]) -> np.ndarray:
        y = y0 + self.margin + mv[0]
        x = x0 + self.margin + mv[1]
        return self.padded[:, y:y + BLOCK, x:x + BLOCK]

    def best_vectors(self, luma: np.ndarray, candidates: Sequence[Tuple[int, int]]) -> Tuple[np.ndarray, np.ndarray]:
        """Per-block argmin of SAD over the candidate list -> (vectors (R, C, 2), sad (R, C))"""
        height, width = luma.shape
        rows, cols = height // BLOCK, width // BLOCK
        ref = self.padded[0]
        sads = np.empty((len(candidates), rows, cols), dtype=np.int64)
        for index, (dy, dx) in enumerate(candidates):
            window = ref[self.margin + dy:self.margin + dy + height, self.margin + dx:self.margin + dx + width]
            diff = np.abs(luma - window)
            sads[index] = diff.reshape(rows, BLOCK, cols, BLOCK).sum(axis=(1, 3))
        best = np.argmin(sads, axis=0)
        vectors = np.asarray(candidates, dtype=np.int64)[best]
        return vectors, np.take_along_axis(sads, best[None], axis=0)[0]


def _bi_average(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return (a + b + 1) >> 1


# Frame coding

def encode_frame(
    planes: np.ndarray, references: Sequence[np.ndarray], qp: int, config: CodecConfig
) -> Tuple[bytes, np.ndarray]:
    """Code one block-aligned frame; returns (payload, reconstruction)"""
    writer = BitWriter()
    writer.write_flag(config.lossless_bypass)
    planes = planes.astype(np.int64)
    if references:
        recon = _encode_inter(writer, planes, references, qp, config)
    else:
        recon = _encode_intra(writer, planes, qp, config.lossless_bypass)
    return writer.getvalue(), recon


def _encode_intra(writer: BitWriter, planes: np.ndarray, qp: int, bypass: bool) -> np.ndarray:
    channels, height, width = planes.shape
    recon = np.zeros_like(planes)
    for y0 in range(0, height, BLOCK):
        for x0 in range(0, width, BLOCK):
            for c in range(channels):
                prediction = _dc_prediction(recon[c], y0, x0)
                residual = planes[c, y0:y0 + BLOCK, x0:x0 + BLOCK] - prediction
                levels, rebuilt = _code_residual(residual[None], qp, True, bypass)
                _write_levels(writer, _scan(levels[0]))
                recon[c, y0:y0 + BLOCK, x0:x0 + BLOCK] = np.clip(prediction + rebuilt[0], 0, 255)
    return recon


def _encode_inter(
    writer: BitWriter, planes: np.ndarray, references: Sequence[np.ndarray], qp: int, config: CodecConfig
) -> np.ndarray:
    channels, height, width = planes.shape
    rows, cols = height // BLOCK, width // BLOCK
    candidates = _candidate_vectors(config.search_range)
    compensators = [_MotionCompensator(ref.astype(np.int64), config.search_range) for ref in references]
    searches = [mc.best_vectors(planes[0], candidates) for mc in compensators]

    prediction = np.zeros_like(planes)
    modes = np.zeros((rows, cols), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            y0, x0 = r * BLOCK, c * BLOCK
            fetched = [mc.block(y0, x0, tuple(search[0][r, c])) for mc, search in zip(compensators, searches)]
            options = list(fetched)
            if len(fetched) == 2:
                options.append(_bi_average(fetched[0], fetched[1]))
            target = planes[0, y0:y0 + BLOCK, x0:x0 + BLOCK]
            costs = [int(np.abs(target - option[0]).sum()) for option in options]
            mode = int(np.argmin(costs))
            modes[r, c] = mode
            prediction[:, y0:y0 + BLOCK, x0:x0 + BLOCK] = options[mode]

    residual = planes - prediction
    levels = []
    rebuilt = []
    for ch in range(channels):
        blocks = to_blocks(residual[ch]).reshape(-1, BLOCK, BLOCK)
        lv, rb = _code_residual(blocks, qp, False, config.lossless_bypass)
        levels.append(lv.reshape(rows, cols, BLOCK, BLOCK))
        rebuilt.append(from_blocks(rb.reshape(rows, cols, BLOCK, BLOCK)))

    predictors = [np.zeros(2, dtype=np.int64) for _ in references]
    for r in range(rows):
        for c in range(cols):
            mode = modes[r, c]
            if len(references) == 2:
                writer.write_ue(int(mode))
            for index in _refs_for_mode(mode, len(references)):
                vector = searches[index][0][r, c]
                delta = vector - predictors[index]
                writer.write_se(int(delta[0]))
                writer.write_se(int(delta[1]))
                predictors[index] = vector
            for ch in range(channels):
                _write_levels(writer, _scan(levels[ch][r, c]))

    return np.clip(prediction + np.stack(rebuilt), 0, 255)


def _refs_for_mode(mode: int, num_refs: int) -> Tuple[int, ...]:
    if num_refs == 1:
        return (0,)
    return {MODE_FORWARD: (0,), MODE_BACKWARD: (1,), MODE_BI: (0, 1)}[mode]


def decode_frame(
    payload: bytes, references: Sequence[np.ndarray], qp: int, shape: Tuple[int, int, int]
) -> np.ndarray:
    reader = BitReader(payload)
    bypass = reader.read_flag()
    if references:
        return _decode_inter(reader, references, qp, shape, bypass)
    return _decode_intra(reader, qp, shape, bypass)


def _decode_intra(reader: BitReader, qp: int, shape: Tuple[int, int, int], bypass: bool) -> np.ndarray:
    channels, height, width = shape
    recon = np.zeros(shape, dtype=np.int64)
    for y0 in range(0, height, BLOCK):
        for x0 in range(0, width, BLOCK):
            for c in range(channels):
                prediction = _dc_prediction(recon[c], y0, x0)
                levels = _unscan(_read_levels(reader))
                rebuilt = _rebuild_residual(levels[None], qp, bypass)[0]
                recon[c, y0:y0 + BLOCK, x0:x0 + BLOCK] = np.clip(prediction + rebuilt, 0, 255)
    return recon


def _decode_inter(
    reader: BitReader,
    references: Sequence[np.ndarray],
    qp: int,
    shape: Tuple[int, int, int],
    bypass: bool,
) -> np.ndarray:
    channels, height, width = shape
    rows, cols = height // BLOCK, width // BLOCK
    margin = MAX_VECTOR
    compensators = [_MotionCompensator(ref.astype(np.int64), margin) for ref in references]
    predictors = [np.zeros(2, dtype=np.int64) for _ in references]

    prediction = np.zeros(shape, dtype=np.int64)
    levels = np.zeros((channels, rows, cols, BLOCK, BLOCK), dtype=np.int64)
    for r in range(rows):
        for c in range(cols):
            mode = reader.read_ue() if len(references) == 2 else MODE_FORWARD
            if mode > MODE_BI:
                raise CorruptStream("Invalid prediction mode")
            fetched = []
            for index in _refs_for_mode(mode, len(references)):
                vector = predictors[index] + np.array([reader.read_se(), reader.read_se()], dtype=np.int64)
                if np.abs(vector).max() > margin:
                    raise CorruptStream("Motion vector out of range")
                predictors[index] = vector
                fetched.append(compensators[index].block(r * BLOCK, c * BLOCK, tuple(vector)))
            block = _bi_average(fetched[0], fetched[1]) if len(fetched) == 2 else fetched[0]
            prediction[:, r * BLOCK:(r + 1) * BLOCK, c * BLOCK:(c + 1) * BLOCK] = block
            for ch in range(channels):
                levels[ch, r, c] = _unscan(_read_levels(reader))

    rebuilt = np.stack(
        [
            from_blocks(_rebuild_residual(levels[ch].reshape(-1, BLOCK, BLOCK), qp, bypass).reshape(rows, cols, BLOCK, BLOCK))
            for ch in range(channels)
        ]
    )
    return np.clip(prediction + rebuilt, 0, 255)


# Sequence coding

def _crop(padded: np.ndarray, width: int, height: int) -> View:
    return View(padded[:, :height, :width].astype(np.uint8))


class SequenceEncoder:
    """Stateful encoder holding decoder-identical reconstructions of committed frames"""

    def __init__(self, config: CodecConfig, width: int, height: int, num_frames: int, grid: Tuple[int, int] = None):
        self.config = config
        self.width = width
        self.height = height
        self.grid = grid or (1, num_frames)
        self.layout: GopLayout = build_gop_layout(num_frames, config.gop_size)
        self._recon: Dict[int, np.ndarray] = {}
        self._units: Dict[int, Unit] = {}

    def references(self, poc: int) -> List[np.ndarray]:
        refs = []
        for ref in reference_pocs(poc, self.layout):
            if ref is None:
                continue
            if ref not in self._recon:
                raise MissingReference(f"Reference {ref} of POC {poc} is not reconstructed")
            refs.append(self._recon[ref])
        return refs

    def trial(self, poc: int, view: View) -> Tuple[Unit, View, np.ndarray]:
        """Encode without committing; returns (unit, cropped reconstruction, padded reconstruction)"""
        level = self.layout.level(poc)
        qp = self.config.qp_for_level(level)
        planes = pad_to_blocks(view.planes)
        payload, recon = encode_frame(planes, self.references(poc), qp, self.config)
        unit = Unit(poc=poc, temporal_id=level, coded_flag=True, qp=qp, payload=payload)
        return unit, _crop(recon, self.width, self.height), recon

    def commit(self, unit: Unit, padded_recon: Optional[np.ndarray]) -> None:
        self._units[unit.poc] = unit
        if unit.coded_flag:
            self._recon[unit.poc] = padded_recon
        else:
            self._recon.pop(unit.poc, None)

    def encode(self, poc: int, view: View) -> Tuple[Unit, View]:
        unit, recon, padded = self.trial(poc, view)
        self.commit(unit, padded)
        return unit, recon

    def drop(self, poc: int) -> Unit:
        level = self.layout.level(poc)
        if level not in DROPPABLE_LEVELS:
            raise IllegalDrop(f"POC {poc} at temporal level {level} cannot be dropped")
        unit = Unit.dropped(poc, level, self.config.qp_for_level(level))
        self.commit(unit, None)
        return unit

    def reconstruction(self, poc: int) -> View:
        return _crop(self._recon[poc], self.width, self.height)

    def bitstream(self) -> Bitstream:
        order = coding_order(self.layout)
        missing = [poc for poc in order if poc not in self._units]
        if missing:
            raise MissingReference(f"POCs not yet coded: {missing}")
        header = StreamHeader(
            width=self.width,
            height=self.height,
            grid_s=self.grid[0],
            grid_t=self.grid[1],
            gop_size=self.config.gop_size,
            base_qp=self.config.qp,
            scan=SCAN_CODES[self.config.scan],
        )
        return Bitstream(header, tuple(self._units[poc] for poc in order))


def validate_drop_set(layout: GopLayout, drop_set: Iterable[int]) -> Set[int]:
    """Drops must be level 3/4 and no coded frame may reference a dropped one"""
    drops = set(drop_set)
    for poc in sorted(drops):
        if poc not in layout.level_of_poc:
            raise IllegalDrop(f"POC {poc} is outside the sequence")
        if layout.level(poc) not in DROPPABLE_LEVELS:
            raise IllegalDrop(f"POC {poc} at temporal level {layout.level(poc)} cannot be dropped")
    for poc in range(layout.num_frames):
        if poc in drops:
            continue
        for ref in reference_pocs(poc, layout):
            if ref is not None and ref in drops:
                raise BrokenReference(f"Coded POC {poc} references dropped POC {ref}")
    return drops


def encode_sequence(
    frames: Sequence[View],
    config: CodecConfig,
    drop_set: Iterable[int] = (),
    grid: Tuple[int, int] = None,
) -> Tuple[Bitstream, RateReport, Dict[int, View]]:
    """Encode a pseudo-sequence; dropped POCs become flag-only units"""
    if not frames:
        raise ValueError("At least one frame is required")
    width, height = frames[0].width, frames[0].height
    encoder = SequenceEncoder(config, width, height, len(frames), grid)
    drops = validate_drop_set(encoder.layout, drop_set)

    reconstructions: Dict[int, View] = {}
    for poc in coding_order(encoder.layout):
        if poc in drops:
            encoder.drop(poc)
        else:
            _, reconstructions[poc] = encoder.encode(poc, frames[poc])

    bitstream = encoder.bitstream()
    report = measure_rate(bitstream)
    logger.info(
        "Sequence encoded",
        frames=len(frames),
        dropped=len(drops),
        qp=config.qp,
        bpp=round(report.bpp, 5),
    )
    return bitstream, report, reconstructions


def decode_sequence(bitstream: Bitstream) -> Tuple[Dict[int, View], Set[int]]:
    """Decode all coded units; returns (POC -> view, dropped POCs)"""
    header = bitstream.header
    layout = build_gop_layout(header.num_frames, header.gop_size)
    shape = (3, header.height + (-header.height) % BLOCK, header.width + (-header.width) % BLOCK)

    recon: Dict[int, np.ndarray] = {}
    frames: Dict[int, View] = {}
    dropped: Set[int] = set()
    for unit in bitstream.units:
        if unit.poc not in layout.level_of_poc:
            raise CorruptStream("POC outside the sequence", poc=unit.poc)
        if not unit.coded_flag:
            dropped.add(unit.poc)
            continue
        refs = []
        for ref in reference_pocs(unit.poc, layout):
            if ref is None:
                continue
            if ref not in recon:
                raise CorruptStream(f"Reference {ref} not available", poc=unit.poc)
            refs.append(recon[ref])
        try:
            padded = decode_frame(unit.payload, refs, unit.qp, shape)
        except BitstreamExhausted as e:
            logger.error("Decoding failed", poc=unit.poc, error="payload exhausted")
            raise CorruptStream("Truncated payload", poc=unit.poc) from e
        except CorruptStream as e:
            raise CorruptStream(str(e), poc=unit.poc) from e
        recon[unit.poc] = padded
        frames[unit.poc] = _crop(padded, header.width, header.height)

    logger.info("Sequence decoded", decoded=len(frames), dropped=len(dropped))
    return frames, dropped


def extract_layers(bitstream: Bitstream, max_temporal_id: int) -> Bitstream:
    """Keep only units with temporal_id <= max_temporal_id"""
    if not 0 <= max_temporal_id <= 255:
        raise ValueError(f"max_temporal_id out of range: {max_temporal_id}")
    return bitstream.with_units(unit for unit in bitstream.units if unit.temporal_id <= max_temporal_id)


def measure_rate(bitstream: Bitstream, pocs: Optional[Iterable[int]] = None) -> RateReport:
    """Exact bit counts per POC and per temporal level"""
    selected = None if pocs is None else set(pocs)
    units = [unit for unit in bitstream.units if selected is None or unit.poc in selected]

    poc_bits = {unit.poc: unit.bits for unit in units}
    level_bits: Dict[int, int] = {}
    for unit in units:
        level_bits[unit.temporal_id] = level_bits.get(unit.temporal_id, 0) + unit.bits
    total = sum(poc_bits.values())

    num_views = bitstream.header.num_frames if selected is None else len(selected)
    num_pixels = bitstream.header.width * bitstream.header.height * max(num_views, 1)
    shares = {level: bits / total for level, bits in level_bits.items()} if total else {}
    return RateReport(
        poc_bits=poc_bits,
        level_bits=level_bits,
        total_bits=total,
        num_pixels=num_pixels,
        bpp=total / num_pixels,
        level_share=shares,
    )
