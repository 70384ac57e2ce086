"""
End-to-end light field encoding, decoding with synthesis, and evaluation
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np
import pandas as pd
import structlog

from lfcodec.core.exceptions import NoModelForQp, ShapeError
from lfcodec.models.bitstream import Bitstream, CodecConfig, RateReport
from lfcodec.models.decision import Branch, LagrangianConfig, ViewDecision
from lfcodec.models.lightfield import LightField, PseudoSequence, View
from lfcodec.services.codec import DROPPABLE_LEVELS, SequenceEncoder, decode_sequence, measure_rate
from lfcodec.services.rdo_engine import decide_gop, write_decision_log
from lfcodec.services.sequencing import SCAN_NAMES, build_gop_layout, coding_order, scan_sequence
from lfcodec.services.synthesizer import GeneratorModel, generate_view, select_reference_pocs, synthesize_views
from lfcodec.utils.metrics import lightfield_psnr, psnr, ssim

logger = structlog.get_logger()

MODES = ("all-coded", "rdo", "all-dropped")

STREAM_FILE = "stream.lfbs"
DECISIONS_FILE = "decisions.csv"
RATE_FILE = "rate.json"


@dataclass
class EncodeResult:
    bitstream: Bitstream
    report: RateReport
    decisions: List[ViewDecision]
    reconstructions: Dict[int, View]
    sequence: PseudoSequence

    def save(self, out_dir: Union[str, Path]) -> Path:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        self.bitstream.save(out_dir / STREAM_FILE)
        write_decision_log(self.decisions, out_dir / DECISIONS_FILE)
        (out_dir / RATE_FILE).write_text(self.report.model_dump_json(indent=2))
        return out_dir


def _unmeasured(poc: int, level: int, branch: Branch) -> ViewDecision:
    nan = math.nan
    return ViewDecision(poc, level, branch, nan, nan, nan, nan, nan, nan, False)


def encode_lightfield(
    lightfield: LightField,
    codec_config: CodecConfig,
    mode: str = "rdo",
    lagrangian: Optional[LagrangianConfig] = None,
    model: Optional[GeneratorModel] = None,
) -> EncodeResult:
    """Scan, code levels 0-2, then decide the upper levels per GOP according to mode"""
    if mode not in MODES:
        raise ValueError(f"Unknown mode: {mode}")
    if mode == "rdo" and model is None:
        raise NoModelForQp(codec_config.qp)
    lagrangian = lagrangian or LagrangianConfig()

    sequence = scan_sequence(lightfield.grid_s, lightfield.grid_t, codec_config.scan)
    frames = sequence.frames(lightfield)
    encoder = SequenceEncoder(
        codec_config, lightfield.width, lightfield.height, len(frames), grid=(lightfield.grid_s, lightfield.grid_t)
    )
    layout = encoder.layout
    order = coding_order(layout)

    # levels 0-2 are always coded and are the only synthesis references
    for poc in order:
        if layout.level(poc) not in DROPPABLE_LEVELS:
            encoder.encode(poc, frames[poc])

    synthesizer = None
    if model is not None:
        def synthesizer(poc: int) -> View:
            refs = select_reference_pocs(poc, sequence, layout, model.num_refs)
            return generate_view(
                model, [(encoder.reconstruction(ref), sequence.position(ref)) for ref in refs], sequence.position(poc)
            )

    decisions: List[ViewDecision] = []
    for gop in range(layout.num_gops()):
        members = set(layout.gop_pocs(gop))
        gop_order = [poc for poc in order if poc in members and layout.level(poc) in DROPPABLE_LEVELS]
        if mode == "rdo":
            decisions.extend(decide_gop(gop_order, frames, encoder, synthesizer, lagrangian))
            continue
        for poc in gop_order:
            if mode == "all-dropped":
                encoder.drop(poc)
                decisions.append(_unmeasured(poc, layout.level(poc), Branch.DROPPED))
            else:
                encoder.encode(poc, frames[poc])
                decisions.append(_unmeasured(poc, layout.level(poc), Branch.CODED))
    decisions.sort(key=lambda decision: decision.poc)

    bitstream = encoder.bitstream()
    report = measure_rate(bitstream)
    reconstructions = {poc: encoder.reconstruction(poc) for poc in order if bitstream.unit_for(poc).coded_flag}
    logger.info(
        "Light field encoded",
        mode=mode,
        qp=codec_config.qp,
        views=len(frames),
        dropped=len(bitstream.dropped_pocs()),
        bpp=round(report.bpp, 5),
    )
    return EncodeResult(bitstream, report, decisions, reconstructions, sequence)


def decode_lightfield(
    bitstream: Bitstream, model: Optional[GeneratorModel] = None
) -> Tuple[LightField, Dict[int, View], Set[int]]:
    """Decode coded views, synthesize dropped or stripped ones and restore grid order.

    Returns (light field, decoded views by POC, synthesized POCs).
    """
    header = bitstream.header
    decoded, _ = decode_sequence(bitstream)
    sequence = scan_sequence(header.grid_s, header.grid_t, SCAN_NAMES.get(header.scan, "spiral"))
    layout = build_gop_layout(header.num_frames, header.gop_size)

    missing = sorted(set(range(header.num_frames)) - set(decoded))
    frames = dict(decoded)
    if missing:
        if model is None:
            raise NoModelForQp(header.base_qp)
        frames.update(synthesize_views(model, missing, decoded, sequence, layout))

    logger.info("Light field decoded", decoded=len(decoded), synthesized=len(missing))
    return sequence.assemble(frames), decoded, set(missing)


@dataclass
class EvalResult:
    views: pd.DataFrame
    mean_psnr: float
    lightfield_psnr: float
    mean_ssim: float
    rate_bpp: float

    def summary(self) -> dict:
        return {
            "rate_bpp": self.rate_bpp,
            "mean_psnr_y": self.mean_psnr,
            "lightfield_psnr_y": self.lightfield_psnr,
            "mean_ssim": self.mean_ssim,
        }


def evaluate_lightfield(original: LightField, reconstructed: LightField, report: Optional[RateReport] = None) -> EvalResult:
    """Per-view PSNR/SSIM plus the RD point (rate, mean luma PSNR, mean SSIM)"""
    if (original.grid_s, original.grid_t) != (reconstructed.grid_s, reconstructed.grid_t):
        raise ShapeError(
            f"Grid mismatch: {original.grid_s}x{original.grid_t} vs {reconstructed.grid_s}x{reconstructed.grid_t}"
        )

    rows = []
    for s, t in original.positions():
        a, b = original.view(s, t), reconstructed.view(s, t)
        value = psnr(a, b)
        rows.append({"s": s, "t": t, "psnr_y": value.y, "psnr_cb": value.cb, "psnr_cr": value.cr, "ssim": ssim(a, b)})
    views = pd.DataFrame(rows)

    return EvalResult(
        views=views,
        mean_psnr=float(np.mean(views["psnr_y"])),
        lightfield_psnr=lightfield_psnr(original.views, reconstructed.views),
        mean_ssim=float(np.mean(views["ssim"])),
        rate_bpp=report.bpp if report is not None else math.nan,
    )


def model_filename(regime: str, qp: Optional[int] = None) -> str:
    if regime == "per-qp":
        return f"d2gan_qp{qp}.d2gm"
    if regime == "mixed":
        return "d2gan_mixed.d2gm"
    return "d2gan_original.d2gm"
