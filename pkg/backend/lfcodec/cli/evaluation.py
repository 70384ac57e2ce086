"""
eval / bd subcommands
"""

import argparse
import json
import math
from pathlib import Path
from typing import List, Optional

import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict

from lfcodec.cli.common import add_common_flags, settings_from_args
from lfcodec.models.bitstream import RateReport
from lfcodec.services.pipeline import RATE_FILE, evaluate_lightfield
from lfcodec.utils.image_io import load_lightfield_dir
from lfcodec.utils.metrics import append_rd_point, bd_quality, bd_rate, load_curves
from lfcodec.utils.plotting import plot_rd_curves

logger = structlog.get_logger()


class BdRecord(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    anchor: str
    test: str
    metric: str
    bd_rate_pct: float
    bd_quality: float


class BdReport(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    records: List[BdRecord]


def _qp_from(args: argparse.Namespace, rate_path: Path, settings) -> int:
    if args.qp:
        return int(str(args.qp).split(",")[0])
    name = rate_path.parent.name
    if name.startswith("qp") and name[2:].isdigit():
        return int(name[2:])
    return settings.qp_values[0]


def cmd_eval(args: argparse.Namespace) -> int:
    """Compare reconstructed views with the originals and append one RD point"""
    settings = settings_from_args(args)
    original = load_lightfield_dir(args.original)
    reconstructed = load_lightfield_dir(args.reconstructed)

    rate_path = Path(args.rate) if args.rate else Path(args.reconstructed).parent / RATE_FILE
    report: Optional[RateReport] = None
    if rate_path.exists():
        report = RateReport.model_validate_json(rate_path.read_text())

    result = evaluate_lightfield(original, reconstructed, report)
    views_path = Path(args.views) if args.views else Path(args.reconstructed) / "quality.csv"
    views_path.parent.mkdir(parents=True, exist_ok=True)
    result.views.to_csv(views_path, index=False)

    if args.curve and report is not None:
        qp = _qp_from(args, rate_path, settings)
        append_rd_point(args.curve, result.rate_bpp, result.mean_psnr, result.mean_ssim, qp)

    summary = result.summary()
    print(json.dumps({key: (None if isinstance(v, float) and math.isnan(v) else v) for key, v in summary.items()}))
    logger.info("Evaluation finished", views=str(views_path), **summary)
    return 0


def cmd_bd(args: argparse.Namespace) -> int:
    """BD-rate and BD-quality of a test curve against an anchor, plus RD plots"""
    anchor = load_curves(args.anchor, args.anchor_label or "")
    test = load_curves(args.test, args.test_label or "")
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)

    records = []
    for metric in ("psnr", "ssim"):
        if metric not in anchor or metric not in test:
            continue
        a, t = anchor[metric], test[metric]
        records.append(
            BdRecord(anchor=a.label, test=t.label, metric=metric, bd_rate_pct=bd_rate(a, t), bd_quality=bd_quality(a, t))
        )
        plot_rd_curves([a, t], out_dir / f"rd_{metric}.svg", "PSNR-Y [dB]" if metric == "psnr" else "SSIM-Y")

    report = BdReport(records=records)
    (out_dir / "bd.json").write_text(report.model_dump_json(indent=2))

    frames = []
    for label, path in ((anchor["psnr"].label, args.anchor), (test["psnr"].label, args.test)):
        frame = pd.read_csv(path)
        frame.insert(0, "label", label)
        frames.append(frame)
    pd.concat(frames, ignore_index=True).to_csv(out_dir / "curves.csv", index=False)

    for record in records:
        logger.info("Bjontegaard delta", **record.model_dump())
    print(report.model_dump_json())
    return 0


def register(subparsers) -> None:
    evaluate = subparsers.add_parser("eval", help="measure a reconstruction and append an RD point")
    evaluate.add_argument("--original", required=True, help="original light field directory")
    evaluate.add_argument("--reconstructed", required=True, help="decoded light field directory")
    evaluate.add_argument("--rate", help="rate.json of the stream (default: next to the reconstruction)")
    evaluate.add_argument("--curve", help="RD-curve CSV to append to")
    evaluate.add_argument("--views", help="per-view quality CSV (default: <reconstructed>/quality.csv)")
    add_common_flags(evaluate)
    evaluate.set_defaults(handler=cmd_eval)

    bd = subparsers.add_parser("bd", help="Bjontegaard deltas between two RD curves")
    bd.add_argument("--anchor", required=True, help="anchor RD-curve CSV")
    bd.add_argument("--test", required=True, help="test RD-curve CSV")
    bd.add_argument("--anchor-label", help="anchor name in reports (default: file stem)")
    bd.add_argument("--test-label", help="test name in reports (default: file stem)")
    bd.add_argument("--output", required=True, help="report directory")
    add_common_flags(bd)
    bd.set_defaults(handler=cmd_bd)
