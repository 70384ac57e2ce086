"""
encode / decode subcommands
"""

import argparse
from pathlib import Path

import structlog

from lfcodec.cli.common import add_common_flags, load_generator, model_paths, run_config, settings_from_args
from lfcodec.core.exceptions import NoModelForQp
from lfcodec.models.bitstream import Bitstream, CodecConfig
from lfcodec.models.decision import LagrangianConfig
from lfcodec.services.pipeline import STREAM_FILE, decode_lightfield, encode_lightfield
from lfcodec.utils.image_io import load_lightfield_dir, save_lightfield
from lfcodec.utils.model_io import load_model

logger = structlog.get_logger()


def cmd_encode(args: argparse.Namespace) -> int:
    """Encode a light field once per QP into <output>/qp<QP>/"""
    settings = settings_from_args(args)
    config = run_config(args, settings)
    config.require_models()

    lightfield = load_lightfield_dir(args.input)
    out_root = Path(args.output or settings.OUTPUT_DIR)
    lagrangian = LagrangianConfig(lambda_=config.lambda_)

    for qp in config.qps:
        codec_config = CodecConfig.from_settings(settings, qp=qp)
        model = load_generator(config, qp, settings) if config.mode == "rdo" else None
        result = encode_lightfield(lightfield, codec_config, config.mode, lagrangian, model)
        out_dir = result.save(out_root / f"qp{qp}")
        logger.info(
            "Encode outputs written",
            directory=str(out_dir),
            qp=qp,
            bits=result.report.total_bits,
            dropped=len(result.bitstream.dropped_pocs()),
        )
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    """Decode a stream (file or encode output directory) into view files"""
    settings = settings_from_args(args)
    source = Path(args.input)
    stream_path = source / STREAM_FILE if source.is_dir() else source
    bitstream = Bitstream.load(stream_path)

    model = None
    coded = sum(unit.coded_flag for unit in bitstream.units)
    if coded < bitstream.header.num_frames:
        qp = bitstream.header.base_qp
        path = model_paths(args.model, [qp], settings).get(qp)
        if path is None:
            logger.error("No model for dropped views", stream=str(stream_path), qp=qp, model=args.model)
            raise NoModelForQp(qp)
        model = load_model(path, sweep_levels=settings.SWEEP_LEVELS, disparity_max=settings.DISPARITY_MAX)

    lightfield, _, synthesized = decode_lightfield(bitstream, model)
    out_dir = Path(args.output or stream_path.parent / "decoded")
    save_lightfield(lightfield, out_dir)
    logger.info("Decode outputs written", directory=str(out_dir), synthesized=sorted(synthesized))
    return 0


def register(subparsers) -> None:
    encode = subparsers.add_parser("encode", help="encode a light field directory")
    encode.add_argument("--input", required=True, help="directory of view_SS_TT.ppm files")
    encode.add_argument("--output", help="output root (per-QP subdirectories)")
    add_common_flags(encode)
    encode.set_defaults(handler=cmd_encode)

    decode = subparsers.add_parser("decode", help="decode a stream and synthesize dropped views")
    decode.add_argument("--input", required=True, help="stream.lfbs file or encode output directory")
    decode.add_argument("--output", help="directory for the reconstructed views")
    add_common_flags(decode)
    decode.set_defaults(handler=cmd_decode)
