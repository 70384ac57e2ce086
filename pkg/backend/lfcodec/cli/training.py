"""
train / synth-data subcommands
"""

import argparse
from pathlib import Path
from typing import List

import structlog

from lfcodec.cli.common import add_common_flags, settings_from_args
from lfcodec.core.exceptions import FormatError
from lfcodec.models.bitstream import CodecConfig
from lfcodec.models.lightfield import LightField
from lfcodec.services.pipeline import model_filename
from lfcodec.services.scene_generator import LayerSpec, generate_synthetic_lf
from lfcodec.services.trainer import TrainConfig, train
from lfcodec.utils.image_io import DISPARITY_FILE, load_lightfield_dir, save_lightfield, write_disparity_map
from lfcodec.utils.model_io import save_model

logger = structlog.get_logger()


def _has_views(directory: Path) -> bool:
    return any(directory.glob("view_*_*.ppm"))


def load_corpus(directory: Path) -> List[LightField]:
    """A light field directory, or a directory of light field subdirectories"""
    if _has_views(directory):
        return [load_lightfield_dir(directory)]
    lightfields = [load_lightfield_dir(sub) for sub in sorted(directory.iterdir()) if sub.is_dir() and _has_views(sub)]
    if not lightfields:
        raise FormatError(f"No light fields found under {directory}")
    return lightfields


def cmd_train(args: argparse.Namespace) -> int:
    settings = settings_from_args(args)
    overrides = {}
    if args.steps is not None:
        overrides["steps"] = args.steps
    config = TrainConfig.from_settings(settings, **overrides)
    regime = args.regime or settings.TRAIN_REGIME

    corpus = load_corpus(Path(args.data or settings.DATA_DIR))
    model_dir = Path(args.output or settings.MODEL_DIR)
    codec_config = CodecConfig.from_settings(settings)

    runs = [(qp, model_filename("per-qp", qp), f"loss_qp{qp}.csv") for qp in settings.qp_values]
    if regime != "per-qp":
        runs = [(None, model_filename(regime), f"loss_{regime}.csv")]

    for qp, filename, loss_name in runs:
        model, history = train(corpus, regime, qp, config, codec_config, loss_log=model_dir / loss_name)
        save_model(model, model_dir / filename)
        logger.info(
            "Model trained",
            regime=regime,
            qp=qp,
            path=str(model_dir / filename),
            final_loss_rec=float(history["loss_rec"].iloc[-1]) if len(history) else None,
        )
    return 0


def parse_disparities(raw: str) -> List[float]:
    return [float(item) for item in raw.split(",") if item.strip()]


def cmd_synth_data(args: argparse.Namespace) -> int:
    """Render deterministic layered light fields into <output>/lf_NNN/"""
    settings = settings_from_args(args)
    seed = settings.SEED
    out_root = Path(args.output or settings.DATA_DIR)
    disparities = parse_disparities(args.disparity)

    for index in range(args.count):
        layers = [LayerSpec(seed=seed * 1000 + index * 16 + j, disparity=d) for j, d in enumerate(disparities)]
        lightfield, disparity = generate_synthetic_lf(
            args.width,
            args.height,
            args.grid_s,
            args.grid_t,
            layers,
            noise=args.noise,
            noise_seed=seed * 1000 + index,
        )
        directory = save_lightfield(lightfield, out_root / f"lf_{index:03}")
        write_disparity_map(disparity, directory / DISPARITY_FILE)
    logger.info("Synthetic corpus written", directory=str(out_root), count=args.count)
    return 0


def register(subparsers) -> None:
    trainer = subparsers.add_parser("train", help="train D2GAN generators")
    trainer.add_argument("--data", help="light field directory or corpus of light field directories")
    trainer.add_argument("--output", help="model directory")
    trainer.add_argument("--regime", choices=["original", "mixed", "per-qp"], help="training regime")
    trainer.add_argument("--steps", type=int, help="optimiser steps per model")
    add_common_flags(trainer)
    trainer.set_defaults(handler=cmd_train)

    synth = subparsers.add_parser("synth-data", help="generate a synthetic light field corpus")
    synth.add_argument("--output", help="corpus directory")
    synth.add_argument("--width", type=int, default=64)
    synth.add_argument("--height", type=int, default=64)
    synth.add_argument("--grid-s", type=int, default=5)
    synth.add_argument("--grid-t", type=int, default=5)
    synth.add_argument("--count", type=int, default=1)
    synth.add_argument("--disparity", default="0.0", help="comma separated layer disparities, background first")
    synth.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sigma in 8-bit units")
    add_common_flags(synth)
    synth.set_defaults(handler=cmd_synth_data)
