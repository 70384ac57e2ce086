"""
Flags and helpers shared by every subcommand
"""

import argparse
from pathlib import Path
from typing import Dict, List, Optional

import structlog

from lfcodec.core.config import Settings, load_settings
from lfcodec.core.exceptions import NoModelForQp
from lfcodec.models.run_config import RunConfig
from lfcodec.services.pipeline import model_filename
from lfcodec.services.synthesizer import GeneratorModel
from lfcodec.utils.model_io import load_model

logger = structlog.get_logger()


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat KEY=value configuration file")
    parser.add_argument("--qp", help="QP or comma separated QP list (default from QP_LIST)")
    parser.add_argument("--lambda", dest="lambda_", type=float, help="Lagrangian multiplier (default 0.1)")
    parser.add_argument("--gop", type=int, help="GOP size, a power of two (default 16)")
    parser.add_argument("--mode", choices=["all-coded", "rdo", "all-dropped"], help="encoding mode")
    parser.add_argument("--model", help="model file, or directory of d2gan_*.d2gm files")
    parser.add_argument("--seed", type=int, help="random seed")


def settings_from_args(args: argparse.Namespace) -> Settings:
    """Config file, then environment, then flags (flags win)"""
    return load_settings(
        getattr(args, "config", None),
        QP_LIST=getattr(args, "qp", None),
        LAMBDA=getattr(args, "lambda_", None),
        GOP_SIZE=getattr(args, "gop", None),
        MODE=getattr(args, "mode", None),
        SEED=getattr(args, "seed", None),
    )


def model_paths(model: Optional[str], qps: List[int], settings: Settings) -> Dict[int, str]:
    """Model file per QP: a single file serves every QP, a directory holds d2gan_qp<QP>.d2gm files"""
    location = Path(model) if model else Path(settings.MODEL_DIR)
    if location.is_file():
        return {qp: str(location) for qp in qps}
    paths = {}
    for qp in qps:
        for name in (model_filename("per-qp", qp), model_filename("mixed"), model_filename("original")):
            if (location / name).is_file():
                paths[qp] = str(location / name)
                break
    return paths


def run_config(args: argparse.Namespace, settings: Settings) -> RunConfig:
    qps = settings.qp_values
    return RunConfig(
        mode=settings.MODE,
        qps=qps,
        lambda_=settings.LAMBDA,
        gop_size=settings.GOP_SIZE,
        model_paths=model_paths(getattr(args, "model", None), qps, settings),
        input_path=getattr(args, "input", None),
        output_path=getattr(args, "output", None),
        seed=settings.SEED,
    )


def load_generator(config: RunConfig, qp: int, settings: Settings) -> GeneratorModel:
    path = config.model_for(qp)
    if path is None:
        raise NoModelForQp(qp)
    return load_model(path, sweep_levels=settings.SWEEP_LEVELS, disparity_max=settings.DISPARITY_MAX)
