"""
D2GM generator model files

Layout: magic "D2GM", version u8, regime u8, train_qp u8, tensor count u16,
then per tensor its rank (u8), dims (u32 each) and row-major float32 LE data.
Tensors are (weight, bias) pairs of the disparity network followed by the
colour network; the disparity network ends at its single-channel layer.
"""

import math
import struct
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import structlog

from lfcodec.core.exceptions import ModelFormatError, ModelShapeError
from lfcodec.services.synthesizer import REGIME_CODES, REGIME_NAMES, GeneratorModel, sweep_disparities
from lfcodec.utils.layers import Conv2d, ReLU, Sequential

logger = structlog.get_logger()

MAGIC = b"D2GM"
VERSION = 1
_HEADER = struct.Struct("<4sBBBH")


def save_model(model: GeneratorModel, path: Union[str, Path]) -> None:
    tensors = model.tensors()
    parts = [_HEADER.pack(MAGIC, VERSION, REGIME_CODES[model.regime], model.train_qp, len(tensors))]
    for tensor in tensors:
        parts.append(struct.pack("<B", tensor.ndim))
        parts.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        parts.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(b"".join(parts))
    logger.info("Model saved", path=str(path), regime=model.regime, train_qp=model.train_qp, tensors=len(tensors))


def _read_tensors(data: bytes, count: int) -> List[np.ndarray]:
    tensors = []
    offset = _HEADER.size
    for _ in range(count):
        if offset + 1 > len(data):
            raise ModelFormatError("Truncated tensor header")
        (rank,) = struct.unpack_from("<B", data, offset)
        offset += 1
        if offset + 4 * rank > len(data):
            raise ModelFormatError("Truncated tensor dimensions")
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        values = math.prod(dims)
        if values > (len(data) - offset) // 4:
            raise ModelFormatError(f"Tensor dimensions {dims} exceed the remaining data")
        tensors.append(np.frombuffer(data, dtype="<f4", count=values, offset=offset).reshape(dims).astype(np.float32))
        offset += 4 * values
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after the last tensor")
    return tensors


def _conv_chain(pairs) -> Sequential:
    layers = []
    for i, (weight, bias) in enumerate(pairs):
        if weight.ndim != 4 or bias.shape != (weight.shape[0],) or weight.shape[2] != weight.shape[3]:
            raise ModelShapeError(f"Tensor pair {i} is not a square convolution with matching bias")
        conv = Conv2d(weight.shape[1], weight.shape[0], weight.shape[2], zero_init=True)
        conv.params = {"weight": weight, "bias": bias}
        layers.append(conv)
        if i < len(pairs) - 1:
            layers.append(ReLU())
    return Sequential(layers)


def load_model(
    path: Union[str, Path], sweep_levels: Optional[int] = None, disparity_max: float = 2.0
) -> GeneratorModel:
    """Load a generator; sweep_levels, when given, must match the stored network"""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ModelFormatError("File shorter than the model header")
    magic, version, regime, train_qp, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ModelFormatError(f"Bad magic {magic!r}")
    if version != VERSION:
        raise ModelFormatError(f"Unsupported model version {version}")
    if regime not in REGIME_NAMES:
        raise ModelFormatError(f"Unknown regime code {regime}")
    if count == 0 or count % 2:
        raise ModelShapeError(f"Expected weight/bias pairs, got {count} tensors")

    tensors = _read_tensors(data, count)
    pairs = list(zip(tensors[0::2], tensors[1::2]))
    split = next((i + 1 for i, (weight, _) in enumerate(pairs) if weight.ndim == 4 and weight.shape[0] == 1), None)
    if split is None or split == len(pairs):
        raise ModelShapeError("Model has no single-channel disparity output followed by a colour network")

    disparity_net = _conv_chain(pairs[:split])
    color_net = _conv_chain(pairs[split:])
    feature_channels = disparity_net.convolutions()[0].in_channels
    if feature_channels % 2:
        raise ModelShapeError(f"Odd number of feature channels: {feature_channels}")
    stored_levels = feature_channels // 2
    if sweep_levels is not None and sweep_levels != stored_levels:
        raise ModelShapeError(f"Model was trained with {stored_levels} sweep levels, configuration asks for {sweep_levels}")

    model = GeneratorModel(
        disparity_net,
        color_net,
        sweep_disparities(stored_levels, disparity_max),
        regime=REGIME_NAMES[regime],
        train_qp=train_qp,
    )
    logger.info("Model loaded", path=str(path), regime=model.regime, train_qp=train_qp)
    return model
