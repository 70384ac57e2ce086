"""
Shared fixtures: tiny light fields and networks that keep the suite fast
"""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from lfcodec.models.bitstream import CodecConfig  # noqa: E402
from lfcodec.models.lightfield import View  # noqa: E402
from lfcodec.services.scene_generator import LayerSpec, generate_synthetic_lf  # noqa: E402
from lfcodec.services.synthesizer import GeneratorConfig  # noqa: E402
from lfcodec.services.trainer import TrainConfig  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_view(rng):
    def make(height: int = 16, width: int = 16) -> View:
        return View(rng.integers(0, 256, size=(3, height, width), dtype=np.uint8))

    return make


@pytest.fixture
def flat_lightfield():
    """3x3 grid of identical 16x16 views (zero parallax)"""
    lightfield, _ = generate_synthetic_lf(16, 16, 3, 3, [LayerSpec(seed=7, disparity=0.0)])
    return lightfield


@pytest.fixture
def shifted_lightfield():
    """3x3 grid with one background layer moving one pixel per view"""
    lightfield, _ = generate_synthetic_lf(24, 24, 3, 3, [LayerSpec(seed=11, disparity=1.0)])
    return lightfield


@pytest.fixture
def codec_config():
    return CodecConfig(qp=28, search_range=4)


@pytest.fixture
def tiny_generator_config():
    return GeneratorConfig(
        sweep_levels=3,
        disparity_max=1.0,
        num_refs=2,
        disparity_channels=[4],
        disparity_kernels=[3, 1],
        color_channels=[4],
        color_kernels=[3, 1],
    )


@pytest.fixture
def tiny_train_config(tiny_generator_config):
    return TrainConfig(
        batch_size=2,
        patch_in=12,
        patch_out=8,
        stride=4,
        steps=2,
        log_every=1,
        mixed_qps=[28, 32],
        generator=tiny_generator_config,
        discriminator_channels=[4],
    )
