"""
D2GAN training: patch sampling, alternating updates and training regimes
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field, field_validator, model_validator

from lfcodec.core.exceptions import DomainError, LFCodecError, ModelShapeError, NumericalDivergence, PatchTooLarge
from lfcodec.models.bitstream import CodecConfig
from lfcodec.models.lightfield import LightField
from lfcodec.services.codec import DROPPABLE_LEVELS, encode_sequence
from lfcodec.services.d2gan import GeneratorLoss, loss_d1, loss_d2, loss_g
from lfcodec.services.sequencing import build_gop_layout, scan_sequence
from lfcodec.services.synthesizer import (
    REGIME_CODES,
    DiscriminatorModel,
    GeneratorConfig,
    GeneratorModel,
    select_reference_pocs,
)
from lfcodec.utils.layers import DEFAULT_DTYPE, Params, copy_params
from lfcodec.utils.optim import Adam, AdamState

logger = structlog.get_logger()

LOSS_COLUMNS = ["step", "loss_d1", "loss_d2", "loss_g_adv", "loss_rec"]


class TrainConfig(BaseModel):
    """Optimiser, patch and regime settings for one training run"""

    alpha: float = Field(0.2, gt=0.0, le=1.0)
    beta: float = Field(0.2, gt=0.0, le=1.0)
    learning_rate: float = Field(0.0002, gt=0.0)
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = Field(10, ge=1)
    patch_in: int = 60
    patch_out: int = 36
    stride: int = Field(16, ge=1)
    recon_weight: float = Field(10.0, ge=0.0)
    steps: int = Field(2000, ge=0)
    regime: str = "per-qp"
    mixed_qps: List[int] = Field(default_factory=lambda: [18, 24, 28, 32])
    seed: int = 0
    log_every: int = Field(100, ge=1)
    generator: GeneratorConfig = Field(default_factory=GeneratorConfig)
    discriminator_channels: List[int] = Field(default_factory=lambda: [16, 32, 64])

    @field_validator("regime")
    @classmethod
    def _known_regime(cls, value: str) -> str:
        if value not in REGIME_CODES:
            raise ValueError(f"Unknown training regime: {value}")
        return value

    @model_validator(mode="after")
    def _patch_sizes(self) -> "TrainConfig":
        if self.patch_out >= self.patch_in:
            raise ValueError("patch_out must be smaller than patch_in")
        return self

    @classmethod
    def from_settings(cls, settings, **overrides) -> "TrainConfig":
        values = dict(
            alpha=settings.ALPHA,
            beta=settings.BETA,
            learning_rate=settings.LEARNING_RATE,
            adam_beta1=settings.ADAM_BETA1,
            adam_beta2=settings.ADAM_BETA2,
            adam_eps=settings.ADAM_EPS,
            batch_size=settings.BATCH_SIZE,
            patch_in=settings.PATCH_IN,
            patch_out=settings.PATCH_OUT,
            stride=settings.PATCH_STRIDE,
            recon_weight=settings.RECON_WEIGHT,
            steps=settings.TRAIN_STEPS,
            regime=settings.TRAIN_REGIME,
            mixed_qps=settings.qp_values,
            seed=settings.SEED,
            generator=GeneratorConfig.from_settings(settings),
        )
        values.update(overrides)
        return cls(**values)

    def optimizer(self) -> Adam:
        return Adam(self.learning_rate, self.adam_beta1, self.adam_beta2, self.adam_eps)


@dataclass
class D2GanModels:
    """Generator, both discriminators and their optimiser states"""

    generator: GeneratorModel
    d1: DiscriminatorModel
    d2: DiscriminatorModel
    g_state: AdamState
    d1_state: AdamState
    d2_state: AdamState

    @classmethod
    def create(cls, config: TrainConfig, train_qp: int = 0, dtype=DEFAULT_DTYPE) -> "D2GanModels":
        generator = GeneratorModel.create(config.generator, config.seed, config.regime, train_qp, dtype)
        channels = config.discriminator_channels
        return cls(
            generator=generator,
            d1=DiscriminatorModel.create(config.patch_out, channels, seed=config.seed + 1, dtype=dtype),
            d2=DiscriminatorModel.create(config.patch_out, channels, seed=config.seed + 2, dtype=dtype),
            g_state=AdamState(),
            d1_state=AdamState(),
            d2_state=AdamState(),
        )

    def snapshot(self) -> Tuple[Params, Params, Params, AdamState, AdamState, AdamState]:
        return (
            copy_params(self.generator.params),
            copy_params(self.d1.params),
            copy_params(self.d2.params),
            self.g_state.copy(),
            self.d1_state.copy(),
            self.d2_state.copy(),
        )

    def restore(self, snapshot) -> None:
        g_params, d1_params, d2_params, g_state, d1_state, d2_state = snapshot
        self.generator.load_params(g_params)
        self.d1.load_params(d1_params)
        self.d2.load_params(d2_params)
        self.g_state, self.d1_state, self.d2_state = g_state, d1_state, d2_state


class Batch(NamedTuple):
    """M training patches: full reference views plus target crops"""

    references: np.ndarray  # (M, R, 3, H, W)
    ref_positions: np.ndarray  # (M, R, 2)
    target_positions: np.ndarray  # (M, 2)
    origins: np.ndarray  # (M, 2) top-left of the input patch
    targets: np.ndarray  # (M, 3, patch_out, patch_out)


class StepLosses(NamedTuple):
    loss_d1: float
    loss_d2: float
    loss_g_adv: float
    loss_rec: float


def _output_geometry(generator: GeneratorModel, config: TrainConfig) -> Tuple[int, int]:
    """(size of the generator output region, offset of the target crop inside it)"""
    margin = generator.margin
    out_size = config.patch_in - 2 * margin
    crop = (config.patch_in - config.patch_out) // 2 - margin
    if out_size <= 0 or crop < 0:
        raise ModelShapeError(
            f"Generator consumes {margin} px per side; patch_in {config.patch_in} cannot yield patch_out {config.patch_out}"
        )
    return out_size, crop


def synthesize_batch(generator: GeneratorModel, batch: Batch, config: TrainConfig):
    """Generator output cropped to the target patches, plus what backward needs"""
    out_size, crop = _output_geometry(generator, config)
    origins = batch.origins + generator.margin
    full, cache = generator.forward(
        batch.references, batch.ref_positions, batch.target_positions, origins, (out_size, out_size)
    )
    size = config.patch_out
    return full[:, :, crop:crop + size, crop:crop + size], (cache, full.shape, crop)


def _accumulate(first: Params, second: Params) -> Params:
    return {key: first[key] + second[key] for key in first}


def d1_objective(d1: DiscriminatorModel, real: np.ndarray, fake: np.ndarray, alpha: float) -> Tuple[float, Params]:
    """Value of the D1 objective and its gradient w.r.t. the D1 parameters"""
    real_scores, real_cache = d1.forward(real)
    fake_scores, fake_cache = d1.forward(fake)
    loss = loss_d1(real_scores, fake_scores, alpha)
    _, real_grads = d1.backward(real_cache, loss.grad_real.astype(real_scores.dtype))
    _, fake_grads = d1.backward(fake_cache, loss.grad_fake.astype(fake_scores.dtype))
    return loss.value, _accumulate(real_grads, fake_grads)


def d2_objective(d2: DiscriminatorModel, real: np.ndarray, fake: np.ndarray, beta: float) -> Tuple[float, Params]:
    real_scores, real_cache = d2.forward(real)
    fake_scores, fake_cache = d2.forward(fake)
    loss = loss_d2(real_scores, fake_scores, beta)
    _, real_grads = d2.backward(real_cache, loss.grad_real.astype(real_scores.dtype))
    _, fake_grads = d2.backward(fake_cache, loss.grad_fake.astype(fake_scores.dtype))
    return loss.value, _accumulate(real_grads, fake_grads)


def generator_objective(
    generator: GeneratorModel,
    d1: DiscriminatorModel,
    d2: DiscriminatorModel,
    batch: Batch,
    config: TrainConfig,
    synthesized=None,
) -> Tuple[GeneratorLoss, Params]:
    """Adversarial plus reconstruction loss and its gradient through both generator CNNs"""
    if synthesized is None:
        synthesized = synthesize_batch(generator, batch, config)
    fake, (cache, full_shape, crop) = synthesized

    d1_scores, d1_cache = d1.forward(fake)
    d2_scores, d2_cache = d2.forward(fake)
    loss = loss_g(d1_scores, d2_scores, config.beta, fake, batch.targets, config.recon_weight)

    grad_fake, _ = d1.backward(d1_cache, loss.grad_d1_fake.astype(d1_scores.dtype))
    grad_d2, _ = d2.backward(d2_cache, loss.grad_d2_fake.astype(d2_scores.dtype))
    grad_fake = grad_fake + grad_d2 + loss.grad_synthesized

    grad_full = np.zeros(full_shape, dtype=np.result_type(fake.dtype, grad_fake.dtype))
    size = config.patch_out
    grad_full[:, :, crop:crop + size, crop:crop + size] = grad_fake
    return loss, generator.backward(cache, grad_full)


def _check_finite(name: str, grads: Params) -> None:
    for key, value in grads.items():
        if not np.all(np.isfinite(value)):
            raise NumericalDivergence(f"Non-finite gradient in {name} parameter {key}")


def train_step(models: D2GanModels, batch: Batch, config: TrainConfig) -> StepLosses:
    """One ascent step on D1, one on D2, then one descent step on G.

    On a non-finite gradient or score every parameter and optimiser state is restored
    and NumericalDivergence is raised.
    """
    optimizer = config.optimizer()
    snapshot = models.snapshot()
    try:
        synthesized = synthesize_batch(models.generator, batch, config)
        fake = synthesized[0]
        real = batch.targets.astype(fake.dtype)

        value_d1, grads_d1 = d1_objective(models.d1, real, fake, config.alpha)
        _check_finite("D1", grads_d1)
        optimizer.step(models.d1.params, grads_d1, models.d1_state, ascent=True)

        value_d2, grads_d2 = d2_objective(models.d2, real, fake, config.beta)
        _check_finite("D2", grads_d2)
        optimizer.step(models.d2.params, grads_d2, models.d2_state, ascent=True)

        # G is unchanged so far; its forward pass is reused against the updated discriminators
        loss, grads_g = generator_objective(models.generator, models.d1, models.d2, batch, config, synthesized)
        _check_finite("G", grads_g)
        optimizer.step(models.generator.params, grads_g, models.g_state)
    except (NumericalDivergence, DomainError, FloatingPointError) as e:
        models.restore(snapshot)
        logger.error("Training step diverged", step=models.g_state.step + 1, error=str(e))
        if isinstance(e, NumericalDivergence):
            raise
        raise NumericalDivergence(str(e)) from e

    return StepLosses(value_d1, value_d2, loss.adversarial, loss.reconstruction)


# Training data

def patch_origins(height: int, width: int, patch_in: int, stride: int) -> List[Tuple[int, int]]:
    if patch_in > height or patch_in > width:
        raise PatchTooLarge(f"Patch of {patch_in} px does not fit {height}x{width} views")
    return [(y, x) for y in range(0, height - patch_in + 1, stride) for x in range(0, width - patch_in + 1, stride)]


class PatchSample(NamedTuple):
    source: int
    target_poc: int
    ref_pocs: Tuple[int, ...]
    origin: Tuple[int, int]


@dataclass
class TrainingSource:
    """One light field as seen by the generator: reference-side frames and pristine targets"""

    references: np.ndarray  # (F, 3, H, W), possibly decoded
    originals: np.ndarray  # (F, 3, H, W)
    positions: np.ndarray  # (F, 2)


class PatchDataset:
    """Patch samples over droppable target views of every training source"""

    def __init__(self, sources: Sequence[TrainingSource], samples: Sequence[PatchSample]):
        if not samples:
            raise LFCodecError("Training set has no patches")
        self.sources = list(sources)
        self.samples = list(samples)

    def __len__(self) -> int:
        return len(self.samples)

    def batch(self, indices: Sequence[int], patch_in: int, patch_out: int) -> Batch:
        picked = [self.samples[i] for i in indices]
        crop = (patch_in - patch_out) // 2
        references, ref_positions, target_positions, origins, targets = [], [], [], [], []
        for sample in picked:
            source = self.sources[sample.source]
            refs = list(sample.ref_pocs)
            references.append(source.references[refs])
            ref_positions.append(source.positions[refs])
            target_positions.append(source.positions[sample.target_poc])
            origins.append(sample.origin)
            y, x = sample.origin[0] + crop, sample.origin[1] + crop
            targets.append(source.originals[sample.target_poc, :, y:y + patch_out, x:x + patch_out])
        return Batch(
            np.stack(references),
            np.stack(ref_positions),
            np.stack(target_positions),
            np.asarray(origins, dtype=np.int64),
            np.stack(targets),
        )


def build_dataset(
    lightfields: Sequence[LightField],
    reference_sets: Sequence[Sequence[Dict[int, object]]],
    config: TrainConfig,
    gop_size: int = 16,
    scan: str = "spiral",
    dtype=DEFAULT_DTYPE,
) -> PatchDataset:
    """Patches of every droppable view, one source per (light field, reference variant)"""
    sources: List[TrainingSource] = []
    samples: List[PatchSample] = []
    for lightfield, variants in zip(lightfields, reference_sets):
        sequence = scan_sequence(lightfield.grid_s, lightfield.grid_t, scan)
        layout = build_gop_layout(len(sequence), gop_size)
        originals = np.stack([view.as_float() for view in sequence.frames(lightfield)]).astype(dtype)
        positions = np.array([sequence.position(poc) for poc in range(len(sequence))], dtype=np.float64)
        origins = patch_origins(lightfield.height, lightfield.width, config.patch_in, config.stride)
        targets = [poc for poc in range(len(sequence)) if layout.level(poc) in DROPPABLE_LEVELS]

        for frames in variants:
            references = np.stack([frames[poc].as_float() for poc in range(len(sequence))]).astype(dtype)
            sources.append(TrainingSource(references, originals, positions))
            for poc in targets:
                refs = tuple(select_reference_pocs(poc, sequence, layout, config.generator.num_refs))
                samples.extend(PatchSample(len(sources) - 1, poc, refs, origin) for origin in origins)

    logger.info("Training set built", sources=len(sources), patches=len(samples))
    return PatchDataset(sources, samples)


def reference_variants(
    lightfield: LightField,
    regime: str,
    qp: Optional[int],
    config: TrainConfig,
    codec_config: CodecConfig,
) -> List[Dict[int, object]]:
    """Reference frames per regime: pristine, decoded at one QP, or pristine plus several QPs"""
    sequence = scan_sequence(lightfield.grid_s, lightfield.grid_t, codec_config.scan)
    frames = sequence.frames(lightfield)
    pristine = dict(enumerate(frames))

    def decoded(at_qp: int) -> Dict[int, object]:
        _, _, recon = encode_sequence(
            frames, codec_config.model_copy(update={"qp": at_qp}), grid=(lightfield.grid_s, lightfield.grid_t)
        )
        return recon

    if regime == "original":
        return [pristine]
    if regime == "per-qp":
        if qp is None:
            raise ValueError("The per-qp regime needs a QP")
        return [decoded(qp)]
    return [pristine] + [decoded(mixed_qp) for mixed_qp in config.mixed_qps]


def train(
    dataset: Sequence[LightField],
    regime: str,
    qp: Optional[int],
    config: TrainConfig,
    codec_config: Optional[CodecConfig] = None,
    loss_log: Optional[Union[str, Path]] = None,
) -> Tuple[GeneratorModel, pd.DataFrame]:
    """Train a generator for one regime (and QP); returns the model and its loss history"""
    if not dataset:
        raise LFCodecError("Training needs at least one light field")
    config = config.model_copy(update={"regime": regime})
    codec_config = codec_config or CodecConfig()

    reference_sets = [reference_variants(lf, regime, qp, config, codec_config) for lf in dataset]
    patches = build_dataset(dataset, reference_sets, config, codec_config.gop_size, codec_config.scan)
    models = D2GanModels.create(config, train_qp=qp if qp is not None else 0)
    rng = np.random.default_rng(config.seed)

    rows = []
    for step in range(1, config.steps + 1):
        indices = rng.integers(0, len(patches), size=config.batch_size)
        batch = patches.batch(indices, config.patch_in, config.patch_out)
        losses = train_step(models, batch, config)
        rows.append((step, *losses))
        if step % config.log_every == 0 or step == config.steps:
            logger.info(
                "Training progress",
                regime=regime,
                qp=qp,
                step=step,
                loss_d1=round(losses.loss_d1, 5),
                loss_d2=round(losses.loss_d2, 5),
                loss_rec=round(losses.loss_rec, 5),
            )

    history = pd.DataFrame(rows, columns=LOSS_COLUMNS)
    if loss_log is not None:
        Path(loss_log).parent.mkdir(parents=True, exist_ok=True)
        history.to_csv(loss_log, index=False)

    logger.info("Training finished", regime=regime, qp=qp, steps=config.steps)
    return models.generator, history
