"""
View synthesis: plane-sweep features, disparity CNN, backward warping and colour CNN
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, Field, model_validator

from lfcodec.core.exceptions import ModelShapeError, NoReferences
from lfcodec.models.lightfield import GopLayout, PseudoSequence, View
from lfcodec.utils.layers import (
    DEFAULT_DTYPE,
    Conv2d,
    Dense,
    Flatten,
    LeakyReLU,
    Params,
    Sequential,
    Softplus,
    conv_stack,
)
from lfcodec.utils.warping import bilinear_warp, bilinear_warp_backward

logger = structlog.get_logger()

Position = Tuple[float, float]

# levels that are always coded and therefore usable as synthesis references
REFERENCE_LEVELS = (0, 1, 2)

REGIME_CODES = {"original": 0, "mixed": 1, "per-qp": 2}
REGIME_NAMES = {code: name for name, code in REGIME_CODES.items()}


class GeneratorConfig(BaseModel):
    """Architecture of the two generator CNNs"""

    sweep_levels: int = Field(9, ge=1)
    disparity_max: float = Field(2.0, ge=0.0)
    num_refs: int = Field(4, ge=1)
    disparity_channels: List[int] = Field(default_factory=lambda: [64, 32, 16])
    disparity_kernels: List[int] = Field(default_factory=lambda: [7, 5, 3, 1])
    color_channels: List[int] = Field(default_factory=lambda: [32, 16])
    color_kernels: List[int] = Field(default_factory=lambda: [7, 3, 1])

    @model_validator(mode="after")
    def _chain_lengths(self) -> "GeneratorConfig":
        if len(self.disparity_channels) + 1 != len(self.disparity_kernels):
            raise ValueError("disparity_kernels needs one entry per hidden layer plus the output layer")
        if len(self.color_channels) + 1 != len(self.color_kernels):
            raise ValueError("color_kernels needs one entry per hidden layer plus the output layer")
        for kernel in self.disparity_kernels + self.color_kernels:
            if kernel < 1 or kernel % 2 == 0:
                raise ValueError(f"Kernel sizes must be odd, got {kernel}")
        return self

    @classmethod
    def from_settings(cls, settings, **overrides) -> "GeneratorConfig":
        values = dict(
            sweep_levels=settings.SWEEP_LEVELS,
            disparity_max=settings.DISPARITY_MAX,
            num_refs=settings.NUM_REFS,
        )
        values.update(overrides)
        return cls(**values)


def sweep_disparities(levels: int, disparity_max: float) -> np.ndarray:
    if levels == 1:
        return np.zeros(1)
    return np.linspace(-disparity_max, disparity_max, levels)


def _as_float(reference) -> np.ndarray:
    return reference.as_float() if isinstance(reference, View) else np.asarray(reference)


def extract_features(
    refs: Sequence[Tuple[object, Position]],
    target_pos: Position,
    sweep: Sequence[float],
    origin: Tuple[int, int] = (0, 0),
    shape: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """Plane-sweep statistics: per level, mean and std of the warped reference lumas.

    refs are (view, (s, t)) pairs; views may be View objects or normalised
    (3, H, W) float arrays. Returns (2 * len(sweep), h, w) with the mean
    channel of each level followed by its std channel.
    """
    if not refs:
        raise NoReferences("Feature extraction needs at least one reference view")
    lumas = [_as_float(view)[:1] for view, _ in refs]
    if shape is None:
        shape = lumas[0].shape[1:]

    channels = []
    for disparity in sweep:
        warped = np.stack(
            [
                bilinear_warp(luma, float(disparity), _delta(pos, target_pos), origin, shape)[0][0]
                for luma, (_, pos) in zip(lumas, refs)
            ]
        )
        channels.append(warped.mean(axis=0))
        channels.append(warped.std(axis=0))
    return np.stack(channels)


def _delta(source: Position, target: Position) -> Tuple[float, float]:
    return float(target[0] - source[0]), float(target[1] - source[1])


@dataclass
class GeneratorCache:
    disparity_cache: list
    color_cache: list
    warp_caches: list
    num_refs: int
    offset: int


class GeneratorModel:
    """Disparity CNN -> warp of every reference -> colour CNN correcting the warped mean"""

    def __init__(
        self,
        disparity_net: Sequential,
        color_net: Sequential,
        sweep: Sequence[float],
        regime: str = "per-qp",
        train_qp: int = 0,
    ):
        self.disparity_net = disparity_net
        self.color_net = color_net
        self.sweep = np.asarray(sweep, dtype=np.float64)
        self.regime = regime
        self.train_qp = train_qp
        self._check_chain()

    @classmethod
    def create(
        cls,
        config: GeneratorConfig,
        seed: int = 0,
        regime: str = "per-qp",
        train_qp: int = 0,
        dtype=DEFAULT_DTYPE,
    ) -> "GeneratorModel":
        rng = np.random.default_rng(seed)
        disparity_net = conv_stack(
            [2 * config.sweep_levels, *config.disparity_channels, 1], config.disparity_kernels, rng, dtype, zero_last=True
        )
        color_net = conv_stack(
            [3 * config.num_refs + 2, *config.color_channels, 3], config.color_kernels, rng, dtype, zero_last=True
        )
        return cls(disparity_net, color_net, sweep_disparities(config.sweep_levels, config.disparity_max), regime, train_qp)

    def _check_chain(self) -> None:
        for name, net, out in (("disparity", self.disparity_net, 1), ("color", self.color_net, 3)):
            convs = net.convolutions()
            if not convs:
                raise ModelShapeError(f"{name} network has no layers")
            for before, after in zip(convs, convs[1:]):
                if before.out_channels != after.in_channels:
                    raise ModelShapeError(f"{name} network layers do not chain")
            if convs[-1].out_channels != out:
                raise ModelShapeError(f"{name} network must output {out} channels")
        if self.disparity_net.convolutions()[0].in_channels != 2 * len(self.sweep):
            raise ModelShapeError(
                f"Disparity network expects {self.disparity_net.convolutions()[0].in_channels} feature channels, "
                f"sweep has {len(self.sweep)} levels"
            )
        if (self.color_net.convolutions()[0].in_channels - 2) % 3:
            raise ModelShapeError("Colour network input must be 3 channels per reference plus 2 position channels")

    @property
    def num_refs(self) -> int:
        return (self.color_net.convolutions()[0].in_channels - 2) // 3

    @property
    def disparity_margin(self) -> int:
        return sum(conv.kernel_size - 1 for conv in self.disparity_net.convolutions()) // 2

    @property
    def color_margin(self) -> int:
        return sum(conv.kernel_size - 1 for conv in self.color_net.convolutions()) // 2

    @property
    def margin(self) -> int:
        """Border consumed on each side by the two valid-convolution stacks"""
        return self.disparity_margin + self.color_margin

    @property
    def params(self) -> Params:
        params = {f"disparity.{key}": value for key, value in self.disparity_net.params.items()}
        params.update({f"color.{key}": value for key, value in self.color_net.params.items()})
        return params

    def load_params(self, values: Params) -> None:
        self.disparity_net.load_params({k[len("disparity."):]: v for k, v in values.items() if k.startswith("disparity.")})
        self.color_net.load_params({k[len("color."):]: v for k, v in values.items() if k.startswith("color.")})

    def tensors(self) -> List[np.ndarray]:
        """Weights and biases in layer order, disparity network first"""
        tensors = []
        for net in (self.disparity_net, self.color_net):
            for conv in net.convolutions():
                tensors.extend([conv.params["weight"], conv.params["bias"]])
        return tensors

    def check_refs(self, num_refs: int) -> None:
        if num_refs != self.num_refs:
            raise ModelShapeError(f"Model expects {self.num_refs} references, got {num_refs}")

    def forward(
        self,
        references: np.ndarray,
        ref_positions: np.ndarray,
        target_positions: np.ndarray,
        origins: np.ndarray,
        out_size: Tuple[int, int],
    ) -> Tuple[np.ndarray, GeneratorCache]:
        """Batched synthesis of an output region.

        references: (N, R, 3, H, W) normalised views; ref_positions (N, R, 2);
        target_positions (N, 2); origins (N, 2) top-left of the output region
        in view coordinates. Returns (N, 3, out_h, out_w).
        """
        batch, num_refs = references.shape[:2]
        self.check_refs(num_refs)
        dtype = self.disparity_net.convolutions()[0].params["weight"].dtype
        m_d, m_c = self.disparity_margin, self.color_margin
        out_h, out_w = out_size
        feat_shape = (out_h + 2 * (m_d + m_c), out_w + 2 * (m_d + m_c))
        disp_shape = (out_h + 2 * m_c, out_w + 2 * m_c)

        features = np.stack(
            [
                extract_features(
                    list(zip(references[n], [tuple(p) for p in ref_positions[n]])),
                    tuple(target_positions[n]),
                    self.sweep,
                    origin=(int(origins[n][0]) - m_d - m_c, int(origins[n][1]) - m_d - m_c),
                    shape=feat_shape,
                )
                for n in range(batch)
            ]
        ).astype(dtype)
        disparity, disparity_cache = self.disparity_net.forward(features)

        warped = np.empty((batch, num_refs, 3) + disp_shape, dtype=dtype)
        warp_caches = []
        for n in range(batch):
            sample_caches = []
            for r in range(num_refs):
                warped[n, r], cache = bilinear_warp(
                    references[n, r].astype(dtype),
                    disparity[n, 0],
                    _delta(ref_positions[n, r], target_positions[n]),
                    origin=(int(origins[n][0]) - m_c, int(origins[n][1]) - m_c),
                )
                sample_caches.append(cache)
            warp_caches.append(sample_caches)

        offsets = target_positions - ref_positions.mean(axis=1)
        position_planes = np.broadcast_to(offsets[:, :, None, None], (batch, 2) + disp_shape).astype(dtype)
        color_input = np.concatenate([warped.reshape((batch, num_refs * 3) + disp_shape), position_planes], axis=1)
        residual, color_cache = self.color_net.forward(color_input)

        base = warped.mean(axis=1)[:, :, m_c:m_c + out_h, m_c:m_c + out_w]
        cache = GeneratorCache(disparity_cache, color_cache, warp_caches, num_refs, m_c)
        return base + residual, cache

    def backward(self, cache: GeneratorCache, grad: np.ndarray) -> Params:
        """Parameter gradients from the gradient of the synthesized region"""
        batch = grad.shape[0]
        m_c, num_refs = cache.offset, cache.num_refs
        out_h, out_w = grad.shape[2:]

        grad_color_input, color_grads = self.color_net.backward(cache.color_cache, grad)
        disp_shape = grad_color_input.shape[2:]
        grad_warped = grad_color_input[:, :3 * num_refs].reshape((batch, num_refs, 3) + disp_shape).copy()
        grad_warped[:, :, :, m_c:m_c + out_h, m_c:m_c + out_w] += grad[:, None] / num_refs

        grad_disparity = np.zeros((batch, 1) + disp_shape, dtype=grad.dtype)
        for n in range(batch):
            for r in range(num_refs):
                grad_disparity[n, 0] += bilinear_warp_backward(cache.warp_caches[n][r], grad_warped[n, r])

        _, disparity_grads = self.disparity_net.backward(cache.disparity_cache, grad_disparity)
        grads = {f"disparity.{key}": value for key, value in disparity_grads.items()}
        grads.update({f"color.{key}": value for key, value in color_grads.items()})
        return grads

    def disparity_map(
        self, refs: Sequence[Tuple[object, Position]], target_pos: Position
    ) -> np.ndarray:
        """Estimated full-view disparity towards target_pos"""
        references, positions = _stack_refs(refs)
        m = self.disparity_margin
        height, width = references.shape[-2:]
        features = extract_features(
            list(zip(references, [tuple(p) for p in positions])), target_pos, self.sweep, origin=(-m, -m),
            shape=(height + 2 * m, width + 2 * m),
        )
        dtype = self.disparity_net.convolutions()[0].params["weight"].dtype
        return self.disparity_net(features[None].astype(dtype))[0, 0]


class DiscriminatorModel:
    """Strided convolutions + dense layer ending in softplus, so scores lie in (0, inf)"""

    def __init__(self, net: Sequential):
        self.net = net

    @classmethod
    def create(
        cls,
        patch_size: int,
        channels: Sequence[int] = (16, 32, 64),
        kernel_size: int = 4,
        stride: int = 2,
        seed: int = 0,
        dtype=DEFAULT_DTYPE,
    ) -> "DiscriminatorModel":
        rng = np.random.default_rng(seed)
        layers = []
        size, in_channels = patch_size, 3
        for out_channels in channels:
            if size < kernel_size:
                raise ModelShapeError(f"Patch of {patch_size} px is too small for {len(channels)} strided layers")
            layers.extend([Conv2d(in_channels, out_channels, kernel_size, stride, rng=rng, dtype=dtype), LeakyReLU(0.2)])
            size = (size - kernel_size) // stride + 1
            in_channels = out_channels
        layers.extend([Flatten(), Dense(in_channels * size * size, 1, rng=rng, dtype=dtype), Softplus()])
        return cls(Sequential(layers))

    @property
    def params(self) -> Params:
        return self.net.params

    def load_params(self, values: Params) -> None:
        self.net.load_params(values)

    def forward(self, patches: np.ndarray):
        scores, cache = self.net.forward(patches)
        return scores[:, 0], cache

    def backward(self, cache, grad_scores: np.ndarray) -> Tuple[np.ndarray, Params]:
        return self.net.backward(cache, grad_scores[:, None])

    def __call__(self, patches: np.ndarray) -> np.ndarray:
        return self.forward(patches)[0]


def _stack_refs(refs: Sequence[Tuple[object, Position]]) -> Tuple[np.ndarray, np.ndarray]:
    if not refs:
        raise NoReferences("Synthesis needs at least one reference view")
    references = np.stack([_as_float(view) for view, _ in refs])
    positions = np.array([pos for _, pos in refs], dtype=np.float64)
    return references, positions


def generate_view(model: GeneratorModel, refs: Sequence[Tuple[object, Position]], target_pos: Position) -> View:
    """Synthesize the full view at target_pos from (view, position) references"""
    references, positions = _stack_refs(refs)
    model.check_refs(len(references))
    height, width = references.shape[-2:]
    out, _ = model.forward(
        references[None],
        positions[None],
        np.asarray([target_pos], dtype=np.float64),
        np.zeros((1, 2), dtype=np.int64),
        (height, width),
    )
    return View.from_float(out[0])


def select_reference_pocs(
    target_poc: int,
    sequence: PseudoSequence,
    layout: GopLayout,
    num_refs: int,
    available: Optional[Sequence[int]] = None,
) -> List[int]:
    """The num_refs level 0-2 views nearest to the target on the grid.

    Ties are broken by POC; when fewer candidates exist they are repeated
    cyclically so the generator always sees num_refs inputs.
    """
    pool = set(available) if available is not None else set(layout.level_of_poc)
    candidates = [poc for poc in pool if poc != target_poc and layout.level(poc) in REFERENCE_LEVELS]
    if not candidates:
        raise NoReferences(f"No level 0-2 reference available for POC {target_poc}")

    ts, tt = sequence.position(target_poc)

    def distance(poc: int) -> Tuple[int, int]:
        s, t = sequence.position(poc)
        return (s - ts) ** 2 + (t - tt) ** 2, poc

    nearest = sorted(candidates, key=distance)[:num_refs]
    return [nearest[i % len(nearest)] for i in range(num_refs)]


def synthesize_views(
    model: GeneratorModel,
    targets: Sequence[int],
    decoded: Dict[int, View],
    sequence: PseudoSequence,
    layout: GopLayout,
) -> Dict[int, View]:
    """Regenerate dropped POCs from decoded level 0-2 views"""
    synthesized = {}
    for poc in targets:
        ref_pocs = select_reference_pocs(poc, sequence, layout, model.num_refs, available=decoded.keys())
        refs = [(decoded[ref], sequence.position(ref)) for ref in ref_pocs]
        synthesized[poc] = generate_view(model, refs, sequence.position(poc))
        logger.debug("View synthesized", poc=poc, references=ref_pocs)
    return synthesized
