"""
Minimal numpy network layers with explicit reverse-mode gradients

Layers are stateless during a pass: ``forward`` returns ``(output, cache)`` and
``backward(cache, grad)`` returns ``(grad_input, param_grads)``, so a network
can be evaluated concurrently and differentiated several times per step.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Params = Dict[str, np.ndarray]

DEFAULT_DTYPE = np.float32


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class Layer:
    """Base layer; parameterless by default"""

    kind = "layer"

    def __init__(self):
        self.params: Params = {}

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        raise NotImplementedError

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        raise NotImplementedError

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]


class Conv2d(Layer):
    """Valid (unpadded) 2-D convolution over (N, C, H, W) batches"""

    kind = "conv"

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        rng: Optional[np.random.Generator] = None,
        dtype=DEFAULT_DTYPE,
        zero_init: bool = False,
    ):
        super().__init__()
        self.stride = stride
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        if zero_init:
            weight = np.zeros(shape)
        else:
            rng = rng if rng is not None else np.random.default_rng(0)
            weight = rng.normal(0.0, np.sqrt(2.0 / (in_channels * kernel_size * kernel_size)), size=shape)
        self.params = {
            "weight": weight.astype(dtype),
            "bias": np.zeros(out_channels, dtype=dtype),
        }

    @property
    def in_channels(self) -> int:
        return self.params["weight"].shape[1]

    @property
    def out_channels(self) -> int:
        return self.params["weight"].shape[0]

    @property
    def kernel_size(self) -> int:
        return self.params["weight"].shape[2]

    def output_size(self, size: int) -> int:
        return (size - self.kernel_size) // self.stride + 1

    def _windows(self, x: np.ndarray) -> np.ndarray:
        k, s = self.kernel_size, self.stride
        return sliding_window_view(x, (k, k), axis=(-2, -1))[..., ::s, ::s, :, :]

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        weight, bias = self.params["weight"], self.params["bias"]
        if x.ndim != 4 or x.shape[1] != weight.shape[1]:
            raise ValueError(f"Conv2d expects (N, {weight.shape[1]}, H, W), got {x.shape}")
        out = np.stack(
            [np.tensordot(self._windows(sample), weight, axes=([0, 3, 4], [1, 2, 3])) for sample in x]
        )
        out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
        return out, x

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        x = cache
        weight = self.params["weight"]
        k, s = self.kernel_size, self.stride
        height, width = x.shape[2:]

        grad_weight = np.zeros(weight.shape, dtype=np.result_type(weight, grad))
        for sample, g in zip(x, grad):
            grad_weight += np.tensordot(g, self._windows(sample), axes=([1, 2], [1, 2]))

        # transposed convolution: dilate by the stride, pad to full size, correlate with flipped kernels
        out_h, out_w = grad.shape[2:]
        span_h, span_w = (out_h - 1) * s + 1, (out_w - 1) * s + 1
        padded = np.zeros(grad.shape[:2] + (height + k - 1, width + k - 1), dtype=grad.dtype)
        padded[:, :, k - 1:k - 1 + span_h:s, k - 1:k - 1 + span_w:s] = grad
        flipped = weight[:, :, ::-1, ::-1]
        grad_x = np.stack(
            [
                np.tensordot(sliding_window_view(sample, (k, k), axis=(-2, -1)), flipped, axes=([0, 3, 4], [0, 2, 3]))
                for sample in padded
            ]
        ).transpose(0, 3, 1, 2)

        return grad_x, {"weight": grad_weight, "bias": grad.sum(axis=(0, 2, 3))}


class Dense(Layer):
    kind = "dense"

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: Optional[np.random.Generator] = None,
        dtype=DEFAULT_DTYPE,
        zero_init: bool = False,
    ):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        if zero_init:
            weight = np.zeros((in_features, out_features))
        else:
            weight = rng.normal(0.0, np.sqrt(1.0 / in_features), size=(in_features, out_features))
        self.params = {
            "weight": weight.astype(dtype),
            "bias": np.zeros(out_features, dtype=dtype),
        }

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x @ self.params["weight"] + self.params["bias"], x

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        x = cache
        return grad @ self.params["weight"].T, {"weight": x.T @ grad, "bias": grad.sum(axis=0)}


class Flatten(Layer):
    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        return grad.reshape(cache), {}


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        mask = x > 0
        return x * mask, mask

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        return grad * cache, {}


class LeakyReLU(Layer):
    def __init__(self, slope: float = 0.2):
        super().__init__()
        self.slope = slope

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        scale = np.where(x > 0, 1.0, self.slope).astype(x.dtype)
        return x * scale, scale

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        return grad * cache, {}


class Softplus(Layer):
    """log(1 + e^x), floored at the smallest positive normal so scores stay > 0"""

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        tiny = np.finfo(x.dtype).tiny if np.issubdtype(x.dtype, np.floating) else np.finfo(float).tiny
        return np.maximum(np.logaddexp(0.0, x), tiny).astype(x.dtype), x

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        return grad * _sigmoid(cache), {}


class Sequential(Layer):
    """Layer chain whose parameters are exposed as "<index>.<name>" keys"""

    kind = "sequential"

    def __init__(self, layers: Sequence[Layer]):
        super().__init__()
        self.layers: List[Layer] = list(layers)

    @property
    def params(self) -> Params:
        return {f"{i}.{name}": value for i, layer in enumerate(self.layers) for name, value in layer.params.items()}

    @params.setter
    def params(self, value: Params) -> None:
        # Layer.__init__ assigns an empty dict; the chain's parameters live in its layers
        if value:
            self.load_params(value)

    def load_params(self, values: Params) -> None:
        for key, array in values.items():
            index, name = key.split(".", 1)
            layer = self.layers[int(index)]
            if layer.params[name].shape != array.shape:
                raise ValueError(f"Shape mismatch for {key}: {layer.params[name].shape} vs {array.shape}")
            layer.params[name] = np.array(array, dtype=layer.params[name].dtype, copy=True)

    def forward(self, x: np.ndarray) -> Tuple[np.ndarray, Any]:
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x)
            caches.append(cache)
        return x, caches

    def backward(self, cache: Any, grad: np.ndarray) -> Tuple[np.ndarray, Params]:
        grads: Params = {}
        for i in range(len(self.layers) - 1, -1, -1):
            grad, layer_grads = self.layers[i].backward(cache[i], grad)
            for name, value in layer_grads.items():
                grads[f"{i}.{name}"] = value
        return grad, grads

    def convolutions(self) -> List[Conv2d]:
        return [layer for layer in self.layers if isinstance(layer, Conv2d)]

    def num_parameters(self) -> int:
        return int(sum(value.size for value in self.params.values()))


def conv_stack(
    channels: Sequence[int],
    kernels: Sequence[int],
    rng: np.random.Generator,
    dtype=DEFAULT_DTYPE,
    zero_last: bool = False,
) -> Sequential:
    """Valid convolutions with ReLU between them and a linear output"""
    if len(channels) != len(kernels) + 1:
        raise ValueError("channels must have one more entry than kernels")
    layers: List[Layer] = []
    for i, kernel in enumerate(kernels):
        last = i == len(kernels) - 1
        layers.append(Conv2d(channels[i], channels[i + 1], kernel, rng=rng, dtype=dtype, zero_init=zero_last and last))
        if not last:
            layers.append(ReLU())
    return Sequential(layers)


def copy_params(params: Params) -> Params:
    return {key: value.copy() for key, value in params.items()}
