"""
ADAM optimiser over named numpy parameters
"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from lfcodec.utils.layers import Params


@dataclass
class AdamState:
    """First/second moment accumulators per parameter plus the step counter"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def copy(self) -> "AdamState":
        return AdamState(
            m={key: value.copy() for key, value in self.m.items()},
            v={key: value.copy() for key, value in self.v.items()},
            step=self.step,
        )


class Adam:
    def __init__(self, lr: float = 0.0002, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps

    def step(self, params: Params, grads: Params, state: AdamState, ascent: bool = False) -> None:
        """Update params in place; ascent=True climbs the objective instead of descending"""
        state.step += 1
        bc1 = 1.0 - self.beta1 ** state.step
        bc2 = 1.0 - self.beta2 ** state.step
        sign = 1.0 if ascent else -1.0

        for key, param in params.items():
            g = grads[key]
            if key not in state.m:
                state.m[key] = np.zeros_like(param)
                state.v[key] = np.zeros_like(param)

            state.m[key] *= self.beta1
            state.m[key] += (1.0 - self.beta1) * g
            state.v[key] *= self.beta2
            state.v[key] += (1.0 - self.beta2) * (g * g)

            m_hat = state.m[key] / bc1
            v_hat = state.v[key] / bc2
            param += (sign * self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(param.dtype)
