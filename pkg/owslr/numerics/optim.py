import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .tensor import NumericsError, Tensor, ensure_finite

logger = logging.getLogger(__name__)


class OptimizerError(NumericsError):
    pass


@dataclass
class AdamState:
    """First/second moments per parameter, in parameter order."""
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def ensure_slots(self, params: Sequence[Tensor]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p.data) for p in params]
            self.v = [np.zeros_like(p.data) for p in params]
            return
        if len(self.m) != len(params):
            raise OptimizerError(f'optimizer state tracks {len(self.m)} parameters, got {len(params)}')
        for i, p in enumerate(params):
            if self.m[i].shape != p.shape:
                raise OptimizerError(
                    f'moment shape {self.m[i].shape} does not match parameter '
                    f'{p.name or i} of shape {p.shape}'
                )


def adam_step(params: Sequence[Tensor], state: AdamState, lr: float) -> None:
    """Bias-corrected Adam update in place, then clear the gradients.

    Either every parameter and the state advance, or nothing changes.
    """
    if not lr > 0:
        raise OptimizerError(f'learning rate must be positive, got {lr}')
    missing = [p.name or str(i) for i, p in enumerate(params) if p.grad is None]
    if missing:
        raise OptimizerError(f'missing gradient for parameter(s): {", ".join(missing)}')

    state.ensure_slots(params)
    t = state.t + 1
    bias1 = 1.0 - state.beta1 ** t
    bias2 = 1.0 - state.beta2 ** t

    staged = []
    for i, p in enumerate(params):
        g = p.grad.astype(p.dtype, copy=False)
        m = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        update = lr * (m / bias1) / (np.sqrt(v / bias2) + state.epsilon)
        data = p.data - update.astype(p.dtype, copy=False)
        ensure_finite(p.name or f'parameter {i}', data)
        staged.append((m.astype(state.m[i].dtype, copy=False), v.astype(state.v[i].dtype, copy=False), data))

    for i, (p, (m, v, data)) in enumerate(zip(params, staged)):
        state.m[i], state.v[i] = m, v
        p.data = data
        p.grad = None
    state.t = t
