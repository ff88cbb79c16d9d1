"""
Central finite-difference checking of recorded gradients.

Intended for float64 tensors (see ``precision``). Entries where the one-sided
difference quotients disagree sit on a kink (relu, |x|) and are skipped rather
than compared.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Graph, Tensor, backward

logger = logging.getLogger(__name__)

RELATIVE_FLOOR = 1e-3
KINK_TOLERANCE = 1e-5


@dataclass
class GradCheckResult:
    name: str
    max_rel_error: float
    tolerance: float
    checked: int
    skipped: int = 0

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error <= self.tolerance

    def merge(self, other: 'GradCheckResult') -> 'GradCheckResult':
        return GradCheckResult(
            name=self.name,
            max_rel_error=max(self.max_rel_error, other.max_rel_error),
            tolerance=min(self.tolerance, other.tolerance),
            checked=self.checked + other.checked,
            skipped=self.skipped + other.skipped,
        )


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_FLOOR) -> float:
    """|a - n| / max(|a|, |n|, floor); the floor keeps near-zero entries from dominating."""
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def analytic_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor]) -> list:
    for t in inputs:
        t.grad = None
    with Graph() as graph:
        loss = fn()
    backward(graph, loss)
    return [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]


def _positions(tensor: Tensor, max_entries: Optional[int], rng: np.random.Generator):
    if max_entries is None or tensor.size <= max_entries:
        return [np.unravel_index(i, tensor.shape) for i in range(tensor.size)]
    picks = rng.choice(tensor.size, size=max_entries, replace=False)
    return [np.unravel_index(int(i), tensor.shape) for i in sorted(picks)]


def check_gradients(name: str, fn: Callable[[], Tensor], inputs: Sequence[Tensor], *,
                    h: float = 1e-6, tolerance: float = 1e-5, max_entries: Optional[int] = None,
                    rng: Optional[np.random.Generator] = None) -> GradCheckResult:
    """Compare backward() against central differences for every (or a sample of) input entries."""
    rng = rng or np.random.default_rng(0)
    analytic = analytic_gradients(fn, inputs)
    base = fn().item()

    worst, checked, skipped = 0.0, 0, 0
    for tensor, grad in zip(inputs, analytic):
        for pos in _positions(tensor, max_entries, rng):
            saved = tensor.data[pos]
            tensor.data[pos] = saved + h
            plus = fn().item()
            tensor.data[pos] = saved - h
            minus = fn().item()
            tensor.data[pos] = saved

            central = (plus - minus) / (2 * h)
            forward_q, backward_q = (plus - base) / h, (base - minus) / h
            if abs(forward_q - backward_q) > KINK_TOLERANCE * max(1.0, abs(central)):
                skipped += 1
                continue
            worst = max(worst, relative_error(float(grad[pos]), central))
            checked += 1

    result = GradCheckResult(name, worst, tolerance, checked, skipped)
    if not result.passed:
        logger.warning('gradient check %s failed: max_rel_error=%.3e tolerance=%.1e checked=%d',
                       name, worst, tolerance, checked)
    return result
