"""
Gradient-check suites run by ``manage.py gradcheck``.

Everything here runs in float64: central differences at h=1e-6 are meaningless
against float32 storage.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np

from owslr.imageio import ImageBuffer
from owslr.network import BackboneConfig, DecoderConfig, SuperResolver
from owslr.numerics import (
    GradCheckResult, Tensor, add, check_gradients, concat, conv2d, index, l1_loss, matmul,
    mean, mul, precision, relu, reshape, scale, sub, sum_all, tile,
)

logger = logging.getLogger(__name__)

OPS_TOLERANCE = 1e-5
DECODE_TOLERANCE = 1e-6
DEFAULT_INSTANCES = 20

Case = Tuple[Callable[[], Tensor], List[Tensor]]


@dataclass
class SuiteReport:
    suite: str
    results: List[GradCheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> List[GradCheckResult]:
        return [r for r in self.results if not r.passed]


def _param(rng: np.random.Generator, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape), requires_grad=True)


def _projected(op: Callable[[], Tensor], rng: np.random.Generator) -> Callable[[], Tensor]:
    """Scalar loss sum(op() * w) with a random w fixed on first use."""
    projection = []

    def fn():
        out = op()
        if not projection:
            projection.append(Tensor(rng.standard_normal(out.shape) if out.ndim else rng.standard_normal()))
        if out.ndim == 0:
            return scale(out, float(projection[0].data))
        return sum_all(mul(out, projection[0]))

    return fn


def _op_cases(rng: np.random.Generator) -> Dict[str, Case]:
    a, b = _param(rng, 3, 4), _param(rng, 3, 4)
    x, k = _param(rng, 5, 4, 2), _param(rng, 3, 3, 2, 3)
    left, right = _param(rng, 3, 4), _param(rng, 4, 2)
    v = _param(rng, 4)
    g = _param(rng, 5, 3)
    rows = rng.integers(0, 5, size=7)
    c1, c2 = _param(rng, 2, 3), _param(rng, 4, 3)
    target = Tensor(rng.standard_normal((3, 4)))

    ops = {
        'add': (lambda: add(a, b), [a, b]),
        'sub': (lambda: sub(a, b), [a, b]),
        'mul': (lambda: mul(a, b), [a, b]),
        'relu': (lambda: relu(a), [a]),
        'scale': (lambda: scale(a, -1.7), [a]),
        'matmul': (lambda: matmul(left, right), [left, right]),
        'conv2d': (lambda: conv2d(x, k), [x, k]),
        'sum': (lambda: sum_all(a), [a]),
        'mean': (lambda: mean(a), [a]),
        'l1_loss': (lambda: l1_loss(a, target), [a]),
        'reshape': (lambda: reshape(a, (2, 6)), [a]),
        'tile': (lambda: tile(v, (3, 2)), [v]),
        'index_slice': (lambda: index(x, (slice(1, 4), slice(None), 1)), [x]),
        'index_gather': (lambda: index(g, (rows,)), [g]),
        'concat': (lambda: concat([c1, c2], axis=0), [c1, c2]),
    }
    return {name: (_projected(op, rng), inputs) for name, (op, inputs) in ops.items()}


def run_ops_suite(seed: int = 0, instances: int = DEFAULT_INSTANCES,
                  tolerance: float = OPS_TOLERANCE) -> SuiteReport:
    merged: Dict[str, GradCheckResult] = {}
    with precision(np.float64):
        for i in range(instances):
            rng = np.random.default_rng([seed, i])
            for name, (fn, inputs) in _op_cases(rng).items():
                result = check_gradients(name, fn, inputs, tolerance=tolerance)
                merged[name] = merged[name].merge(result) if name in merged else result
    report = SuiteReport('ops', list(merged.values()))
    logger.info('ops gradcheck: %d op(s), %d instance(s) each, passed=%s',
                len(merged), instances, report.passed)
    return report


def decode_case(seed: int, M: int = 4, use_rel_offset: bool = False, size: int = 6,
                n_queries: int = 4) -> Tuple[SuperResolver, Case]:
    """A tiny model plus an L1 loss over a few random queries of a random image."""
    rng = np.random.default_rng(seed)
    model = SuperResolver.create(
        BackboneConfig(num_blocks=1, width=3, in_channels=3),
        DecoderConfig(M=M, D=3, mlp_hidden=(8,), out_channels=3, use_rel_offset=use_rel_offset),
        seed,
    )
    image = ImageBuffer(rng.uniform(0.0, 1.0, (size, size, 3)))
    xs, ys = rng.uniform(0.0, 1.0, n_queries), rng.uniform(0.0, 1.0, n_queries)
    target = Tensor(rng.uniform(0.0, 1.0, (n_queries, 3)))

    def loss():
        return l1_loss(model.query(model.features(image), xs, ys), target)

    return model, (loss, model.parameters())


def run_decode_suite(seed: int = 0, instances: int = DEFAULT_INSTANCES,
                     tolerance: float = DECODE_TOLERANCE, max_entries: int = 4) -> SuiteReport:
    """End-to-end loss against every parameter tensor, sampling ``max_entries`` entries each."""
    results = []
    with precision(np.float64):
        for i in range(instances):
            M = 4 if i % 2 == 0 else 6
            _, (fn, params) = decode_case(seed + i, M=M, use_rel_offset=i % 4 == 3)
            results.append(check_gradients(
                f'decode[{i}] M={M}', fn, params, tolerance=tolerance,
                max_entries=max_entries, rng=np.random.default_rng([seed, i]),
            ))
    report = SuiteReport('decode', results)
    logger.info('decode gradcheck: %d instance(s), passed=%s', instances, report.passed)
    return report


def run_all(seed: int = 0, instances: int = DEFAULT_INSTANCES) -> List[SuiteReport]:
    return [run_ops_suite(seed, instances), run_decode_suite(seed, instances)]
