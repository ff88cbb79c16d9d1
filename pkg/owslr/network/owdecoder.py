"""
Overlapping-windows aggregation and the MLP readout.

A side-(k+1) grid shrinks to side k by taking the four corner k x k windows
(TL, TR, BL, BR), multiplying each elementwise with its own learned k x k x D
weight and summing the four products. Starting from the M x M region this
runs for k = M-1 down to M/2; a 2 x 2 window centered on the query is then
flattened and decoded by the MLP.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from owslr.numerics import (
    ShapeError, Tensor, add, concat, full, index, matmul, mul, relu, reshape, tile, uniform,
)

from .backbone import ConfigurationError
from .sampler import SemiLocalRegion

logger = logging.getLogger(__name__)

CORNERS = ('tl', 'tr', 'bl', 'br')


@dataclass(frozen=True)
class DecoderConfig:
    M: int = 4
    D: int = 16
    mlp_hidden: Tuple[int, ...] = (64, 64)
    out_channels: int = 3
    use_rel_offset: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'mlp_hidden', tuple(int(w) for w in self.mlp_hidden))
        if self.M % 2 or self.M < 4:
            raise ConfigurationError(f'M must be even and >= 4, got {self.M}')
        if self.D < 1:
            raise ConfigurationError(f'D must be >= 1, got {self.D}')
        if any(w < 1 for w in self.mlp_hidden):
            raise ConfigurationError(f'mlp layer widths must be >= 1, got {self.mlp_hidden}')
        if self.out_channels not in (1, 3):
            raise ConfigurationError(f'out_channels must be 1 or 3, got {self.out_channels}')

    @property
    def window_sizes(self) -> List[int]:
        """Shrink targets M-1, M-2, ..., M/2."""
        return list(range(self.M - 1, self.M // 2 - 1, -1))

    @property
    def mlp_in_features(self) -> int:
        return 4 * self.D + (2 if self.use_rel_offset else 0)


@dataclass
class WindowWeights:
    by_size: Dict[int, Tuple[Tensor, Tensor, Tensor, Tensor]] = field(default_factory=dict)

    @property
    def sizes(self) -> List[int]:
        return sorted(self.by_size, reverse=True)

    def named_parameters(self) -> Dict[str, Tensor]:
        return {
            f'owd.win.{k}.{corner}': tensor
            for k in self.sizes
            for corner, tensor in zip(CORNERS, self.by_size[k])
        }


@dataclass
class MLPWeights:
    layers: List[Tuple[Tensor, Tensor]] = field(default_factory=list)

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {}
        for i, (weight, bias) in enumerate(self.layers):
            params[f'owd.mlp.{i}.weight'] = weight
            params[f'owd.mlp.{i}.bias'] = bias
        return params


def init_decoder(cfg: DecoderConfig, seed: int) -> Tuple[WindowWeights, MLPWeights]:
    """Corner weights start at 1/4 (a plain corner average); MLP is uniform +-1/sqrt(fan_in)."""
    windows = WindowWeights({
        k: tuple(full((k, k, cfg.D), 0.25, requires_grad=True) for _ in CORNERS)
        for k in cfg.window_sizes
    })

    rng = np.random.default_rng(seed)
    widths = [cfg.mlp_in_features, *cfg.mlp_hidden, cfg.out_channels]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append((
            uniform((fan_in, fan_out), rng, -bound, bound, requires_grad=True),
            uniform((fan_out,), rng, -bound, bound, requires_grad=True),
        ))
    mlp = MLPWeights(layers)

    for name, tensor in {**windows.named_parameters(), **mlp.named_parameters()}.items():
        tensor.name = name
    return windows, mlp


def window_parameter_count(M: int, D: int) -> int:
    return 4 * D * sum(k * k for k in range(M // 2, M))


def corner_windows(grid: Tensor, k: int) -> List[Tensor]:
    lead = (slice(None),) * (grid.ndim - 3)
    whole = slice(None)
    return [
        index(grid, lead + (slice(r, r + k), slice(c, c + k), whole))
        for r, c in ((0, 0), (0, 1), (1, 0), (1, 1))
    ]


def shrink_step(grid: Tensor, weights: Sequence[Tensor]) -> Tensor:
    """Side k+1 -> k: sum over corners of (corner window) * (its weight)."""
    if len(weights) != 4:
        raise ShapeError(f'shrink_step needs four corner weights, got {len(weights)}')
    k = weights[0].shape[0]
    if grid.ndim < 3 or grid.shape[-3] != k + 1 or grid.shape[-2] != k + 1:
        raise ShapeError(f'shrink_step: grid {grid.shape} does not have side {k + 1}')
    lead = grid.shape[:-3]
    out = None
    for window, weight in zip(corner_windows(grid, k), weights):
        if weight.shape != window.shape[-3:]:
            raise ShapeError(f'shrink_step: weight {weight.shape} vs window {window.shape[-3:]}')
        term = mul(window, tile(weight, lead))
        out = term if out is None else add(out, term)
    return out


def run_windows(region: SemiLocalRegion, weights: WindowWeights) -> Tensor:
    grid = region.values
    expected = [grid.shape[-2] - 1 - i for i in range(len(weights.sizes))]
    if weights.sizes != expected or weights.sizes[-1] * 2 != grid.shape[-2]:
        raise ShapeError(f'window weights {weights.sizes} do not fit a region of side {grid.shape[-2]}')
    for k in weights.sizes:
        grid = shrink_step(grid, weights.by_size[k])
    return grid


def final_window_origin(side: int, rel_offset: np.ndarray) -> np.ndarray:
    """Top-left (row, col) of the 2x2 window nearest the displaced grid center.

    Window centers sit at origin + 1 in cell units; ties resolve toward the top-left.
    """
    rel = np.asarray(rel_offset, dtype=np.float64)
    target = side / 2.0 + rel[..., ::-1]  # (dy, dx) -> (row, col)
    return np.clip(np.ceil(target - 1.5), 0, side - 2).astype(np.int64)


def select_final_window(grid: Tensor, rel_offset: np.ndarray) -> Tensor:
    side = grid.shape[-2]
    if side < 2:
        raise ShapeError(f'final window needs a grid of side >= 2, got {side}')
    if side == 2:
        return grid
    origin = final_window_origin(side, rel_offset)
    if grid.ndim == 3:
        r, c = int(origin[0]), int(origin[1])
        return index(grid, (slice(r, r + 2), slice(c, c + 2), slice(None)))
    n = grid.shape[0]
    step = np.arange(2)
    rows = origin[:, 0][:, None, None] + step[None, :, None]
    cols = origin[:, 1][:, None, None] + step[None, None, :]
    return index(grid, (np.arange(n)[:, None, None], rows, cols))


def mlp_forward(x: Tensor, mlp: MLPWeights) -> Tensor:
    last = len(mlp.layers) - 1
    for i, (weight, bias) in enumerate(mlp.layers):
        x = add(matmul(x, weight), tile(bias, (x.shape[0],)))
        if i < last:
            x = relu(x)
    return x


def decode(region: SemiLocalRegion, windows: WindowWeights, mlp: MLPWeights,
           use_rel_offset: bool = False) -> Tensor:
    """Region -> out_channels values (N x out_channels for a batch), unclamped."""
    rel_offset = region.geometry.rel_offset
    final = select_final_window(run_windows(region, windows), rel_offset)
    n = final.shape[0] if region.batched else 1
    features = reshape(final, (n, -1))
    if use_rel_offset:
        offsets = Tensor(np.asarray(rel_offset).reshape(n, 2), dtype=features.dtype)
        features = concat([features, offsets], axis=1)
    out = mlp_forward(features, mlp)
    return out if region.batched else reshape(out, (out.shape[1],))
