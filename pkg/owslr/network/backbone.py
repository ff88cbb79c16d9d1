"""
EDSR-baseline style encoder: head conv, residual blocks without normalization,
tail conv and an optional global skip. There is no upsampling tail; the feature
map keeps the input's spatial size.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Union

import numpy as np

from owslr.imageio import ImageBuffer
from owslr.numerics import Tensor, ShapeError, add, conv2d, relu, scale, tile, uniform

logger = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class BackboneConfig:
    num_blocks: int = 4
    width: int = 16
    in_channels: int = 3
    residual_scale: float = 1.0
    global_skip: bool = True
    kernel_size: int = 3

    def __post_init__(self):
        if self.num_blocks < 1:
            raise ConfigurationError(f'num_blocks must be >= 1, got {self.num_blocks}')
        if self.width < 1:
            raise ConfigurationError(f'width must be >= 1, got {self.width}')
        if self.in_channels not in (1, 3):
            raise ConfigurationError(f'in_channels must be 1 or 3, got {self.in_channels}')
        if not 0.0 < self.residual_scale <= 1.0:
            raise ConfigurationError(f'residual_scale must be in (0, 1], got {self.residual_scale}')
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigurationError(f'kernel_size must be odd, got {self.kernel_size}')

    @property
    def conv_depth(self) -> int:
        """Convolutions on the longest path from input to feature map."""
        return 2 * self.num_blocks + 2


@dataclass
class ConvLayer:
    weight: Tensor
    bias: Tensor

    def __call__(self, x: Tensor) -> Tensor:
        out = conv2d(x, self.weight)
        return add(out, tile(self.bias, out.shape[:2]))


@dataclass
class ResidualBlock:
    conv1: ConvLayer
    conv2: ConvLayer


@dataclass
class BackboneWeights:
    config: BackboneConfig
    head: ConvLayer
    tail: ConvLayer
    blocks: List[ResidualBlock] = field(default_factory=list)

    def named_parameters(self) -> Dict[str, Tensor]:
        params = {
            'backbone.head.weight': self.head.weight,
            'backbone.head.bias': self.head.bias,
        }
        for i, block in enumerate(self.blocks):
            for conv_name in ('conv1', 'conv2'):
                conv = getattr(block, conv_name)
                params[f'backbone.blocks.{i}.{conv_name}.weight'] = conv.weight
                params[f'backbone.blocks.{i}.{conv_name}.bias'] = conv.bias
        params['backbone.tail.weight'] = self.tail.weight
        params['backbone.tail.bias'] = self.tail.bias
        return params


@dataclass(frozen=True)
class FeatureMap:
    """Latent grid of shape P x Q x D."""
    values: Tensor

    @property
    def P(self) -> int:
        return self.values.shape[0]

    @property
    def Q(self) -> int:
        return self.values.shape[1]

    @property
    def D(self) -> int:
        return self.values.shape[2]


def _conv_layer(rng: np.random.Generator, k: int, c_in: int, c_out: int) -> ConvLayer:
    bound = 1.0 / np.sqrt(k * k * c_in)
    weight = uniform((k, k, c_in, c_out), rng, -bound, bound, requires_grad=True)
    bias = uniform((c_out,), rng, -bound, bound, requires_grad=True)
    return ConvLayer(weight, bias)


def init_backbone(cfg: BackboneConfig, seed: int) -> BackboneWeights:
    """Uniform +-1/sqrt(fan_in) initialization, drawn in parameter order from one seed."""
    rng = np.random.default_rng(seed)
    k, d = cfg.kernel_size, cfg.width
    head = _conv_layer(rng, k, cfg.in_channels, d)
    blocks = [ResidualBlock(_conv_layer(rng, k, d, d), _conv_layer(rng, k, d, d))
              for _ in range(cfg.num_blocks)]
    tail = _conv_layer(rng, k, d, d)
    weights = BackboneWeights(cfg, head, tail, blocks)
    for name, tensor in weights.named_parameters().items():
        tensor.name = name
    return weights


def parameter_count(cfg: BackboneConfig) -> int:
    k2 = cfg.kernel_size ** 2
    d = cfg.width
    head = k2 * cfg.in_channels * d + d
    conv = k2 * d * d + d
    return head + 2 * cfg.num_blocks * conv + conv


def extract_features(weights: BackboneWeights, img: Union[ImageBuffer, Tensor]) -> FeatureMap:
    cfg = weights.config
    x = img if isinstance(img, Tensor) else Tensor(img.data, dtype=weights.head.weight.dtype)
    if x.ndim != 3 or x.shape[2] != cfg.in_channels:
        raise ShapeError(f'backbone expects {cfg.in_channels} input channel(s), got shape {x.shape}')

    head = weights.head(x)
    body = head
    for block in weights.blocks:
        residual = block.conv2(relu(block.conv1(body)))
        if cfg.residual_scale != 1.0:
            residual = scale(residual, cfg.residual_scale)
        body = add(body, residual)
    out = weights.tail(body)
    if cfg.global_skip:
        out = add(out, head)
    return FeatureMap(out)
