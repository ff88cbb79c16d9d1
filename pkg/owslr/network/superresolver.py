import logging
from dataclasses import dataclass
from typing import Dict, List, Union

import numpy as np

from owslr.imageio import ImageBuffer
from owslr.numerics import Tensor

from .backbone import (
    BackboneConfig, BackboneWeights, ConfigurationError, FeatureMap, extract_features, init_backbone,
)
from .owdecoder import DecoderConfig, MLPWeights, WindowWeights, decode, init_decoder
from .sampler import extract_regions

logger = logging.getLogger(__name__)


@dataclass
class SuperResolver:
    """Backbone, window weights and MLP: everything a checkpoint stores as parameters."""
    backbone: BackboneWeights
    windows: WindowWeights
    mlp: MLPWeights
    decoder_config: DecoderConfig

    @classmethod
    def create(cls, backbone_config: BackboneConfig, decoder_config: DecoderConfig, seed: int) -> 'SuperResolver':
        if decoder_config.D != backbone_config.width:
            raise ConfigurationError(
                f'decoder depth D={decoder_config.D} does not match backbone width {backbone_config.width}'
            )
        windows, mlp = init_decoder(decoder_config, seed + 1)
        return cls(init_backbone(backbone_config, seed), windows, mlp, decoder_config)

    @property
    def backbone_config(self) -> BackboneConfig:
        return self.backbone.config

    @property
    def M(self) -> int:
        return self.decoder_config.M

    def named_parameters(self) -> Dict[str, Tensor]:
        return {
            **self.backbone.named_parameters(),
            **self.windows.named_parameters(),
            **self.mlp.named_parameters(),
        }

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def features(self, image: Union[ImageBuffer, Tensor]) -> FeatureMap:
        return extract_features(self.backbone, image)

    def query(self, psi: FeatureMap, xs: np.ndarray, ys: np.ndarray) -> Tensor:
        """Decode N normalized query points against a computed feature map -> N x C."""
        region = extract_regions(xs, ys, self.M, psi)
        return decode(region, self.windows, self.mlp, self.decoder_config.use_rel_offset)
