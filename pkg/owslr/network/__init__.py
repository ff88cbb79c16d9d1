"""
Encoder, semi-local sampler and overlapping-windows decoder.
"""

from .backbone import (
    BackboneConfig, BackboneWeights, ConfigurationError, FeatureMap, extract_features,
    init_backbone, parameter_count,
)
from .owdecoder import (
    CORNERS, DecoderConfig, MLPWeights, WindowWeights, decode, init_decoder, run_windows,
    select_final_window, shrink_step, window_parameter_count,
)
from .sampler import (
    CellGeometry, NormCoord, OffsetGrid, SemiLocalRegion, extract_region, extract_regions,
    hr_grid, hr_to_norm, nearest_lookup, offset_grid,
)
from .superresolver import SuperResolver

__all__ = [
    'BackboneConfig', 'BackboneWeights', 'CORNERS', 'CellGeometry', 'ConfigurationError',
    'DecoderConfig', 'FeatureMap', 'MLPWeights', 'NormCoord', 'OffsetGrid', 'SemiLocalRegion',
    'SuperResolver', 'WindowWeights', 'decode', 'extract_features', 'extract_region',
    'extract_regions', 'hr_grid', 'hr_to_norm', 'init_backbone', 'init_decoder',
    'nearest_lookup', 'offset_grid', 'parameter_count', 'run_windows', 'select_final_window',
    'shrink_step', 'window_parameter_count',
]
