"""
Flat ``key = value`` run configuration with desk / paper presets.

Files are tokenised with python-dotenv (nothing is exported to the environment)
and values are cast with django-environ's parser, floats excepted. Precedence:
preset defaults, then the file, then ``key=value`` overrides from the command line.
"""

import io
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Dict, Iterable, Optional, Tuple

import environ
from dotenv import dotenv_values

from owslr.network import BackboneConfig, DecoderConfig

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f'{key}: {message}')
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    preset: str = 'desk'
    # backbone
    num_blocks: int = 4
    width: int = 16
    in_channels: int = 3
    residual_scale: float = 1.0
    global_skip: bool = True
    # decoder
    M: int = 4
    mlp_hidden: Tuple[int, ...] = (64, 64)
    out_channels: int = 3
    use_rel_offset: bool = True
    # training
    epochs: int = 30
    batch_images: int = 4
    points_per_image: int = 256
    lr0: float = 1e-3
    milestones: Tuple[int, ...] = (12, 18, 21)
    gamma: float = 0.3
    scale_min: float = 1.0
    scale_max: float = 4.0
    crop: int = 48
    seed: int = 0
    augment: bool = True
    steps_per_epoch: int = 100
    # paths
    train_dir: str = ''
    val_dir: str = ''
    checkpoint: str = 'owslr.ckpt'
    output: str = ''
    # inference
    chunk_size: int = 4096

    def backbone_config(self) -> BackboneConfig:
        return BackboneConfig(
            num_blocks=self.num_blocks,
            width=self.width,
            in_channels=self.in_channels,
            residual_scale=self.residual_scale,
            global_skip=self.global_skip,
        )

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            M=self.M,
            D=self.width,
            mlp_hidden=self.mlp_hidden,
            out_channels=self.out_channels,
            use_rel_offset=self.use_rel_offset,
        )

    def to_text(self) -> str:
        lines = []
        for key, value in sorted(asdict(self).items()):
            lines.append(f'{key} = {_render(value)}')
        return '\n'.join(lines) + '\n'


PRESETS: Dict[str, Dict[str, object]] = {
    'desk': {},
    'paper': {
        'num_blocks': 16,
        'width': 64,
        'M': 6,
        'mlp_hidden': (256, 256, 256, 256),
        'use_rel_offset': False,
        'epochs': 100,
        'batch_images': 16,
        'points_per_image': 1500,
        'lr0': 1e-4,
        'milestones': (40, 60, 70),
        'gamma': 0.3,
        'steps_per_epoch': 0,
    },
}

FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
TRUE_STRINGS = {s.lower() for s in environ.Env.BOOLEAN_TRUE_STRINGS}
FALSE_STRINGS = {'false', 'off', 'no', 'n', 'f', '0'}


def _render(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, tuple):
        return ','.join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cast_value(key: str, raw: Optional[str]):
    """Cast one raw string to the declared type of ``key``."""
    if key not in FIELD_TYPES:
        raise ConfigError(key, 'unknown key')
    if raw is None:
        raise ConfigError(key, 'missing value (expected "key = value")')
    declared = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if declared in (bool, 'bool'):
            if raw.lower() not in TRUE_STRINGS | FALSE_STRINGS:
                raise ValueError(raw)
            return environ.Env.parse_value(raw, bool)
        if declared in (int, 'int'):
            return environ.Env.parse_value(raw, int)
        if declared in (float, 'float'):
            # environ drops exponent characters from floats
            value = float(raw)
            if value != value or value in (float('inf'), float('-inf')):
                raise ValueError(raw)
            return value
        if 'Tuple' in str(declared):
            return tuple(environ.Env.parse_value(raw, [int]))
        return environ.Env.parse_value(raw, str)
    except ValueError as e:
        raise ConfigError(key, f'cannot parse {raw!r} as {getattr(declared, "__name__", declared)}') from e


def parse_pairs(pairs: Dict[str, Optional[str]]) -> Dict[str, object]:
    return {key: cast_value(key, raw) for key, raw in pairs.items()}


def parse_text(text: str) -> Dict[str, Optional[str]]:
    return dict(dotenv_values(stream=io.StringIO(text), interpolate=False))


def parse_overrides(overrides: Iterable[str]) -> Dict[str, Optional[str]]:
    pairs = {}
    for item in overrides or ():
        if '=' not in item:
            raise ConfigError(item.strip(), 'override must look like key=value')
        key, raw = item.split('=', 1)
        pairs[key.strip()] = raw.strip()
    return pairs


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.preset not in PRESETS:
        raise ConfigError('preset', f'unknown preset {cfg.preset!r}; choose from {", ".join(PRESETS)}')
    if cfg.M % 2:
        raise ConfigError('M', f'M must be even, got {cfg.M}')
    if cfg.M < 4:
        raise ConfigError('M', f'M must be >= 4, got {cfg.M}')
    for key in ('num_blocks', 'width', 'epochs', 'batch_images', 'points_per_image', 'crop', 'chunk_size'):
        if getattr(cfg, key) < 1:
            raise ConfigError(key, f'must be >= 1, got {getattr(cfg, key)}')
    if cfg.steps_per_epoch < 0:
        raise ConfigError('steps_per_epoch', 'must be >= 0')
    if cfg.in_channels not in (1, 3):
        raise ConfigError('in_channels', f'must be 1 or 3, got {cfg.in_channels}')
    if cfg.out_channels != cfg.in_channels:
        raise ConfigError('out_channels', f'must equal in_channels ({cfg.in_channels}), got {cfg.out_channels}')
    if not cfg.mlp_hidden or any(w < 1 for w in cfg.mlp_hidden):
        raise ConfigError('mlp_hidden', f'needs at least one positive width, got {cfg.mlp_hidden}')
    if not 0.0 < cfg.residual_scale <= 1.0:
        raise ConfigError('residual_scale', f'must be in (0, 1], got {cfg.residual_scale}')
    if not cfg.lr0 > 0:
        raise ConfigError('lr0', f'must be positive, got {cfg.lr0}')
    if not 0.0 < cfg.gamma < 1.0:
        raise ConfigError('gamma', f'must be in (0, 1), got {cfg.gamma}')
    ms = list(cfg.milestones)
    if any(b <= a for a, b in zip(ms, ms[1:])):
        raise ConfigError('milestones', f'must be strictly increasing, got {ms}')
    if ms and (ms[0] < 0 or ms[-1] >= cfg.epochs):
        raise ConfigError('milestones', f'must lie in [0, epochs={cfg.epochs}), got {ms}')
    if cfg.scale_min < 1.0:
        raise ConfigError('scale_min', f'must be >= 1, got {cfg.scale_min}')
    if cfg.scale_max < cfg.scale_min:
        raise ConfigError('scale_max', f'must be >= scale_min ({cfg.scale_min}), got {cfg.scale_max}')
    return cfg


def parse_config(path=None, overrides: Iterable[str] = (), preset: Optional[str] = None,
                 text: Optional[str] = None) -> RunConfig:
    """Resolve a RunConfig from preset defaults, an optional file (or text) and overrides."""
    pairs: Dict[str, Optional[str]] = {}
    if path:
        path = Path(path)
        if not path.is_file():
            raise ConfigError('config', f'file not found: {path}')
        pairs.update(dotenv_values(path, interpolate=False))
    if text is not None:
        pairs.update(parse_text(text))
    pairs.update(parse_overrides(overrides))

    values = parse_pairs(pairs)
    chosen = values.pop('preset', None) or preset or 'desk'
    if chosen not in PRESETS:
        raise ConfigError('preset', f'unknown preset {chosen!r}; choose from {", ".join(PRESETS)}')

    cfg = replace(RunConfig(), preset=chosen, **PRESETS[chosen])
    cfg = validate(replace(cfg, **values))
    logger.info('resolved run config:\n%s', cfg.to_text().rstrip())
    return cfg

