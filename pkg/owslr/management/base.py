"""
Shared plumbing for the owslr management commands: run-config flags, path
resolution and translation of service errors into CommandError.
"""

import logging
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from owslr.imageio import ImageIOError, ImageShapeError
from owslr.network import ConfigurationError
from owslr.numerics import NumericsError
from owslr.services import (
    CheckpointError, ConfigError, InferenceError, RunConfig, TrainingError, parse_config,
)

logger = logging.getLogger(__name__)

SERVICE_ERRORS = (
    CheckpointError, ConfigError, ConfigurationError, ImageIOError, ImageShapeError,
    InferenceError, NumericsError, TrainingError, FileNotFoundError,
)


class RunConfigCommand(BaseCommand):
    """BaseCommand with ``--config``, ``--preset`` and repeatable ``--set key=value``."""

    def add_arguments(self, parser):
        parser.add_argument('--config', help='Path to a key = value run config file')
        parser.add_argument('--preset', help='Preset defaults (desk or paper)')
        parser.add_argument(
            '--set',
            action='append',
            default=[],
            metavar='KEY=VALUE',
            help='Override one config key; may be repeated',
        )

    def load_config(self, options, extra=()) -> RunConfig:
        preset = options.get('preset') or getattr(settings, 'OWSLR_PRESET', 'desk')
        try:
            return parse_config(options.get('config'), [*options.get('set', []), *extra], preset=preset)
        except ConfigError as e:
            raise CommandError(f'Invalid run config: {e}') from e

    def echo_config(self, cfg: RunConfig) -> None:
        for line in cfg.to_text().splitlines():
            self.stdout.write(f'# {line}')

    def resolve_path(self, value, role: str, must_exist: bool = True) -> Path:
        """Relative paths that do not exist here are looked up under OWSLR_DATA_DIR."""
        if not value:
            raise CommandError(f'No {role} given; set it in the config or with --set {role}=...')
        path = Path(value)
        if not path.is_absolute() and not path.exists():
            candidate = Path(getattr(settings, 'OWSLR_DATA_DIR', '.')) / path
            if candidate.exists():
                path = candidate
        if must_exist and not path.exists():
            raise CommandError(f'{role} not found: {value}')
        return path

    def handle(self, *args, **options):
        try:
            return self.run(*args, **options)
        except SERVICE_ERRORS as e:
            logger.error('%s failed: %s', self.__class__.__module__.rsplit('.', 1)[-1], e)
            raise CommandError(str(e)) from e

    def run(self, *args, **options):
        raise NotImplementedError
