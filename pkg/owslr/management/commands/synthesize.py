from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from owslr.imageio import ImageIOError
from owslr.services.datasets import write_synthetic_set


class Command(BaseCommand):
    help = 'Write seeded procedural texture images for training and evaluation'

    def add_arguments(self, parser):
        parser.add_argument('folder', help='Output folder (relative paths go under OWSLR_DATA_DIR)')
        parser.add_argument('--count', type=int, default=16)
        parser.add_argument('--size', type=int, default=96)
        parser.add_argument('--channels', type=int, choices=(1, 3), default=3)
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        if options['count'] < 1 or options['size'] < 2:
            raise CommandError('--count must be >= 1 and --size >= 2')
        folder = Path(options['folder'])
        if not folder.is_absolute():
            folder = Path(settings.OWSLR_DATA_DIR) / folder
        try:
            paths = write_synthetic_set(folder, options['count'], options['size'],
                                        options['channels'], options['seed'])
        except (ImageIOError, OSError) as e:
            raise CommandError(f'Could not write textures: {e}') from e
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(paths)} texture(s) to {folder}'))
