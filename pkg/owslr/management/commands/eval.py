from django.core.management.base import CommandError

from owslr.management.base import RunConfigCommand
from owslr.services import evaluate_folder, load_checkpoint, mean_rows


def parse_scales(raw: str):
    try:
        scales = [float(s) for s in raw.split(',') if s.strip()]
    except ValueError as e:
        raise CommandError(f'--scale must be a comma-separated list of numbers, got {raw!r}') from e
    if not scales or any(s < 1.0 for s in scales):
        raise CommandError(f'--scale needs one or more factors >= 1, got {raw!r}')
    return scales


class Command(RunConfigCommand):
    help = 'PSNR of the model and of bicubic on a folder of HR images; CSV on stdout'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('folder', nargs='?', help='HR image folder; defaults to val_dir')
        parser.add_argument('--scale', required=True, help='Factor or comma-separated factors, e.g. 2,3,4')
        parser.add_argument('--timing', action='store_true', help='Add per-image inference seconds')

    def run(self, *args, **options):
        cfg = self.load_config(options)
        scales = parse_scales(options['scale'])
        folder = self.resolve_path(options['folder'] or cfg.val_dir, 'val_dir')
        model = load_checkpoint(self.resolve_path(cfg.checkpoint, 'checkpoint')).build_model()

        rows = evaluate_folder(model, folder, scales, chunk_size=cfg.chunk_size)
        timing = options['timing']
        header = 'image,scale,model_psnr,bicubic_psnr' + (',seconds' if timing else '')
        self.stdout.write(header)
        for row in rows + mean_rows(rows):
            self.stdout.write(row.csv(timing))
