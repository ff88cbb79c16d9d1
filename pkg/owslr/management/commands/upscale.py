import time

from owslr.imageio import read_image, write_image
from owslr.management.base import RunConfigCommand
from owslr.services import infer_full, load_checkpoint


class Command(RunConfigCommand):
    help = 'Upscale one image by an arbitrary real factor with a trained checkpoint'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('input', help='LR image (PNG, PGM or PPM)')
        parser.add_argument('--scale', type=float, required=True, help='Upscaling factor, e.g. 2.4')
        parser.add_argument('--output', help='Output path; defaults to the config output key')

    def run(self, *args, **options):
        cfg = self.load_config(options)
        source = self.resolve_path(options['input'], 'input')
        target = options['output'] or cfg.output
        if not target:
            target = str(source.with_name(f'{source.stem}_x{options["scale"]:g}.png'))

        checkpoint = load_checkpoint(self.resolve_path(cfg.checkpoint, 'checkpoint'))
        model = checkpoint.build_model()
        lr_image = read_image(source).with_channels(model.backbone_config.in_channels)

        start = time.monotonic()
        result = infer_full(model, lr_image, options['scale'], chunk_size=cfg.chunk_size)
        elapsed = time.monotonic() - start
        write_image(result, target)

        self.stdout.write(
            f'{lr_image.height}x{lr_image.width} -> {result.height}x{result.width} '
            f'(scale {options["scale"]:g}) in {elapsed:.2f}s'
        )
        self.stdout.write(self.style.SUCCESS(f'Wrote {target}'))
