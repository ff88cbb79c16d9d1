from pathlib import Path

from django.core.management.base import CommandError

from owslr.management.base import RunConfigCommand
from owslr.network import SuperResolver
from owslr.numerics import AdamState
from owslr.services import (
    TrainConfig, Trainer, apply_checkpoint, load_checkpoint, save_checkpoint,
)
from owslr.services.datasets import load_images


class Command(RunConfigCommand):
    help = 'Train the super-resolver on a folder of HR images; prints epoch,loss,lr as CSV'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            '--resume',
            action='store_true',
            help='Continue from the checkpoint (parameters, Adam moments, RNG state and epoch)',
        )

    def run(self, *args, **options):
        cfg = self.load_config(options)
        self.echo_config(cfg)

        train_dir = self.resolve_path(cfg.train_dir, 'train_dir')
        images = [img for _, img in load_images(train_dir, cfg.in_channels)]
        if not images:
            raise CommandError(f'No images in {train_dir}')

        model = SuperResolver.create(cfg.backbone_config(), cfg.decoder_config(), cfg.seed)
        opt_state = AdamState()
        ckpt_path = Path(cfg.checkpoint)
        trainer = Trainer(model, TrainConfig.from_run_config(cfg), images, opt_state)

        if options['resume']:
            if not ckpt_path.is_file():
                self.stdout.write(self.style.WARNING(f'# no checkpoint at {ckpt_path}; starting fresh'))
            else:
                checkpoint = load_checkpoint(ckpt_path)
                apply_checkpoint(checkpoint, model, opt_state)
                trainer.rng = checkpoint.build_rng()
                trainer.epoch = checkpoint.epoch
                self.stdout.write(f'# resumed from {ckpt_path} at epoch {checkpoint.epoch}')

        self.stdout.write('epoch,loss,lr')

        def on_epoch(result):
            self.stdout.write(result.csv())
            save_checkpoint(ckpt_path, model, cfg, opt_state, epoch=result.epoch + 1, rng=trainer.rng)

        history = trainer.run(on_epoch)
        if history:
            self.stdout.write(self.style.SUCCESS(
                f'# done: {len(history)} epoch(s), final loss {history[-1].loss:.6f}, checkpoint {ckpt_path}'
            ))
        else:
            self.stdout.write(self.style.WARNING(f'# nothing to do: already at epoch {trainer.epoch}'))
