"""
Training recipe: random-scale pair synthesis, point sampling, L1 + Adam with
milestone learning-rate decay.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from owslr.imageio import ImageBuffer, bicubic_resize
from owslr.network import NormCoord, SuperResolver
from owslr.network.sampler import pixel_coords
from owslr.numerics import (
    AdamState, Graph, NumericsError, Tensor, adam_step, backward, concat, l1_loss,
)

from .datasets import augment, random_crop
from .runconfig import ConfigError, RunConfig

logger = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_images: int = 4
    points_per_image: int = 256
    lr0: float = 1e-4
    milestones: Tuple[int, ...] = (12, 18, 21)
    gamma: float = 0.3
    scale_range: Tuple[float, float] = (1.0, 4.0)
    crop: int = 48
    seed: int = 0
    augment: bool = True
    steps_per_epoch: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'milestones', tuple(int(m) for m in self.milestones))
        ms = self.milestones
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ConfigError('milestones', f'must be strictly increasing, got {list(ms)}')
        if ms and ms[-1] >= self.epochs:
            raise ConfigError('milestones', f'must be < epochs ({self.epochs}), got {list(ms)}')
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError('gamma', f'must be in (0, 1), got {self.gamma}')
        lo, hi = self.scale_range
        if lo < 1.0 or hi < lo:
            raise ConfigError('scale_range', f'needs 1 <= lo <= hi, got {self.scale_range}')

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> 'TrainConfig':
        return cls(
            epochs=cfg.epochs,
            batch_images=cfg.batch_images,
            points_per_image=cfg.points_per_image,
            lr0=cfg.lr0,
            milestones=cfg.milestones,
            gamma=cfg.gamma,
            scale_range=(cfg.scale_min, cfg.scale_max),
            crop=cfg.crop,
            seed=cfg.seed,
            augment=cfg.augment,
            steps_per_epoch=cfg.steps_per_epoch,
        )


FULL_TRAIN_CONFIG = TrainConfig(
    epochs=100, batch_images=16, points_per_image=1500, lr0=1e-4,
    milestones=(40, 60, 70), gamma=0.3,
)


@dataclass(frozen=True, eq=False)
class TrainPair:
    """LR input plus normalized HR query coordinates and their target values."""
    lr_image: ImageBuffer
    xs: np.ndarray
    ys: np.ndarray
    targets: np.ndarray
    scale: float

    @property
    def n_points(self) -> int:
        return len(self.xs)

    @property
    def queries(self) -> List[Tuple[NormCoord, np.ndarray]]:
        return [(NormCoord(float(x), float(y)), t) for x, y, t in zip(self.xs, self.ys, self.targets)]


def make_pair(hr_crop: ImageBuffer, scale: float, n_points: int, rng: np.random.Generator) -> TrainPair:
    if scale < 1.0:
        raise TrainingError(f'scale must be >= 1, got {scale}')
    if n_points < 1:
        raise TrainingError('a training pair needs at least one query point')
    min_side = 2 * math.ceil(scale)
    if hr_crop.height < min_side or hr_crop.width < min_side:
        raise TrainingError(
            f'crop {hr_crop.height}x{hr_crop.width} too small for scale {scale:.3f} (needs {min_side})'
        )

    lr_image = bicubic_resize(hr_crop, math.floor(hr_crop.height / scale), math.floor(hr_crop.width / scale))

    total = hr_crop.height * hr_crop.width
    picks = rng.choice(total, size=n_points, replace=n_points > total)
    rows, cols = np.divmod(picks, hr_crop.width)
    xs, ys = pixel_coords(rows, cols, hr_crop.height, hr_crop.width)
    targets = hr_crop.data[rows, cols, :].copy()
    return TrainPair(lr_image, xs, ys, targets, float(scale))


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    """lr0 * gamma ** (number of milestones <= epoch)."""
    drops = sum(1 for m in cfg.milestones if m <= epoch)
    return cfg.lr0 * cfg.gamma ** drops


def forward_loss(batch: Sequence[TrainPair], model: SuperResolver) -> Tensor:
    """Flat mean L1 over every query point in the batch."""
    if not batch:
        raise TrainingError('empty batch')
    preds, targets = [], []
    for pair in batch:
        if pair.n_points == 0:
            raise TrainingError('training pair has an empty query list')
        psi = model.features(pair.lr_image)
        preds.append(model.query(psi, pair.xs, pair.ys))
        targets.append(pair.targets)
    pred = concat(preds, axis=0)
    return l1_loss(pred, Tensor(np.concatenate(targets, axis=0), dtype=pred.dtype))


def train_step(batch: Sequence[TrainPair], model: SuperResolver, opt_state: AdamState, lr: float) -> float:
    """Forward, backward and one Adam update; returns the loss before the update."""
    try:
        with Graph() as graph:
            loss = forward_loss(batch, model)
        value = loss.item()
        backward(graph, loss)
        adam_step(model.parameters(), opt_state, lr)
    except NumericsError as e:
        logger.error('training step failed at lr=%.3g: %s', lr, e)
        raise TrainingError(f'training step failed: {e}') from e
    if not math.isfinite(value):
        raise TrainingError(f'non-finite loss {value} at lr={lr:.3g}')
    return value


@dataclass
class EpochResult:
    epoch: int
    loss: float
    lr: float
    steps: int
    seconds: float

    def csv(self) -> str:
        return f'{self.epoch},{self.loss:.6f},{self.lr:.6g}'


@dataclass
class Trainer:
    """Epoch loop over a list of HR images; all randomness comes from one seeded generator."""
    model: SuperResolver
    config: TrainConfig
    images: List[ImageBuffer]
    opt_state: AdamState = field(default_factory=AdamState)
    rng: Optional[np.random.Generator] = None
    epoch: int = 0
    history: List[EpochResult] = field(default_factory=list)

    def __post_init__(self):
        if not self.images:
            raise TrainingError('no training images')
        if self.rng is None:
            self.rng = np.random.default_rng(self.config.seed)

    def sample_pair(self, img: ImageBuffer) -> TrainPair:
        crop = random_crop(img, self.config.crop, self.rng)
        if self.config.augment:
            crop = augment(crop, self.rng)
        lo, hi = self.config.scale_range
        scale = float(self.rng.uniform(lo, hi)) if hi > lo else lo
        # keep 2 * ceil(scale) within small crops
        scale = min(scale, max(1.0, float(min(crop.height, crop.width) // 2)))
        return make_pair(crop, scale, self.config.points_per_image, self.rng)

    def batches(self) -> Iterator[List[TrainPair]]:
        count, size = len(self.images), self.config.batch_images
        order = [int(i) for i in self.rng.permutation(count)]
        if not self.config.steps_per_epoch:
            groups = [order[i:i + size] for i in range(0, count, size)]
        else:
            # fixed step count: a fresh permutation starts whenever the current one
            # cannot fill a whole group, so no group repeats an image
            groups, width = [], min(size, count)
            while len(groups) < self.config.steps_per_epoch:
                if len(order) < width:
                    order = [int(i) for i in self.rng.permutation(count)]
                groups.append(order[:width])
                order = order[width:]
        for group in groups:
            yield [self.sample_pair(self.images[i]) for i in group]

    def run_epoch(self) -> EpochResult:
        lr = lr_schedule(self.epoch, self.config)
        start = time.monotonic()
        losses = [train_step(batch, self.model, self.opt_state, lr) for batch in self.batches()]
        result = EpochResult(self.epoch, float(np.mean(losses)), lr, len(losses), time.monotonic() - start)
        logger.info('epoch %d: loss=%.6f lr=%.3g steps=%d time=%.2fs',
                    result.epoch, result.loss, result.lr, result.steps, result.seconds)
        self.history.append(result)
        self.epoch += 1
        return result

    def run(self, on_epoch: Optional[Callable[[EpochResult], None]] = None) -> List[EpochResult]:
        while self.epoch < self.config.epochs:
            result = self.run_epoch()
            if on_epoch is not None:
                on_epoch(result)
        return self.history
