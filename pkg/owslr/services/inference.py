"""
Full-image inference and folder evaluation against the bicubic baseline.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from django.conf import settings

from owslr.imageio import ImageBuffer, bicubic_resize, psnr
from owslr.network import SuperResolver, hr_grid
from owslr.numerics import NumericsError

from .datasets import load_images

logger = logging.getLogger(__name__)


class InferenceError(RuntimeError):
    pass


def worker_count(workers: Optional[int] = None) -> int:
    if workers is None:
        workers = getattr(settings, 'OWSLR_THREADS', 1)
    return max(1, int(workers))


def infer_to_size(model: SuperResolver, lr_image: ImageBuffer, out_h: int, out_w: int,
                  chunk_size: Optional[int] = None, workers: Optional[int] = None) -> ImageBuffer:
    """Decode every pixel of an out_h x out_w grid from one feature map of ``lr_image``."""
    if out_h < 1 or out_w < 1:
        raise InferenceError(f'output size must be at least 1x1, got {out_h}x{out_w}')
    channels = model.backbone_config.in_channels
    if lr_image.channels != channels:
        lr_image = lr_image.with_channels(channels)
    if chunk_size is None:
        chunk_size = getattr(settings, 'OWSLR_INFERENCE_CHUNK', 4096)
    chunk_size = max(1, int(chunk_size))

    start = time.monotonic()
    try:
        psi = model.features(lr_image)
        xs, ys = hr_grid(out_h, out_w)
        xs, ys = xs.ravel(), ys.ravel()
        bounds = [(i, min(i + chunk_size, xs.size)) for i in range(0, xs.size, chunk_size)]

        def run(bound):
            lo, hi = bound
            return model.query(psi, xs[lo:hi], ys[lo:hi]).data

        n_workers = min(worker_count(workers), len(bounds))
        if n_workers > 1:
            with ThreadPoolExecutor(max_workers=n_workers) as pool:
                parts = list(pool.map(run, bounds))
        else:
            parts = [run(bound) for bound in bounds]
    except NumericsError as e:
        logger.error('inference failed for %dx%d -> %dx%d: %s',
                     lr_image.height, lr_image.width, out_h, out_w, e)
        raise InferenceError(f'inference failed: {e}') from e

    values = np.concatenate(parts, axis=0).astype(np.float64).reshape(out_h, out_w, -1)
    logger.info('inferred %dx%d -> %dx%d in %.2fs (%d chunk(s), %d worker(s))',
                lr_image.height, lr_image.width, out_h, out_w, time.monotonic() - start,
                len(bounds), n_workers)
    return ImageBuffer.clamped(values)


def output_size(height: int, width: int, scale: float):
    if not (math.isfinite(scale) and scale > 0):
        raise InferenceError(f'scale must be a positive number, got {scale}')
    out_h, out_w = math.floor(height * scale), math.floor(width * scale)
    if out_h < 1 or out_w < 1:
        raise InferenceError(f'scale {scale} turns {height}x{width} into an empty image')
    return out_h, out_w


def infer_full(model: SuperResolver, lr_image: ImageBuffer, scale: float,
               chunk_size: Optional[int] = None, workers: Optional[int] = None) -> ImageBuffer:
    out_h, out_w = output_size(lr_image.height, lr_image.width, scale)
    return infer_to_size(model, lr_image, out_h, out_w, chunk_size, workers)


@dataclass
class EvalRow:
    image: str
    scale: float
    model_psnr: float
    bicubic_psnr: float
    seconds: Optional[float] = None

    def csv(self, timing: bool = False) -> str:
        row = f'{self.image},{self.scale:g},{self.model_psnr:.4f},{self.bicubic_psnr:.4f}'
        if timing:
            row += f',{self.seconds:.4f}' if self.seconds is not None else ','
        return row


def evaluate_image(model: SuperResolver, name: str, hr: ImageBuffer, scale: float,
                   chunk_size: Optional[int] = None, workers: Optional[int] = None) -> EvalRow:
    """Downscale ``hr`` by ``scale``, bring it back with the model and with bicubic, score both."""
    lr_h, lr_w = math.floor(hr.height / scale), math.floor(hr.width / scale)
    if scale < 1.0 or lr_h < 1 or lr_w < 1:
        raise InferenceError(f'{name}: cannot evaluate scale {scale} on {hr.height}x{hr.width}')
    lr_image = bicubic_resize(hr, lr_h, lr_w)
    start = time.monotonic()
    restored = infer_to_size(model, lr_image, hr.height, hr.width, chunk_size, workers)
    seconds = time.monotonic() - start
    baseline = bicubic_resize(lr_image, hr.height, hr.width)
    return EvalRow(name, float(scale), psnr(restored, hr), psnr(baseline, hr), seconds)


def mean_rows(rows: Sequence[EvalRow]) -> List[EvalRow]:
    """One ``mean`` row per scale, in first-seen scale order."""
    means = []
    for s in dict.fromkeys(r.scale for r in rows):
        group = [r for r in rows if r.scale == s]
        means.append(EvalRow(
            'mean', s,
            float(np.mean([r.model_psnr for r in group])),
            float(np.mean([r.bicubic_psnr for r in group])),
            float(np.mean([r.seconds for r in group])),
        ))
    return means


def evaluate_folder(model: SuperResolver, folder, scales: Sequence[float],
                    chunk_size: Optional[int] = None, workers: Optional[int] = None) -> List[EvalRow]:
    images = load_images(folder, model.backbone_config.in_channels)
    if not images:
        raise InferenceError(f'no images found in {folder}')
    rows = [evaluate_image(model, name, hr, s, chunk_size, workers) for name, hr in images for s in scales]
    for row in mean_rows(rows):
        logger.info('scale %g: model %.3f dB, bicubic %.3f dB', row.scale, row.model_psnr, row.bicubic_psnr)
    return rows
