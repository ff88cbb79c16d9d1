"""
Image folders, random crops and seeded synthetic textures.
"""

import logging
from pathlib import Path
from typing import List, Tuple

import numpy as np

from owslr.imageio import ImageBuffer, read_image, write_image

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = ('.png', '.pgm', '.ppm')


def list_images(folder) -> List[Path]:
    folder = Path(folder)
    if not folder.is_dir():
        raise FileNotFoundError(f'image folder not found: {folder}')
    return sorted(p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def load_images(folder, channels: int) -> List[Tuple[str, ImageBuffer]]:
    images = [(path.name, read_image(path).with_channels(channels)) for path in list_images(folder)]
    logger.info('loaded %d image(s) from %s', len(images), folder)
    return images


def random_crop(img: ImageBuffer, size: int, rng: np.random.Generator) -> ImageBuffer:
    """A size x size crop, or the whole extent along an axis shorter than size."""
    h, w = min(size, img.height), min(size, img.width)
    top = int(rng.integers(0, img.height - h + 1))
    left = int(rng.integers(0, img.width - w + 1))
    return img.crop(top, left, h, w)


def augment(img: ImageBuffer, rng: np.random.Generator) -> ImageBuffer:
    """Random horizontal flip, vertical flip and transpose."""
    data = img.data
    hflip, vflip, transpose = rng.random(3) < 0.5
    if hflip:
        data = data[:, ::-1, :]
    if vflip:
        data = data[::-1, :, :]
    if transpose:
        data = data.transpose(1, 0, 2)
    return ImageBuffer(np.ascontiguousarray(data))


def synthetic_texture(size: int, channels: int, seed: int, shapes: int = 2) -> ImageBuffer:
    """Oriented sinusoids, soft blobs and ``shapes`` hard-edged discs, rescaled to [0, 1].

    Fully determined by seed; ``shapes=0`` gives a smooth texture.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    planes = []
    for _ in range(channels):
        plane = np.zeros((size, size))
        for _ in range(int(rng.integers(2, 5))):
            angle = rng.uniform(0, np.pi)
            freq = rng.uniform(1.5, 8.0)
            phase = rng.uniform(0, 2 * np.pi)
            plane += rng.uniform(0.3, 1.0) * np.sin(
                2 * np.pi * freq * (xx * np.cos(angle) + yy * np.sin(angle)) + phase
            )
        for _ in range(int(rng.integers(1, 4))):
            cx, cy = rng.uniform(0, 1, size=2)
            radius = rng.uniform(0.05, 0.25)
            plane += rng.uniform(-1.0, 1.0) * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * radius ** 2))
        planes.append(plane)
    data = np.stack(planes, axis=-1)
    for _ in range(shapes):
        cx, cy = rng.uniform(0.1, 0.9, size=2)
        radius = rng.uniform(0.08, 0.3)
        inside = (xx - cx) ** 2 + (yy - cy) ** 2 < radius ** 2
        data[inside] += rng.uniform(-2.0, 2.0, size=channels)
    lo, hi = data.min(), data.max()
    data = (data - lo) / (hi - lo) if hi > lo else np.full_like(data, 0.5)
    return ImageBuffer.clamped(data)


def write_synthetic_set(folder, count: int, size: int, channels: int, seed: int) -> List[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        path = folder / f'texture_{i:03d}.png'
        write_image(synthetic_texture(size, channels, seed + i), path)
        paths.append(path)
    logger.info('wrote %d synthetic texture(s) to %s', count, folder)
    return paths
