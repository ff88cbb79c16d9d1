"""
PNG (8-bit gray or RGB) and binary PGM/PPM reading and writing via Pillow.
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .buffer import ImageBuffer

logger = logging.getLogger(__name__)

SUFFIX_FORMATS = {
    '.png': 'PNG',
    '.pgm': 'PPM',
    '.ppm': 'PPM',
    '.pnm': 'PPM',
}
CHANNELS_BY_MODE = {'L': 1, 'RGB': 3}


class ImageIOError(Exception):
    pass


class ImageFormatError(ImageIOError):
    pass


def read_image(path) -> ImageBuffer:
    """Decode to [0, 1] floats as u/255."""
    path = Path(path)
    try:
        with open(path, 'rb') as fh:
            magic = fh.read(2)
    except OSError as e:
        raise ImageIOError(f'cannot read {path}: {e}') from e
    if magic in (b'P1', b'P2', b'P3', b'P4'):
        raise ImageFormatError(f'{path.name}: only binary PGM (P5) and PPM (P6) are supported')

    try:
        with Image.open(path) as img:
            img.load()
            fmt, mode = img.format, img.mode
            if fmt not in ('PNG', 'PPM'):
                raise ImageFormatError(f'{path.name}: unsupported format {fmt}')
            if mode not in CHANNELS_BY_MODE:
                if mode.startswith('I') or mode == 'F':
                    raise ImageFormatError(f'{path.name}: unsupported bit depth (mode {mode}); only 8-bit is read')
                raise ImageFormatError(f'{path.name}: unsupported pixel mode {mode}; expected gray or RGB')
            pixels = np.asarray(img, dtype=np.uint8)
    except UnidentifiedImageError as e:
        raise ImageFormatError(f'{path.name}: corrupt or unrecognised header') from e
    except (OSError, SyntaxError, ValueError) as e:
        raise ImageFormatError(f'{path.name}: {e}') from e

    if pixels.ndim == 2:
        pixels = pixels[:, :, np.newaxis]
    return ImageBuffer(pixels.astype(np.float64) / 255.0)


def quantize(img: ImageBuffer) -> np.ndarray:
    """Clamp to [0, 1] then round half up to 8 bits."""
    return np.floor(np.clip(img.data, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def write_image(img: ImageBuffer, path) -> None:
    path = Path(path)
    fmt = SUFFIX_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise ImageFormatError(f'{path.name}: unsupported output suffix; use .png, .pgm or .ppm')
    if path.suffix.lower() == '.pgm' and img.channels != 1:
        raise ImageFormatError(f'{path.name}: PGM holds one channel, image has {img.channels}')
    if path.suffix.lower() == '.ppm' and img.channels != 3:
        raise ImageFormatError(f'{path.name}: PPM holds three channels, image has {img.channels}')

    pixels = quantize(img)
    if img.channels == 1:
        pixels = pixels[:, :, 0]
    try:
        Image.fromarray(pixels).save(path, format=fmt)
    except OSError as e:
        raise ImageIOError(f'cannot write {path}: {e}') from e
    logger.debug('wrote %s (%dx%dx%d)', path, img.height, img.width, img.channels)
