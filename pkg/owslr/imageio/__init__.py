"""
Image buffers, PNG/PGM/PPM codec, bicubic resampling and PSNR.
"""

from .buffer import ImageBuffer, ImageShapeError
from .codec import ImageFormatError, ImageIOError, read_image, write_image
from .metrics import psnr
from .resample import bicubic_resize, cubic_weight, resize_weights

__all__ = [
    'ImageBuffer', 'ImageFormatError', 'ImageIOError', 'ImageShapeError', 'bicubic_resize',
    'cubic_weight', 'psnr', 'read_image', 'resize_weights', 'write_image',
]
