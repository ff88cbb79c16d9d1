import math

import numpy as np

from .buffer import ImageBuffer, ImageShapeError


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """10*log10(1/MSE) on the [0, 1] scale, before quantization; inf when identical."""
    if a.data.shape != b.data.shape:
        raise ImageShapeError(f'psnr: dimension mismatch {a.data.shape} vs {b.data.shape}')
    mse = float(np.mean((a.data - b.data) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)
