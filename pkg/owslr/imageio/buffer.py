from dataclasses import dataclass

import numpy as np


class ImageShapeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """HxWxC image with C in {1, 3} and every value in [0, 1]."""
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 2:
            data = data[:, :, np.newaxis]
        if data.ndim != 3:
            raise ImageShapeError(f'image data must be HxWxC, got shape {data.shape}')
        height, width, channels = data.shape
        if height < 1 or width < 1:
            raise ImageShapeError(f'image must be at least 1x1, got {height}x{width}')
        if channels not in (1, 3):
            raise ImageShapeError(f'image must have 1 or 3 channels, got {channels}')
        if not np.all(np.isfinite(data)) or data.min() < 0.0 or data.max() > 1.0:
            raise ImageShapeError('image values must lie in [0, 1]; clamp first')
        object.__setattr__(self, 'data', data)

    @classmethod
    def clamped(cls, array) -> 'ImageBuffer':
        return cls(np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def size(self) -> tuple:
        return self.height, self.width

    def with_channels(self, channels: int) -> 'ImageBuffer':
        """Replicate gray to RGB, or average RGB down to gray."""
        if channels == self.channels:
            return self
        if channels == 3:
            return ImageBuffer(np.repeat(self.data, 3, axis=2))
        if channels == 1:
            return ImageBuffer(self.data.mean(axis=2, keepdims=True))
        raise ImageShapeError(f'unsupported channel count {channels}')

    def crop(self, top: int, left: int, height: int, width: int) -> 'ImageBuffer':
        return ImageBuffer(self.data[top:top + height, left:left + width, :])
