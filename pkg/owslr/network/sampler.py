"""
Semi-local region lookup.

Coordinates are normalized to [0, 1] with half-pixel centers: cell p of an
n-cell axis is centered at (p + 0.5) / n, on the HR grid and on the feature map
alike, so the HR-to-feature transfer is the identity. x runs along width
(columns), y along height (rows).

Every function takes either a single query (scalar coordinates) or a batch
(1-D coordinate arrays); batched results carry a leading query axis.
"""

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from owslr.numerics import Tensor, index

from .backbone import FeatureMap

Coords = Union[float, np.ndarray]

# cell-unit distance below which a position counts as sitting on a cell boundary
BOUNDARY_SNAP = 1e-9


@dataclass(frozen=True)
class NormCoord:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f'coordinates must be finite, got ({self.x}, {self.y})')
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f'coordinates must lie in [0, 1], got ({self.x}, {self.y})')


@dataclass(frozen=True, eq=False)
class CellGeometry:
    """Cell size along x and y plus the query's offset from its cell center, in cell units."""
    psi_x: float
    psi_y: float
    rel_offset: np.ndarray = None

    @classmethod
    def for_map(cls, psi: FeatureMap, rel_offset: np.ndarray = None) -> 'CellGeometry':
        return cls(1.0 / psi.Q, 1.0 / psi.P, rel_offset)


@dataclass(frozen=True, eq=False)
class OffsetGrid:
    """``points[..., a, b]`` is (x, y) of grid row a (y offset) and column b (x offset)."""
    M: int
    center_x: np.ndarray
    center_y: np.ndarray
    points: np.ndarray


@dataclass(frozen=True, eq=False)
class SemiLocalRegion:
    values: Tensor
    geometry: CellGeometry
    rows: np.ndarray
    cols: np.ndarray

    @property
    def M(self) -> int:
        return self.values.shape[-2]

    @property
    def batched(self) -> bool:
        return self.values.ndim == 4


def hr_to_norm(row: int, col: int, out_h: int, out_w: int) -> NormCoord:
    if not (0 <= row < out_h and 0 <= col < out_w):
        raise IndexError(f'pixel ({row}, {col}) outside a {out_h}x{out_w} image')
    return NormCoord((col + 0.5) / out_w, (row + 0.5) / out_h)


def hr_grid(out_h: int, out_w: int) -> Tuple[np.ndarray, np.ndarray]:
    """Normalized (xs, ys) of every pixel of an out_h x out_w image, row-major."""
    rows, cols = np.divmod(np.arange(out_h * out_w), out_w)
    return pixel_coords(rows, cols, out_h, out_w)


def pixel_coords(rows: np.ndarray, cols: np.ndarray, out_h: int, out_w: int) -> Tuple[np.ndarray, np.ndarray]:
    return (np.asarray(cols) + 0.5) / out_w, (np.asarray(rows) + 0.5) / out_h


def offsets(M: int) -> np.ndarray:
    """M symmetric half-integer steps -M/2+0.5 .. M/2-0.5."""
    if M < 2 or M % 2:
        raise ValueError(f'M must be even and >= 2, got {M}')
    return np.arange(M, dtype=np.float64) - M / 2 + 0.5


def offset_grid(center: Union[NormCoord, Tuple[Coords, Coords]], M: int, geom: CellGeometry) -> OffsetGrid:
    if isinstance(center, NormCoord):
        cx, cy = np.asarray(center.x, dtype=np.float64), np.asarray(center.y, dtype=np.float64)
    else:
        cx, cy = (np.asarray(c, dtype=np.float64) for c in center)
    steps = offsets(M)
    # The step set is symmetric, so center + psi*i spans the same points as center - psi*i
    # while keeping grid[0, 0] at the top-left.
    xs = cx[..., None, None] + geom.psi_x * steps[None, :]
    ys = cy[..., None, None] + geom.psi_y * steps[:, None]
    xs, ys = np.broadcast_arrays(xs, ys)
    return OffsetGrid(M, cx, cy, np.stack([xs, ys], axis=-1))


def cell_indices(q: np.ndarray, n: int) -> np.ndarray:
    """Nearest cell center along one axis: clamp(floor(q*n), 0, n-1); ties go up."""
    u = np.asarray(q, dtype=np.float64) * n
    # grid points of cell-centered queries land on boundaries up to rounding
    snapped = np.round(u)
    u = np.where(np.abs(u - snapped) <= BOUNDARY_SNAP, snapped, u)
    return np.clip(np.floor(u).astype(np.int64), 0, n - 1)


def relative_offset(x: np.ndarray, y: np.ndarray, psi: FeatureMap) -> np.ndarray:
    ix, iy = cell_indices(x, psi.Q), cell_indices(y, psi.P)
    dx = x * psi.Q - (ix + 0.5)
    dy = y * psi.P - (iy + 0.5)
    return np.clip(np.stack([dx, dy], axis=-1), -0.5, 0.5)


def nearest_lookup(grid: OffsetGrid, psi: FeatureMap) -> SemiLocalRegion:
    cols = cell_indices(grid.points[..., 0], psi.Q)
    rows = cell_indices(grid.points[..., 1], psi.P)
    values = index(psi.values, (rows, cols))
    geometry = CellGeometry.for_map(psi, relative_offset(grid.center_x, grid.center_y, psi))
    return SemiLocalRegion(values, geometry, rows, cols)


def extract_region(center: NormCoord, M: int, psi: FeatureMap) -> SemiLocalRegion:
    return nearest_lookup(offset_grid(center, M, CellGeometry.for_map(psi)), psi)


def extract_regions(xs: np.ndarray, ys: np.ndarray, M: int, psi: FeatureMap) -> SemiLocalRegion:
    xs, ys = np.asarray(xs, dtype=np.float64).reshape(-1), np.asarray(ys, dtype=np.float64).reshape(-1)
    return nearest_lookup(offset_grid((xs, ys), M, CellGeometry.for_map(psi)), psi)
