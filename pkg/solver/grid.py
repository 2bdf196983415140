import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from common.config import CONFIG


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid: cell i has center origin + h * i."""
    d: int
    h: float
    origin: Tuple[float, ...]
    extents: Tuple[int, ...]

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.d}")
        if not self.h > 0.0:
            raise ValueError(f"grid spacing must be positive, got {self.h}")
        if len(self.origin) != self.d or len(self.extents) != self.d or min(self.extents) < 1:
            raise ValueError(f"origin {self.origin} / extents {self.extents} do not describe a {self.d}-d grid")

    @classmethod
    def centered(cls, d: int, h: float, radius: float, center: Optional[Sequence[float]] = None) -> 'Grid':
        """Smallest grid with a cell centered exactly at `center` covering the cube of half-side `radius`."""
        c = tuple(float(v) for v in (center if center is not None else (0.0,) * d))
        half = int(math.ceil(radius / h))
        return cls(d=d, h=float(h), origin=tuple(v - h * half for v in c), extents=(2 * half + 1,) * d)

    @classmethod
    def covering(cls, d: int, h: float, lo: Sequence[float], hi: Sequence[float]) -> 'Grid':
        extents = tuple(int(math.ceil((b - a) / h)) + 1 for a, b in zip(lo, hi))
        return cls(d=d, h=float(h), origin=tuple(float(a) for a in lo), extents=extents)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.extents)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(o + self.h * np.arange(n) for o, n in zip(self.origin, self.extents))

    def points(self) -> np.ndarray:
        """Cell centers, shape extents + (d,)."""
        mesh = np.meshgrid(*self.axes(), indexing='ij')
        return np.stack(mesh, axis=-1)

    def upper(self) -> Tuple[float, ...]:
        return tuple(o + self.h * (n - 1) for o, n in zip(self.origin, self.extents))

    def scaled(self, eps: float, offset: Optional[Sequence[float]] = None) -> 'Grid':
        """The same cells seen through x -> eps x - offset."""
        off = tuple(offset) if offset is not None else (0.0,) * self.d
        return Grid(d=self.d, h=self.h * eps, origin=tuple(eps * o - y for o, y in zip(self.origin, off)),
                    extents=self.extents)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.d):
            index = [slice(None)] * self.d
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        return mask


@dataclass(frozen=True, eq=False)
class Field:
    """
    Snapshot of u(t, .) on a grid.

    Values lie in [0, 1] up to rounding; outside the grid u equals `exterior`
    (0 by default, 1 to represent u = 1 exactly on a truncated domain).
    """
    grid: Grid
    values: np.ndarray
    time: float = 0.0
    exterior: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            raise ValueError(f"field values of shape {values.shape} do not match grid {self.grid.shape}")
        if self.exterior not in (0.0, 1.0):
            raise ValueError(f"exterior state must be 0 or 1, got {self.exterior}")
        tol = CONFIG['solver']['range_tolerance']
        if values.size and (values.min() < -tol or values.max() > 1.0 + tol or not np.all(np.isfinite(values))):
            raise ValueError(f"field values leave [0, 1]: min {values.min()!r}, max {values.max()!r}")
        object.__setattr__(self, 'values', values)

    @classmethod
    def constant(cls, grid: Grid, value: float, time: float = 0.0) -> 'Field':
        exterior = 1.0 if value == 1.0 else 0.0
        return cls(grid=grid, values=np.full(grid.shape, float(value)), time=time, exterior=exterior)

    @classmethod
    def indicator(cls, grid: Grid, mask: np.ndarray, level: float, time: float = 0.0) -> 'Field':
        return cls(grid=grid, values=np.where(mask, float(level), 0.0), time=time)

    @classmethod
    def ball(cls, grid: Grid, center: Sequence[float], radius: float = 1.0, level: float = 0.5) -> 'Field':
        """level * chi_{B_radius(center)} by cell centers; straddling cells are not antialiased."""
        dist = np.linalg.norm(grid.points() - np.asarray(center, dtype=float), axis=-1)
        return cls.indicator(grid, dist < radius, level)

    def frozen(self) -> 'Field':
        """Read-only copy suitable for handing out as an observation."""
        values = self.values.copy()
        values.setflags(write=False)
        return replace(self, values=values)

    def with_values(self, values: np.ndarray, time: float) -> 'Field':
        return Field(grid=self.grid, values=values, time=time, exterior=self.exterior)

    def boundary_activity(self) -> float:
        """Largest |u - exterior| on the outermost cells."""
        return float(np.max(np.abs(self.values[self.grid.boundary_mask()] - self.exterior)))

    def at(self, x: Sequence[float]) -> float:
        """Value of the cell whose center is nearest to x (exterior off the grid)."""
        index = []
        for o, n, xi in zip(self.grid.origin, self.grid.extents, x):
            i = int(round((xi - o) / self.grid.h))
            if i < 0 or i >= n:
                return self.exterior
            index.append(i)
        return float(self.values[tuple(index)])
