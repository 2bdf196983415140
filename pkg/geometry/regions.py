"""
Open regions G described analytically, and their time slices G + t S.

Every region carries a signed distance sd (negative inside) and membership is
sd < 0. `offset` shifts the level set: erosion by r adds r, dilation subtracts
it, which is exact wherever sd is the true signed distance.
"""
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, Optional, Tuple

import numpy as np

from common.errors import ShapeError
from geometry.shapes import ConvexPolytope, ConvexShape

REGION_KINDS = ('ball', 'box', 'union', 'halfspace', 'complement_box')


def _box_sd(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    q = np.abs(x - mid) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = np.minimum(np.max(q, axis=-1), 0.0)
    return outside + inside


@dataclass(frozen=True)
class RegionSpec:
    """
    One of: ball(center, radius), box(lo, hi), union of boxes, half-space
    {x . normal < level}, complement of a box. `clip_radius` intersects with the
    centered ball of that radius.
    """
    kind: str
    d: int
    center: Tuple[float, ...] = ()
    radius: float = 1.0
    lo: Tuple[float, ...] = ()
    hi: Tuple[float, ...] = ()
    boxes: Tuple[Tuple[Tuple[float, ...], Tuple[float, ...]], ...] = ()
    normal: Tuple[float, ...] = ()
    level: float = 0.0
    clip_radius: Optional[float] = None
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ShapeError(f"unknown region kind '{self.kind}' (expected one of {', '.join(REGION_KINDS)})")
        if self.kind == 'ball':
            if not self.center:
                object.__setattr__(self, 'center', (0.0,) * self.d)
            if self.radius < 0.0:
                raise ShapeError("ball radius must be nonnegative")
        if self.kind in ('box', 'complement_box'):
            if len(self.lo) != self.d or len(self.hi) != self.d or any(a >= b for a, b in zip(self.lo, self.hi)):
                raise ShapeError(f"box needs lo < hi in every coordinate, got lo={self.lo} hi={self.hi}")
        if self.kind == 'union':
            if not self.boxes:
                raise ShapeError("union needs at least one box")
            for lo, hi in self.boxes:
                if len(lo) != self.d or len(hi) != self.d or any(a >= b for a, b in zip(lo, hi)):
                    raise ShapeError(f"union member needs lo < hi, got lo={lo} hi={hi}")
        if self.kind == 'halfspace':
            normal = np.asarray(self.normal or (1.0,) + (0.0,) * (self.d - 1), dtype=float)
            norm = np.linalg.norm(normal)
            if len(normal) != self.d or norm == 0.0:
                raise ShapeError(f"half-space needs a nonzero normal in R^{self.d}")
            object.__setattr__(self, 'normal', tuple(float(v) for v in normal / norm))

    @classmethod
    def from_dict(cls, section: Dict[str, Any], d: int) -> 'RegionSpec':
        def vec(value):
            return tuple(float(v) for v in value) if value is not None else ()
        boxes = tuple((vec(b[0]), vec(b[1])) for b in section.get('boxes') or ())
        return cls(kind=section['kind'], d=d, center=vec(section.get('center')),
                   radius=float(section.get('radius', 1.0)), lo=vec(section.get('lo')), hi=vec(section.get('hi')),
                   boxes=boxes, normal=vec(section.get('normal')), level=float(section.get('level', 0.0)),
                   clip_radius=section.get('clip_radius'))

    @property
    def bounded(self) -> bool:
        return self.clip_radius is not None or self.kind in ('ball', 'box', 'union')

    def bounding_radius(self) -> float:
        """Radius of a centered ball containing the region (before offset)."""
        if self.clip_radius is not None:
            return float(self.clip_radius)
        if self.kind == 'ball':
            return float(np.linalg.norm(self.center)) + self.radius
        if self.kind == 'box':
            corners = np.maximum(np.abs(self.lo), np.abs(self.hi))
            return float(np.linalg.norm(corners))
        if self.kind == 'union':
            return max(float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)))) for lo, hi in self.boxes)
        return math.inf

    def base_sd(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if self.kind == 'ball':
            return np.linalg.norm(pts - np.asarray(self.center), axis=-1) - self.radius
        if self.kind == 'box':
            return _box_sd(pts, np.asarray(self.lo), np.asarray(self.hi))
        if self.kind == 'complement_box':
            return -_box_sd(pts, np.asarray(self.lo), np.asarray(self.hi))
        if self.kind == 'union':
            return np.min([_box_sd(pts, np.asarray(lo), np.asarray(hi)) for lo, hi in self.boxes], axis=0)
        return pts @ np.asarray(self.normal) - self.level

    def signed_distance(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        sd = self.base_sd(pts)
        if self.clip_radius is not None:
            sd = np.maximum(sd, np.linalg.norm(pts, axis=-1) - self.clip_radius)
        return sd + self.offset

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) < 0.0

    def clipped(self, radius: float) -> 'RegionSpec':
        return replace(self, clip_radius=float(radius))


def erode(G: RegionSpec, r: float) -> RegionSpec:
    """G minus the closed r-neighbourhood of its boundary."""
    if r < 0.0:
        raise ValueError(f"erosion radius must be nonnegative, got {r}")
    return replace(G, offset=G.offset + r)


def dilate(G: RegionSpec, r: float) -> RegionSpec:
    """Points within distance r of G, together with G."""
    if r < 0.0:
        raise ValueError(f"dilation radius must be nonnegative, got {r}")
    return replace(G, offset=G.offset - r)


@dataclass(frozen=True, eq=False)
class MinkowskiSlice:
    """
    The time slice G + t S, read through the inner or the outer shape model.

    Signed distances are exact for balls, boxes, unions of boxes, half-spaces and
    complements of boxes; for clipped regions the slice is approximated by
    (G + t S) intersected with (B_clip + t S).
    """
    region: RegionSpec
    shape: ConvexShape
    t: float
    model: str = 'inner'
    offset: float = 0.0

    def __post_init__(self):
        if self.t < 0.0:
            raise ValueError(f"time must be nonnegative, got {self.t}")

    @property
    def d(self) -> int:
        return self.region.d

    def _polytope(self) -> ConvexPolytope:
        return self.shape.model(self.model).scaled(self.t)

    def _support(self, e: np.ndarray) -> float:
        poly = self.shape.model(self.model)
        return float(poly.support(e)) * self.t

    def _slice_box(self, x: np.ndarray, lo, hi) -> np.ndarray:
        lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        poly = self._polytope()
        if self.d == 1:
            return np.maximum(lo[0] + poly.lo - x[..., 0], x[..., 0] - hi[0] - poly.hi)
        corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
        sums = (corners[:, None, :] + poly.vertices[None, :, :]).reshape(-1, 2)
        return ConvexPolytope(sums).signed_distance(x)

    def _slice_sd(self, x: np.ndarray) -> np.ndarray:
        G = self.region
        if G.kind == 'halfspace':
            e = np.asarray(G.normal)
            return x @ e - G.level - self._support(e)
        if G.kind == 'ball':
            return self._polytope().signed_distance(x - np.asarray(G.center)) - G.radius
        if G.kind == 'box':
            return self._slice_box(x, G.lo, G.hi)
        if G.kind == 'union':
            return np.min([self._slice_box(x, lo, hi) for lo, hi in G.boxes], axis=0)
        # complement of a box: the box shrinks by t S read backwards
        lo = np.array([a + self._support(np.eye(self.d)[i]) for i, a in enumerate(G.lo)])
        hi = np.array([b - self._support(-np.eye(self.d)[i]) for i, b in enumerate(G.hi)])
        if np.any(lo >= hi):
            return np.full(x.shape[:-1], -np.inf)
        return -_box_sd(x, lo, hi)

    def signed_distance(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if self.t == 0.0:
            return self.region.signed_distance(pts) + self.offset
        sd = self._slice_sd(pts)
        if self.region.clip_radius is not None:
            ball = self._polytope().signed_distance(pts) - self.region.clip_radius
            sd = np.maximum(sd, ball)
        return sd + self.region.offset + self.offset

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) < 0.0

    def eroded(self, r: float) -> 'MinkowskiSlice':
        return replace(self, offset=self.offset + r)

    def dilated(self, r: float) -> 'MinkowskiSlice':
        return replace(self, offset=self.offset - r)


def minkowski_sum(G: RegionSpec, S: ConvexShape, t: float, model: str = 'inner') -> MinkowskiSlice:
    """Membership/distance oracle for G + t S; t = 0 gives G itself."""
    if G.d != S.d:
        raise ShapeError(f"region is {G.d}-d but shape is {S.d}-d")
    return MinkowskiSlice(region=G, shape=S, t=float(t), model=model)


def collar_measure(G: RegionSpec, r: float, points: np.ndarray, cell_volume: float) -> float:
    """Measure of dilate(G, r) minus erode(G, r), counted on cell centers."""
    sd = G.signed_distance(points)
    return float(np.count_nonzero((sd < r) & (sd >= -r))) * cell_volume
