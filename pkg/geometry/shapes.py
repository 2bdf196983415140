"""
Convex shapes stored as sampled radial data.

A ConvexShape holds, for unit directions e_i, the extent s_i of the shape along
the ray through e_i (for a Wulff shape: the spreading speed w(e_i)). Two
polytopes bracket the shape:

  inner  conv{s_i e_i}
  outer  the hull of the inner polygon and, between consecutive rays, the
         corner where the neighbouring chords meet when extended

A convex set containing 0 with the given extents lies between the two, and the
gap shrinks as the direction grid refines.
"""
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from common.config import CONFIG
from common.errors import ShapeError


def direction_grid(d: int, count: Optional[int] = None) -> np.ndarray:
    """Unit directions: (+1, -1) in d = 1, `count` equally spaced angles in d = 2."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    count = count or CONFIG['wulff']['directions'][2]
    angles = 2.0 * math.pi * np.arange(count) / count
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1)


def unit(e: Sequence[float]) -> np.ndarray:
    v = np.asarray(e, dtype=float).reshape(-1)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise ShapeError("direction must be nonzero")
    return v / norm


class ConvexPolytope:
    """Interval (d = 1) or convex polygon (d = 2) given by points, with an exact signed distance."""

    def __init__(self, points: np.ndarray):
        pts = np.asarray(points, dtype=float)
        self.d = pts.shape[-1]
        if self.d == 1:
            self.lo = float(pts.min())
            self.hi = float(pts.max())
            return
        try:
            hull = ConvexHull(pts)
        except QhullError as e:
            raise ShapeError(f"degenerate polygon: {e}") from e
        self.vertices = pts[hull.vertices]
        self.equations = hull.equations

    def support(self, e) -> np.ndarray:
        e = np.asarray(e, dtype=float)
        if self.d == 1:
            return np.maximum(self.hi * e[..., 0], self.lo * e[..., 0])
        return np.max(e @ self.vertices.T, axis=-1)

    def radial(self, e) -> np.ndarray:
        """Extent along the rays through unit directions e (0 must be inside)."""
        e = np.asarray(e, dtype=float)
        if self.d == 1:
            return np.where(e[..., 0] > 0.0, self.hi * e[..., 0], self.lo * e[..., 0])
        normals, offsets = self.equations[:, :2], self.equations[:, 2]
        along = e @ normals.T
        with np.errstate(divide='ignore', invalid='ignore'):
            hits = np.where(along > 0.0, -offsets / along, np.inf)
        return np.min(hits, axis=-1)

    def signed_distance(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if self.d == 1:
            s = pts[..., 0]
            return np.maximum(self.lo - s, s - self.hi)
        flat = pts.reshape(-1, 2)
        out = np.empty(flat.shape[0])
        a = self.vertices
        ab = np.roll(a, -1, axis=0) - a
        ab2 = np.sum(ab * ab, axis=-1)
        chunk = 4096
        for start in range(0, flat.shape[0], chunk):
            p = flat[start:start + chunk]
            inside = np.max(p @ self.equations[:, :2].T + self.equations[:, 2], axis=-1)
            ap = p[:, None, :] - a[None, :, :]
            t = np.clip(np.sum(ap * ab, axis=-1) / ab2, 0.0, 1.0)
            gap = ap - t[..., None] * ab
            outside = np.sqrt(np.min(np.sum(gap * gap, axis=-1), axis=-1))
            out[start:start + chunk] = np.where(inside <= 0.0, inside, outside)
        return out.reshape(pts.shape[:-1])

    def contains(self, x) -> np.ndarray:
        return self.signed_distance(x) <= 0.0

    def scaled(self, factor: float) -> 'ConvexPolytope':
        if self.d == 1:
            return ConvexPolytope(np.array([[self.lo * factor], [self.hi * factor]]))
        return ConvexPolytope(self.vertices * factor)


def _sector_corner(prev_pt, p, q, next_pt, e0, e1) -> np.ndarray:
    """
    Vertices of {x in the cone between e0 and e1} cut by the extensions of the
    chords (prev_pt, p) and (next_pt, q), origin excluded.
    """
    halfspaces = [
        [e0[1], -e0[0], 0.0],
        [-e1[1], e1[0], 0.0],
    ]
    for a, b in ((prev_pt, p), (next_pt, q)):
        chord = b - a
        n = np.array([chord[1], -chord[0]])
        level = float(n @ a)
        if level < 0.0:
            n, level = -n, -level
        if level > 0.0:
            halfspaces.append([n[0], n[1], -level])
    try:
        cut = HalfspaceIntersection(np.array(halfspaces), (p + q) / 4.0)
    except QhullError as e:
        raise ShapeError(f"outer model is degenerate between {p.tolist()} and {q.tolist()}: {e}") from e
    corners = cut.intersections
    if not np.all(np.isfinite(corners)):
        raise ShapeError(f"outer model is unbounded between {p.tolist()} and {q.tolist()}; data are not convex")
    return corners[np.linalg.norm(corners, axis=-1) > 1e-12]


@dataclass(frozen=True, eq=False)
class ConvexShape:
    """
    Radial samples s_i >= 0 of a convex shape containing 0.

    In d = 2 directions are kept sorted by angle.
    """
    d: int
    directions: np.ndarray
    support_values: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.directions, dtype=float).reshape(-1, self.d)
        s = np.asarray(self.support_values, dtype=float).reshape(-1)
        if e.shape[0] != s.shape[0]:
            raise ShapeError(f"{e.shape[0]} directions but {s.shape[0]} support values")
        if np.any(s < 0.0) or not np.all(np.isfinite(s)):
            raise ShapeError("support values must be finite and nonnegative (0 must lie in the shape)")
        norms = np.linalg.norm(e, axis=-1)
        if np.any(norms == 0.0):
            raise ShapeError("directions must be nonzero")
        e = e / norms[:, None]
        if self.d == 2:
            order = np.argsort(np.mod(np.arctan2(e[:, 1], e[:, 0]), 2.0 * math.pi), kind='stable')
            e, s = e[order], s[order]
        object.__setattr__(self, 'directions', e)
        object.__setattr__(self, 'support_values', s)

    @classmethod
    def from_radial(cls, d: int, r: Callable[[np.ndarray], np.ndarray], count: Optional[int] = None) -> 'ConvexShape':
        e = direction_grid(d, count)
        return cls(d=d, directions=e, support_values=np.asarray(r(e), dtype=float))

    @classmethod
    def ball(cls, d: int, radius: float, count: Optional[int] = None) -> 'ConvexShape':
        return cls.from_radial(d, lambda e: np.full(e.shape[0], float(radius)), count)

    @property
    def vertices(self) -> np.ndarray:
        """Boundary samples s_i e_i, the generators of the inner model."""
        return self.support_values[:, None] * self.directions

    @cached_property
    def inner(self) -> ConvexPolytope:
        pts = self.vertices
        if self.d == 2:
            pts = np.vstack([pts, np.zeros((1, 2))])
        return ConvexPolytope(pts)

    @cached_property
    def outer(self) -> ConvexPolytope:
        if self.d == 1:
            return self.inner
        if np.any(self.support_values <= 0.0):
            raise ShapeError("outer model needs strictly positive support values")
        p = self.vertices
        n = len(p)
        corners = [p]
        for i in range(n):
            corners.append(_sector_corner(p[i - 1], p[i], p[(i + 1) % n], p[(i + 2) % n],
                                          self.directions[i], self.directions[(i + 1) % n]))
        return ConvexPolytope(np.vstack(corners))

    def model(self, which: str) -> ConvexPolytope:
        if which not in ('inner', 'outer'):
            raise ValueError(f"unknown shape model '{which}'")
        return self.inner if which == 'inner' else self.outer

    def support(self, e) -> np.ndarray:
        """sup over the inner model of y . e, for one direction (d,) or a batch (..., d)."""
        e = np.asarray(e, dtype=float)
        return np.maximum(np.max(e @ self.vertices.T, axis=-1), 0.0)

    def contains_inner(self, x) -> np.ndarray:
        return self.inner.contains(x)

    def contains_outer(self, x) -> np.ndarray:
        return self.outer.contains(x)

    def max_support(self) -> float:
        return float(self.support_values.max())

    def convexity_defect(self) -> float:
        """
        Largest amount by which a sample sits strictly inside conv{s_j e_j}.

        max_i (extent of the hull along e_i - s_i), floored at 0; zero for convex data.
        """
        if self.d == 1:
            return 0.0
        reach = self.inner.radial(self.directions)
        return float(np.max(np.maximum(reach - self.support_values, 0.0)))

    def lipschitz_constant(self) -> float:
        """max |s_i - s_j| / |e_i - e_j| over neighbouring directions."""
        if len(self.support_values) < 2:
            return 0.0
        e_next = np.roll(self.directions, -1, axis=0)
        s_next = np.roll(self.support_values, -1)
        return float(np.max(np.abs(self.support_values - s_next) / np.linalg.norm(self.directions - e_next, axis=-1)))

    def bracket_gap(self, fine: Optional[int] = None) -> float:
        """Hausdorff distance between the inner and the outer model."""
        if self.d == 1:
            return 0.0
        e = direction_grid(2, fine or CONFIG['wulff']['fine_directions'])
        return float(np.max(self.outer.support(e) - self.support(e)))

    def angles(self) -> np.ndarray:
        if self.d == 1:
            return np.where(self.directions[:, 0] > 0.0, 0.0, math.pi)
        return np.mod(np.arctan2(self.directions[:, 1], self.directions[:, 0]), 2.0 * math.pi)

    def to_rows(self) -> List[Tuple[float, float]]:
        return [(float(a), float(s)) for a, s in zip(self.angles(), self.support_values)]

    def to_dict(self):
        return {'d': self.d, 'directions': self.directions.tolist(), 'support_values': self.support_values.tolist(),
                'convexity_defect': self.convexity_defect()}


def support_function(shape: ConvexShape, e, model: str = 'inner') -> float:
    """
    c*(e) = sup over the shape of y . e.

    The inner polygon sits inside the true shape, so between sampled directions
    its support is biased low: for the ball sampled at n equally spaced angles it
    is r cos(pi / n) midway between two samples. The outer model bounds the
    truth from above; ConvexShape.bracket_gap is the width of the bracket.
    """
    if model == 'outer':
        return float(shape.outer.support(unit(e)))
    if model != 'inner':
        raise ShapeError(f"unknown shape model '{model}' (known: inner, outer)")
    return float(shape.support(unit(e)))


def shape_from_speeds(pairs: Iterable[Tuple[Sequence[float], float]], max_gap: Optional[float] = None) -> ConvexShape:
    """
    Build a ConvexShape from measured (direction, speed) pairs.

    Args:
        pairs: (direction, speed) per measured direction
        max_gap: Largest angle in rad allowed between neighbouring directions in d = 2
            (CONFIG default); it caps the inner model's bias at 1 - cos(max_gap / 2)

    Raises:
        ShapeError: a nonpositive speed, or directions further apart than max_gap
    """
    items = list(pairs)
    if not items:
        raise ShapeError("no (direction, speed) pairs")
    e = np.array([unit(direction) for direction, _ in items])
    w = np.array([float(speed) for _, speed in items])
    bad = [e[i].tolist() for i, v in enumerate(w) if not v > 0.0]
    if bad:
        raise ShapeError(f"nonpositive speed in direction(s) {bad}")
    d = e.shape[1]
    if d == 1:
        if not (np.any(e[:, 0] > 0) and np.any(e[:, 0] < 0)):
            raise ShapeError("a d = 1 shape needs speeds in both directions")
    else:
        limit = min(CONFIG['wulff']['max_angular_gap'] if max_gap is None else max_gap, math.pi)
        angles = np.sort(np.mod(np.arctan2(e[:, 1], e[:, 0]), 2.0 * math.pi))
        gaps = np.diff(np.concatenate([angles, angles[:1] + 2.0 * math.pi]))
        if gaps.max() >= math.pi:
            raise ShapeError(f"directions leave an angular gap of {gaps.max()!r} rad; the shape would be unbounded")
        if gaps.max() > limit * (1.0 + 1e-9):
            raise ShapeError(f"directions leave an angular gap of {gaps.max()!r} rad, above the allowed {limit!r}")
    return ConvexShape(d=d, directions=e, support_values=w)


def hausdorff(a: ConvexShape, b, fine: Optional[int] = None) -> float:
    """
    sup over a fine direction grid of |h_a(e) - h_b(e)|.

    `b` is a ConvexShape or a support function mapping (n, d) directions to (n,) values.
    """
    e = direction_grid(a.d, fine or CONFIG['wulff']['fine_directions'])
    hb = b.support(e) if isinstance(b, ConvexShape) else np.asarray(b(e), dtype=float)
    return float(np.max(np.abs(a.support(e) - hb)))
