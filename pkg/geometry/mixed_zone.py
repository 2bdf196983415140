from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from common.config import CONFIG
from geometry.regions import RegionSpec, minkowski_sum
from geometry.shapes import ConvexShape
from solver.grid import Field


@dataclass(frozen=True)
class MixedZone:
    measure: float
    outside_cells: int
    inside_cells: int
    cell_volume: float


def mixed_zone_cells(u: Field, G: RegionSpec, S: ConvexShape, t: float, band: Optional[float] = None,
                     thresholds: Optional[Tuple[float, float]] = None, window: Optional[float] = None) -> MixedZone:
    """
    Cells where a snapshot disagrees with the limit indicator of G + t S.

    A cell counts when u > eta0 outside the band-dilation of the slice (outer
    shape model) or u < eta1 inside its band-erosion (inner shape model). Only
    cells centered within `window` of the origin are examined, if given.
    """
    band = CONFIG['experiments']['band'] if band is None else band
    eta0, eta1 = thresholds or CONFIG['experiments']['thresholds']
    if not 0.0 < eta0 < eta1 < 1.0:
        raise ValueError(f"thresholds must satisfy 0 < eta0 < eta1 < 1, got ({eta0}, {eta1})")
    points = u.grid.points()
    values = u.values
    if window is not None:
        keep = np.linalg.norm(points, axis=-1) <= window
        points, values = points[keep], values[keep]
    outer = minkowski_sum(G, S, t, model='outer').signed_distance(points)
    inner = minkowski_sum(G, S, t, model='inner').signed_distance(points)
    outside = int(np.count_nonzero((values > eta0) & (outer >= band)))
    inside = int(np.count_nonzero((values < eta1) & (inner < -band)))
    volume = u.grid.cell_volume
    return MixedZone(measure=(outside + inside) * volume, outside_cells=outside, inside_cells=inside, cell_volume=volume)


def mixed_zone(u: Field, G: RegionSpec, S: ConvexShape, t: float, band: Optional[float] = None,
               thresholds: Optional[Tuple[float, float]] = None, window: Optional[float] = None) -> float:
    """Measure (cell count times h^d) of the cells violating the limit at scaled time t."""
    return mixed_zone_cells(u, G, S, t, band, thresholds, window).measure
