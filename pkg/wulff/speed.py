import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from common.config import CONFIG
from common.errors import DomainTooSmallError, UnresolvedPassageError
from common.logger import Logger
from common.utils import provenance, write_csv, write_json
from geometry.shapes import unit
from solver.grid import Field, Grid
from solver.solver import as_model, richardson_in_h, solve, spreading_bound
from wulff.passage import default_h, first_passage


@dataclass
class SpeedEstimate:
    direction: List[float]
    ladder: List[int]
    times: List[int]
    speed: float
    uncertainty: float
    resolution: float = 0.0

    @property
    def values(self) -> List[float]:
        """n / tau(0, n e) per rung."""
        return [n / t if t > 0 else math.inf for n, t in zip(self.ladder, self.times)]

    def to_dict(self) -> Dict[str, Any]:
        return {'direction': self.direction, 'ladder': self.ladder, 'times': self.times, 'values': self.values,
                'speed': self.speed, 'uncertainty': self.uncertainty, 'resolution': self.resolution}


def _secant(n1: int, t1: int, n2: int, t2: int) -> float:
    return (n2 - n1) / (t2 - t1) if t2 > t1 else n2 / max(t2, 1)


def extrapolate_speed(ladder: Sequence[int], times: Sequence[int]) -> Dict[str, float]:
    """
    Two-point Richardson extrapolation in 1/n from the last two rungs.

    The extrapolated quantity is the slowness tau_n / n = 1/w + c/n, which is
    exactly linear in 1/n when the passage time carries an additive delay c;
    eliminating c gives w = (n2 - n1) / (tau2 - tau1). The uncertainty is the
    change from the previous pair of rungs (or from the raw ratio with only two
    rungs). Passage times are integers, so a +/-1 change in either of the last
    two moves w by up to 1 / (tau2 - tau1 - 1) relatively; that bound is
    returned as the resolution.
    """
    if len(ladder) < 2:
        raise ValueError("speed extrapolation needs at least two rungs")
    w = _secant(ladder[-2], times[-2], ladder[-1], times[-1])
    if len(ladder) >= 3:
        previous = _secant(ladder[-3], times[-3], ladder[-2], times[-2])
    else:
        previous = ladder[-1] / max(times[-1], 1)
    gap = times[-1] - times[-2]
    resolution = 1.0 / (gap - 1) if gap > 1 else math.inf
    return {'speed': w, 'uncertainty': abs(w - previous), 'resolution': resolution}


def spreading_speed(m, e: Sequence[float], n_ladder: Optional[Sequence[int]] = None, horizon: Optional[int] = None,
                    window: Optional[int] = None, h: Optional[float] = None, reaction=None,
                    max_workers: int = 1, logger: Optional[Logger] = None) -> SpeedEstimate:
    """
    Estimate w(e) from tau(0, n e) along a geometric ladder of n.

    Raises:
        UnresolvedPassageError: some rung did not resolve within the horizon
    """
    model = as_model(m, reaction)
    direction = unit(e)
    ladder = list(n_ladder or CONFIG['speed']['ladder'][model.d])
    origin = np.zeros(model.d)
    times: Dict[int, Optional[int]] = {}

    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        future_to_rung = {executor.submit(first_passage, model, origin, n * direction, horizon, window, h): n for n in ladder}
        for future in concurrent.futures.as_completed(future_to_rung):
            times[future_to_rung[future]] = future.result()

    missing = [n for n in ladder if times[n] is None]
    if missing:
        raise UnresolvedPassageError(f"rungs {missing} unresolved in direction {direction.tolist()}")
    taus = [int(times[n]) for n in ladder]
    fit = extrapolate_speed(ladder, taus)
    if logger:
        logger.debug(f"[speed] e={direction.tolist()} tau={taus} -> w={fit['speed']!r} +/- {fit['uncertainty']!r}")
        if fit['resolution'] > CONFIG['speed']['max_resolution']:
            logger.warning(f"[speed] e={direction.tolist()}: last rungs differ by {taus[-1] - taus[-2]} periods, "
                           f"so one period moves w by {fit['resolution']:.1%}; extend the ladder")
    return SpeedEstimate(direction=direction.tolist(), ladder=ladder, times=taus, speed=fit['speed'],
                         uncertainty=fit['uncertainty'], resolution=fit['resolution'])


def front_position(u: Field, e: Sequence[float], level: float = 0.5) -> float:
    """
    Furthest level crossing along e of the profile s -> max{u(x) : x . e in bin(s)}.

    Cells are binned by x . e with bin width h; the crossing is interpolated linearly
    between the last bin at or above `level` and the next one. Returns nan when no
    cell reaches the level.
    """
    direction = unit(e)
    h = u.grid.h
    s = np.tensordot(u.grid.points(), direction, axes=1).ravel()
    values = u.values.ravel()
    bins = np.floor(s / h).astype(np.int64)
    lo = bins.min()
    profile = np.full(bins.max() - lo + 1, -np.inf)
    np.maximum.at(profile, bins - lo, values)
    centers = (np.arange(profile.size) + lo + 0.5) * h
    above = np.nonzero(profile >= level)[0]
    if above.size == 0:
        return math.nan
    i = int(above[-1])
    if i + 1 >= profile.size or not np.isfinite(profile[i + 1]):
        return float(centers[i])
    a, b = profile[i], profile[i + 1]
    frac = 0.0 if a == b else (a - level) / (a - b)
    return float(centers[i] + frac * h)


@dataclass
class FrontSpeed:
    direction: List[float]
    speed: float
    times: List[float] = field(default_factory=list)
    positions: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {'direction': self.direction, 'speed': self.speed, 'times': self.times, 'positions': self.positions}


def front_speed_direct(m, e: Sequence[float], T: Optional[float] = None, h: Optional[float] = None, reaction=None,
                       width: Optional[float] = None) -> FrontSpeed:
    """
    Front speed from half-space data (1/2) chi_{x . e < 0}.

    The data fill a band of depth `front_back` behind the origin (and of total
    width `width` across e in d = 2). The 1/2-crossing of the max profile is
    recorded at integer times and c(e) is the least-squares slope over the last
    half of [0, T].

    Raises:
        DomainTooSmallError: the front came within front_margin / 2 of the far edge
    """
    model = as_model(m, reaction)
    cfg = CONFIG['speed']
    T = float(cfg['front_time'] if T is None else T)
    h = default_h(model.d) if h is None else h
    direction = unit(e)
    back, margin = cfg['front_back'], cfg['front_margin']
    reach = spreading_bound(model, h) * T + margin

    if model.d == 1:
        lo, hi = (-back, reach) if direction[0] > 0 else (-reach, back)
        grid = Grid.covering(1, h, [lo], [hi])
    else:
        half = (width or 2.0 * margin) / 2.0
        across = np.array([-direction[1], direction[0]])
        corners = np.array([a * direction + b * across for a in (-back, reach) for b in (-half, half)])
        grid = Grid.covering(2, h, corners.min(axis=0), corners.max(axis=0))
    points = grid.points()
    along = np.tensordot(points, direction, axes=1)
    mask = (along < 0.0) & (along >= -back)
    if model.d == 2:
        mask &= np.abs(np.tensordot(points, np.array([-direction[1], direction[0]]), axes=1)) <= half
    u0 = Field.indicator(grid, mask, 0.5)
    limit = reach - margin / 2.0
    times: List[float] = []
    positions: List[float] = []

    def record_front(u: Field) -> bool:
        s = front_position(u, direction)
        if s > limit:
            raise DomainTooSmallError(f"front at {s!r} reached the far edge {reach!r} at t={u.time!r}")
        times.append(float(u.time))
        positions.append(s)
        return False

    solve(u0, model, T, stop_when=record_front)
    late = [(t, s) for t, s in zip(times, positions) if t >= T / 2.0 and np.isfinite(s)]
    if len(late) < 2:
        raise UnresolvedPassageError(f"front in direction {direction.tolist()} never reached level 1/2")
    slope = float(np.polyfit([t for t, _ in late], [s for _, s in late], 1)[0])
    return FrontSpeed(direction=direction.tolist(), speed=slope, times=times, positions=positions)


# --- `speed` command ---------------------------------------------------------

def run(args: Any, config: Dict, logger: Logger, workflow_data: Dict) -> Dict:
    """
    Measures spreading and front speeds per configured direction, over an h ladder if given.
    """
    from common.run_config import build_model

    run_config = workflow_data['run_config']
    run_dir = workflow_data['run_dir']
    exp = run_config.experiment
    meta = provenance(workflow_data['config_hash'], run_config.seed)
    model = build_model(run_config)
    d = model.d
    directions = [unit(v) for v in exp['directions']]
    hs = run_config.grid['h_ladder'] or [run_config.grid['h']]
    workers = getattr(args, 'threads', None) or 1

    ladder_rows, front_rows, results = [], [], []
    for e in directions:
        per_h = []
        for h in hs:
            logger.info(f"[speed] Direction {e.tolist()} at h={h!r}")
            entry: Dict[str, Any] = {'direction': e.tolist(), 'h': h}
            if exp['spreading']:
                est = spreading_speed(model, e, exp['ladder'], exp['horizon'], exp['window'], h,
                                      max_workers=workers, logger=logger)
                entry['spreading'] = est.to_dict()
                ladder_rows.extend([*e.tolist(), h, n, t, v] for n, t, v in zip(est.ladder, est.times, est.values))
            front = front_speed_direct(model, e, exp['front_time'], h)
            entry['front'] = front.speed
            front_rows.extend([*e.tolist(), h, t, s] for t, s in zip(front.times, front.positions))
            per_h.append(entry)
        summary = {'direction': e.tolist(), 'per_h': per_h}
        if len(hs) >= 2:
            summary['front_extrapolated'] = richardson_in_h(hs, [p['front'] for p in per_h])
            if exp['spreading']:
                summary['spreading_extrapolated'] = richardson_in_h(hs, [p['spreading']['speed'] for p in per_h])
        summary['front_speed'] = summary.get('front_extrapolated', per_h[-1]['front'])
        if exp['spreading']:
            summary['spreading_speed'] = summary.get('spreading_extrapolated', per_h[-1]['spreading']['speed'])
        results.append(summary)
        logger.success(f"[speed] e={e.tolist()}: front {summary['front_speed']!r}"
                       + (f", spreading {summary['spreading_speed']!r}" if exp['spreading'] else ''))

    bound = spreading_bound(model, hs[-1])
    a = model.supersolution_speed() if hasattr(model, 'supersolution_speed') else bound
    checks = {'speeds_below_supersolution_bound': all(r['front_speed'] <= a and r.get('spreading_speed', 0.0) <= a
                                                      for r in results)}
    if exp['spreading']:
        checks['ladder_resolution'] = all(p['spreading']['resolution'] <= config['speed']['max_resolution']
                                          for r in results for p in r['per_h'])
    if exp.get('expected_speed') is not None:
        tol = exp['speed_tolerance']
        target = exp['expected_speed']
        checks['speed_oracle'] = all(abs(r['front_speed'] - target) <= tol * target and
                                     abs(r.get('spreading_speed', target) - target) <= tol * target for r in results)

    axes = [f"e{i}" for i in range(d)]
    artifacts = [
        write_json(run_dir / config['files']['speeds'], {'directions': results, 'supersolution_speed': a}, meta),
        write_csv(run_dir / config['files']['front'], axes + ['h', 'time', 'position'], front_rows, meta),
    ]
    if ladder_rows:
        artifacts.append(write_csv(run_dir / config['files']['speed_ladder'], axes + ['h', 'n', 'tau', 'n_over_tau'],
                                   ladder_rows, meta))
    return {
        'summary': {'directions': len(results), 'front_speeds': [r['front_speed'] for r in results],
                    'spreading_speeds': [r.get('spreading_speed') for r in results], 'supersolution_speed': a},
        'checks': checks,
        'artifacts': artifacts,
    }
