import concurrent.futures
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from tqdm import tqdm

from common.config import CONFIG
from common.errors import UnresolvedPassageError
from common.logger import Logger
from common.utils import provenance, write_csv, write_json
from geometry.shapes import ConvexShape, direction_grid, hausdorff, shape_from_speeds, support_function
from solver.grid import Field, Grid
from solver.solver import as_model, solve
from wulff.passage import (
    build_passage_table, default_h, pairs_for_triples, random_triples,
    recheck_persistence, regularity_check, subadditivity_check,
)
from wulff.speed import SpeedEstimate, front_speed_direct, spreading_speed


@dataclass
class WulffEstimate:
    """Shape from the first medium, plus the shapes of the other seeds for the spread."""
    shape: ConvexShape
    speeds: List[SpeedEstimate]
    seeds: List[int] = field(default_factory=list)
    seed_shapes: List[ConvexShape] = field(default_factory=list)

    @property
    def spread(self) -> float:
        """Largest support-function distance between the first shape and another seed's."""
        return max((hausdorff(self.shape, other) for other in self.seed_shapes[1:]), default=0.0)

    @property
    def convexity_defect(self) -> float:
        return self.shape.convexity_defect()

    @property
    def uncertainty(self) -> float:
        return max((s.uncertainty for s in self.speeds), default=0.0)

    def to_rows(self) -> List[List[float]]:
        return [[angle, speed, est.uncertainty] for (angle, speed), est in zip(self.shape.to_rows(), self._speeds_in_shape_order())]

    def _speeds_in_shape_order(self) -> List[SpeedEstimate]:
        by_direction = {tuple(np.round(s.direction, 12)): s for s in self.speeds}
        return [by_direction[tuple(np.round(e, 12))] for e in self.shape.directions]

    def to_dict(self) -> Dict[str, Any]:
        return {'shape': self.shape.to_dict(), 'speeds': [s.to_dict() for s in self.speeds], 'seeds': self.seeds,
                'spread': self.spread, 'convexity_defect': self.convexity_defect, 'uncertainty': self.uncertainty,
                'bracket_gap': self.shape.bracket_gap()}


def estimate_wulff(media: Union[Any, Sequence[Any]], directions: Optional[Union[int, np.ndarray]] = None,
                   n_ladder: Optional[Sequence[int]] = None, horizon: Optional[int] = None,
                   window: Optional[int] = None, h: Optional[float] = None, reaction=None,
                   max_workers: int = 1, logger: Optional[Logger] = None) -> WulffEstimate:
    """
    Spreading speeds in every direction, for every medium, assembled into shapes.

    Args:
        media: One medium/model or a list of them (independent seeds of one law)
        directions: Direction array (n, d) or a count for the uniform grid

    Raises:
        UnresolvedPassageError: some (medium, direction) speed could not be measured
    """
    ensemble = list(media) if isinstance(media, (list, tuple)) else [media]
    models = [as_model(m, reaction) for m in ensemble]
    d = models[0].d
    if directions is None or isinstance(directions, int):
        grid_e = direction_grid(d, directions)
    else:
        grid_e = np.asarray(directions, dtype=float).reshape(-1, d)
    tasks = [(i, j) for i in range(len(models)) for j in range(len(grid_e))]
    speeds: Dict[tuple, SpeedEstimate] = {}
    failures: Dict[tuple, str] = {}

    if logger:
        logger.info(f"[wulff] Measuring {len(grid_e)} directions on {len(models)} media ({len(tasks)} speed ladders)")
    with tqdm(total=len(tasks), desc="Wulff directions", unit="ladder", leave=False) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
            future_to_task = {executor.submit(spreading_speed, models[i], grid_e[j], n_ladder, horizon, window, h): (i, j)
                              for i, j in tasks}
            for future in concurrent.futures.as_completed(future_to_task):
                task = future_to_task[future]
                try:
                    speeds[task] = future.result()
                except Exception as e:
                    failures[task] = f"{type(e).__name__}: {e}"
                    if logger:
                        logger.debug(f"[wulff] medium {task[0]} direction {grid_e[task[1]].tolist()} failed: {e}")
                pbar.update(1)
    if failures:
        raise UnresolvedPassageError(f"{len(failures)} of {len(tasks)} speed ladders failed: "
                                     + "; ".join(f"{k}: {v}" for k, v in sorted(failures.items())))

    shapes = [shape_from_speeds((grid_e[j], speeds[(i, j)].speed) for j in range(len(grid_e))) for i in range(len(models))]
    seeds = [getattr(getattr(m, 'medium', m), 'seed', i) for i, m in enumerate(models)]
    estimate = WulffEstimate(shape=shapes[0], speeds=[speeds[(0, j)] for j in range(len(grid_e))], seeds=seeds,
                             seed_shapes=shapes)
    if logger:
        logger.success(f"[wulff] Shape from {len(grid_e)} directions: max speed {shapes[0].max_support()!r}, "
                       f"convexity defect {estimate.convexity_defect!r}, cross-seed spread {estimate.spread!r}")
    return estimate


@dataclass
class StrongWulffReport:
    t: float
    delta: float
    theta: float
    shifts: List[List[float]] = field(default_factory=list)
    results: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def pass_fraction(self) -> float:
        return sum(1 for r in self.results if r['passed']) / len(self.results) if self.results else math.nan

    @property
    def passed(self) -> bool:
        return bool(self.results) and all(r['passed'] for r in self.results)

    def to_dict(self) -> Dict[str, Any]:
        return {'t': self.t, 'delta': self.delta, 'theta': self.theta, 'results': self.results,
                'pass_fraction': self.pass_fraction}


def _probe_shift(model, shape: ConvexShape, y, t: float, delta: float, theta: float, h: float) -> Dict[str, Any]:
    shifted = model.shifted(y)
    radius = (1.0 + delta) * t * shape.outer.support(direction_grid(shape.d, 64)).max() + 1.0 + CONFIG['grid']['margin']
    grid = Grid.centered(model.d, h, radius)
    u0 = Field.ball(grid, np.zeros(model.d), 1.0, 0.5)
    u = solve(u0, shifted, t, boundary_tolerance=CONFIG['solver']['boundary_tolerance']).field
    points = grid.points()
    level_set = u.values >= theta
    inner = shape.inner.scaled((1.0 - delta) * t).contains(points)
    outer = shape.outer.scaled((1.0 + delta) * t).contains(points)
    missing = int(np.count_nonzero(inner & ~level_set))
    excess = int(np.count_nonzero(level_set & ~outer))
    return {'shift': [float(v) for v in np.atleast_1d(y)], 'inner_violations': missing, 'outer_violations': excess,
            'passed': missing == 0 and excess == 0}


def strong_wulff_probe(m, shifts: Sequence[Sequence[float]], t: float, delta: float, shape: ConvexShape,
                       theta: Optional[float] = None, h: Optional[float] = None, reaction=None,
                       max_workers: int = 1, logger: Optional[Logger] = None) -> StrongWulffReport:
    """
    For each shift y check (1 - delta) t S within {x : u(t, x + y) >= theta} within (1 + delta) t S,
    with u(., .; y) started from (1/2) chi_{B_1(y)}.
    """
    model = as_model(m, reaction)
    theta = CONFIG['wulff']['probe_theta'] if theta is None else theta
    h = default_h(model.d) if h is None else h
    report = StrongWulffReport(t=t, delta=delta, theta=theta, shifts=[list(np.atleast_1d(y)) for y in shifts])
    results: Dict[int, Dict[str, Any]] = {}
    with tqdm(total=len(shifts), desc="Strong Wulff", unit="shift", leave=False) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
            future_to_index = {executor.submit(_probe_shift, model, shape, np.asarray(y, dtype=float), t, delta, theta, h): i
                               for i, y in enumerate(shifts)}
            for future in concurrent.futures.as_completed(future_to_index):
                i = future_to_index[future]
                try:
                    results[i] = future.result()
                except Exception as e:
                    results[i] = {'shift': list(np.atleast_1d(shifts[i])), 'passed': False, 'error': f"{type(e).__name__}: {e}"}
                    if logger:
                        logger.debug(f"[strong-wulff] shift {shifts[i]} failed: {e}")
                pbar.update(1)
    report.results = [results[i] for i in range(len(shifts))]
    if logger:
        logger.info(f"[strong-wulff] {report.pass_fraction:.0%} of {len(shifts)} shifts pass at t={t!r}, delta={delta!r}")
    return report


def circle_shifts(d: int, count: int, radius: float) -> List[List[float]]:
    if d == 1:
        return [[radius if k % 2 == 0 else -radius] for k in range(count)]
    angles = 2.0 * math.pi * np.arange(count) / count
    return [[radius * math.cos(a), radius * math.sin(a)] for a in angles]


# --- `wulff` command ---------------------------------------------------------

def run(args: Any, config: Dict, logger: Logger, workflow_data: Dict) -> Dict:
    """
    Estimates the Wulff shape and runs the configured diagnostics around it.
    """
    from common.run_config import build_model
    from experiments.hair_trigger import hair_trigger_campaign

    run_config = workflow_data['run_config']
    run_dir = workflow_data['run_dir']
    exp = run_config.experiment
    meta = provenance(workflow_data['config_hash'], run_config.seed)
    workers = getattr(args, 'threads', None) or 1
    h = run_config.grid['h']
    seeds = [run_config.seed + k for k in range(exp['seeds'])]
    models = [build_model(run_config, seed=s) for s in seeds]
    model = models[0]
    d = model.d
    summary: Dict[str, Any] = {}
    checks: Dict[str, bool] = {}
    artifacts = []

    estimate = estimate_wulff(models, exp['directions'], exp['ladder'], exp['horizon'], exp['window'], h,
                              max_workers=workers, logger=logger)
    shape = estimate.shape
    artifacts.append(write_csv(run_dir / config['files']['shape'], ['angle', 'speed', 'uncertainty'],
                               estimate.to_rows(), meta))
    summary.update({'max_speed': shape.max_support(), 'min_speed': float(shape.support_values.min()),
                    'convexity_defect': estimate.convexity_defect, 'spread': estimate.spread,
                    'lipschitz_constant': shape.lipschitz_constant()})
    checks['convexity_defect'] = estimate.convexity_defect <= exp['defect_tolerance'] * shape.max_support()
    # c <= w <= 1/c bounds the slope of w between grid directions by 1/c
    c = min(float(shape.support_values.min()), 1.0 / shape.max_support())
    checks['lipschitz_consistency'] = shape.lipschitz_constant() <= 1.0 / c
    if hasattr(model, 'supersolution_speed'):
        checks['speeds_below_supersolution_bound'] = shape.max_support() <= model.supersolution_speed()
    if exp.get('expected_radius') is not None:
        radius = exp['expected_radius']
        distance = hausdorff(shape, lambda e: np.full(len(e), radius))
        summary['hausdorff_to_ball'] = distance
        checks['wulff_ball_oracle'] = distance <= exp['wulff_tolerance'] * radius

    document: Dict[str, Any] = {'estimate': estimate.to_dict()}
    if exp['front_directions']:
        fronts = []
        for e in direction_grid(d, exp['front_directions']) if d == 2 else direction_grid(1):
            c = front_speed_direct(model, e, exp['front_time'], h).speed
            fronts.append({'direction': e.tolist(), 'front_speed': c, 'support': support_function(shape, e)})
        document['front_speeds'] = fronts
        checks['front_speed_formula'] = all(abs(f['front_speed'] - f['support']) <= exp['wulff_tolerance'] * f['support']
                                            for f in fronts)

    if exp['hair_theta'] is not None:
        campaign = hair_trigger_campaign(models, exp['hair_theta'], exp['hair_eta'], max_workers=workers, logger=logger, h=h)
        document['hair_trigger'] = campaign.to_dict()
        summary['burn_in'] = campaign.uniform_time
        checks['hair_trigger_resolved'] = not campaign.failures

    if exp['strong_shifts']:
        t = exp['strong_time']
        if exp['hair_theta'] is not None and math.isfinite(summary['burn_in']) and t < summary['burn_in']:
            logger.warning(f"[wulff] strong probe time {t!r} is below the burn-in {summary['burn_in']!r}")
        shifts = circle_shifts(d, exp['strong_shifts'], t)
        report = strong_wulff_probe(model, shifts, t, exp['strong_delta'], shape, exp['theta'], h,
                                    max_workers=workers, logger=logger)
        rows = [[*r['shift'], r.get('inner_violations', ''), r.get('outer_violations', ''), r['passed']]
                for r in report.results]
        artifacts.append(write_csv(run_dir / config['files']['strong_wulff'],
                                   [f"y{i}" for i in range(d)] + ['inner_violations', 'outer_violations', 'passed'],
                                   rows, meta))
        document['strong_wulff'] = report.to_dict()
        summary['strong_pass_fraction'] = report.pass_fraction
        checks['strong_wulff'] = report.pass_fraction >= exp['strong_pass_fraction']

    if exp['triples']:
        triples = random_triples(d, exp['triples'], exp['triple_extent'], run_config.seed)
        table = build_passage_table(model, pairs_for_triples(triples), exp['horizon'], exp['window'], h,
                                    max_workers=workers, logger=logger)
        sub = subadditivity_check(table, triples)
        reg = regularity_check(table)
        recheck = recheck_persistence(model, table, seed=run_config.seed, h=h, max_workers=workers, logger=logger)
        artifacts.append(write_csv(run_dir / config['files']['passage_table'], table.header(d), table.to_rows(), meta))
        document['passage'] = {'subadditivity': sub.to_dict(), 'regularity': reg.to_dict(), 'recheck': recheck,
                               'failures': {f"{y}->{z}": msg for (y, z), msg in table.failures.items()}}
        summary.update({'fitted_C': reg.C, 'subadditivity_worst_excess': sub.worst_excess})
        checks['subadditivity'] = sub.passed
        checks['regularity'] = reg.passed
        checks['passage_persistence'] = not recheck['disagreements']
        if sub.violations:
            logger.warning(f"[wulff] {len(sub.violations)} subadditivity violation(s)")

    artifacts.append(write_json(run_dir / config['files']['wulff'], document, meta))
    return {'summary': summary, 'checks': checks, 'artifacts': artifacts}
