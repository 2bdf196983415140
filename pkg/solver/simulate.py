from typing import Any, Dict, List, Sequence

import numpy as np

from common.config import CONFIG
from common.logger import Logger
from common.utils import provenance, write_csv, write_json
from solver.grid import Field, Grid
from solver.snapshots import write_snapshot
from solver.solver import LocalModel, SolveResult, solve, spreading_bound, supersolution_excess, truncation_margin


def initial_field(grid: Grid, kind: str, level: float, radius: float, region=None) -> Field:
    if kind == 'constant':
        return Field.constant(grid, level)
    if kind == 'region':
        return Field.indicator(grid, region.contains(grid.points()), level)
    return Field.ball(grid, np.zeros(grid.d), radius, level)


def domain_radius(model, r0: float, T: float, h: float) -> float:
    """r0 + (spread rate) T + the truncation margin; the local rate is the supersolution speed."""
    rate = model.supersolution_speed() if isinstance(model, LocalModel) else spreading_bound(model, h)
    return r0 + rate * T + truncation_margin()


def observation_rows(result: SolveResult) -> List[List[Any]]:
    rows = []
    for obs in result.observations:
        u = obs.field
        rows.append([obs.time, obs.label, float(u.values.min()), float(u.values.max()),
                     float(u.values.sum() * u.grid.cell_volume), u.boundary_activity()])
    return rows


def supersolution_report(result: SolveResult, model, x0: float) -> Dict[str, Any]:
    """Excess of u over e^{a t - (x . e - x0)} along the coordinate half-axes, over all observations."""
    a = model.supersolution_speed()
    d = model.d
    excess = {}
    for axis in range(d):
        for sign in (1.0, -1.0):
            e = np.zeros(d)
            e[axis] = sign
            excess[f"{'+' if sign > 0 else '-'}e{axis}"] = supersolution_excess(result.trajectory(), e, e * x0, a)
    return {'a': a, 'x0': x0, 'excess': excess, 'passed': max(excess.values()) <= 1e-12}


# --- `simulate` command ------------------------------------------------------

def run(args: Any, config: Dict, logger: Logger, workflow_data: Dict) -> Dict:
    """
    Solves the configured initial datum to time T, recording integer-time and requested observations.
    """
    from common.run_config import build_model, build_region

    run_config = workflow_data['run_config']
    run_dir = workflow_data['run_dir']
    exp = run_config.experiment
    meta = provenance(workflow_data['config_hash'], run_config.seed)
    model = build_model(run_config)
    h = run_config.grid['h']
    T = exp['T']
    region = build_region(run_config) if exp['initial'] == 'region' else None
    r0 = region.bounding_radius() if region is not None else exp['radius']
    radius = run_config.grid['radius'] or domain_radius(model, r0, T, h)
    grid = Grid.centered(model.d, h, radius)
    u0 = initial_field(grid, exp['initial'], exp['level'], exp['radius'], region)

    snapshots: Sequence[float] = getattr(args, 'emit_snapshots', None) or []
    wanted = sorted({float(k) for k in range(int(T) + 1)} | {float(t) for t in exp['observe']} | {float(t) for t in snapshots})
    observers = [(t, f"t={t!r}") for t in wanted if t <= T]
    logger.info(f"[simulate] {type(model).__name__} on {grid.extents} cells (h={h!r}) to T={T!r}")
    # a constant datum fills the whole grid, so the boundary monitor does not apply
    tolerance = None if exp['initial'] == 'constant' else CONFIG['solver']['boundary_tolerance']
    result = solve(u0, model, T, observers=observers, boundary_tolerance=tolerance)
    logger.success(f"[simulate] {result.steps} steps, final max {float(result.field.values.max())!r}")

    artifacts = [write_csv(run_dir / config['files']['observations'],
                           ['time', 'label', 'min', 'max', 'mass', 'boundary_activity'],
                           observation_rows(result), meta)]
    for t in snapshots:
        if t > T:
            logger.warning(f"[simulate] Snapshot time {t!r} lies past T={T!r}; skipped")
            continue
        stem = f"{config['files']['snapshot_prefix']}_t{t!r}".replace('.', 'p')
        artifacts.extend(write_snapshot(result.at(t), run_dir, stem, meta))

    tol = CONFIG['solver']['range_tolerance']
    checks = {'range': all(obs.field.values.min() >= -tol and obs.field.values.max() <= 1.0 + tol for obs in result.observations)}
    summary: Dict[str, Any] = {'steps': result.steps, 'cells': int(np.prod(grid.extents)),
                               'final_max': float(result.field.values.max()),
                               'final_mass': float(result.field.values.sum() * grid.cell_volume)}
    if exp['supersolution_check'] and isinstance(model, LocalModel) and exp['initial'] != 'constant':
        report = supersolution_report(result, model, r0 + h)
        artifacts.append(write_json(run_dir / config['files']['supersolution'], report, meta))
        checks['supersolution'] = report['passed']
        summary['supersolution_worst_excess'] = max(report['excess'].values())
    return {'summary': summary, 'checks': checks, 'artifacts': artifacts}
