"""
Epsilon sweeps of the ballistic rescaling.

Each branch solves the unscaled equation from theta on the eroded, shifted
region (theta/2 on the collar out to the dilated one), then reads its snapshots
through x -> eps x - y_eps against the slice G + t S.
"""
import concurrent.futures
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from common.config import CONFIG
from common.errors import ShapeError
from common.logger import Logger
from common.utils import provenance, write_csv, write_json
from geometry.mixed_zone import mixed_zone_cells
from geometry.regions import RegionSpec, collar_measure, dilate, erode
from geometry.shapes import ConvexShape, direction_grid
from solver.grid import Field, Grid
from solver.solver import as_model, solve
from wulff.passage import default_h
from wulff.speed import front_position


@dataclass
class SweepRecord:
    eps: List[float]
    rho: List[float]
    shifts: List[List[float]]
    theta: float
    band: float
    thresholds: Tuple[float, float]
    obs_times: List[float]
    region: Dict[str, Any]
    shape: Dict[str, Any]
    measures: List[List[float]] = field(default_factory=list)
    collars: List[float] = field(default_factory=list)
    interfaces: List[List[Optional[float]]] = field(default_factory=list)

    def trend(self, time_index: int = -1) -> List[float]:
        return [row[time_index] for row in self.measures]

    def decreasing(self, time_index: int = -1, noise_floor: Optional[float] = None, strict: bool = False) -> bool:
        """Measures along eps never grow (by more than the relative noise floor unless strict)."""
        floor = CONFIG['experiments']['noise_floor'] if noise_floor is None else noise_floor
        values = self.trend(time_index)
        if strict:
            return all(b < a for a, b in zip(values, values[1:]))
        return all(b <= a * (1.0 + floor) for a, b in zip(values, values[1:]))

    def to_rows(self) -> List[List[Any]]:
        rows = []
        for i, eps in enumerate(self.eps):
            for j, t in enumerate(self.obs_times):
                interface = self.interfaces[i][j] if self.interfaces else None
                rows.append([eps, t, self.rho[i], self.measures[i][j], self.collars[i],
                             '' if interface is None else interface])
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {'eps': self.eps, 'rho': self.rho, 'shifts': self.shifts, 'theta': self.theta, 'band': self.band,
                'thresholds': list(self.thresholds), 'obs_times': self.obs_times, 'region': self.region,
                'shape': self.shape, 'measures': self.measures, 'collars': self.collars,
                'interfaces': self.interfaces}


def localize(G: RegionSpec, window: float, a: float) -> RegionSpec:
    """Unbounded G is replaced by G within B_{(2 + 1/a) M}, M the observation radius."""
    if G.bounded:
        return G
    return G.clipped((2.0 + 1.0 / a) * window)


def initial_datum(grid: Grid, G: RegionSpec, theta: float, rho: float, eps: float, shift: Sequence[float]) -> Field:
    """theta on erode(G, rho) and theta/2 on the rest of dilate(G, rho), read at eps x - y."""
    scaled = grid.scaled(eps, shift).points()
    core = erode(G, rho).contains(scaled)
    hull = dilate(G, rho).contains(scaled)
    values = np.where(core, theta, np.where(hull, 0.5 * theta, 0.0))
    return Field(grid=grid, values=values)


def _branch(model, G: RegionSpec, S: ConvexShape, eps: float, rho: float, shift: np.ndarray, theta: float,
            obs_times: Sequence[float], band: float, thresholds: Tuple[float, float], window: Optional[float],
            h: float) -> Dict[str, Any]:
    t_max = max(obs_times)
    spread = float(S.outer.support(direction_grid(S.d, 64)).max())
    reach = max(G.bounding_radius() + t_max * spread + band + 1.0, window or 0.0)
    radius = (reach + float(np.linalg.norm(shift))) / eps + CONFIG['experiments']['sweep_margin']
    grid = Grid.centered(S.d, h, radius, center=np.asarray(shift) / eps)
    u0 = initial_datum(grid, G, theta, rho, eps, shift)
    scaled = grid.scaled(eps, shift)
    collar = collar_measure(G, rho, scaled.points(), scaled.cell_volume)

    observers = [(t / eps, f"t={t!r}") for t in obs_times]
    result = solve(u0, model, t_max / eps, observers=observers, boundary_tolerance=CONFIG['solver']['boundary_tolerance'])
    measures, interfaces = [], []
    for (t_unscaled, label), t in zip(observers, obs_times):
        snap = result.at(label)
        view = Field(grid=scaled, values=snap.values, time=t)
        measures.append(mixed_zone_cells(view, G, S, t, band, thresholds, window).measure)
        if G.kind == 'halfspace':
            interfaces.append(front_position(view, G.normal))
    return {'measures': measures, 'collar': collar, 'interfaces': interfaces}


def homogenization_sweep(G: RegionSpec, theta: float, eps_list: Sequence[float], m, S: ConvexShape,
                         obs_times: Sequence[float], band: Optional[float] = None,
                         rho: Optional[Callable[[float], float]] = None, shifts: Optional[Sequence[Sequence[float]]] = None,
                         thresholds: Optional[Tuple[float, float]] = None, window: Optional[float] = None,
                         h: Optional[float] = None, reaction=None, max_workers: int = 1,
                         logger: Optional[Logger] = None) -> SweepRecord:
    """
    Mixed-zone measure of u^eps against G + t S per (eps, observation time).

    Args:
        G: Region; a half-space is localized to a ball around the window first
        theta: Initial level inside the eroded region
        eps_list: Strictly decreasing scales
        m: Medium or model
        S: Reference shape
        obs_times: Scaled observation times
        band: Mixed-zone band width (CONFIG default)
        rho: eps -> erosion/dilation radius (default eps ** rho_power)
        shifts: y_eps per eps (default 0)
        thresholds: (eta0, eta1)
        window: Observation radius in scaled units; required for unbounded G

    Raises:
        ShapeError: S missing or of the wrong dimension, or unbounded G without a window
        DomainTooSmallError: a branch reached the edge of its grid
    """
    if S is None or S.d != G.d:
        raise ShapeError("homogenization sweep needs a reference shape of the region's dimension")
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0.0 for e in eps_list) or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError(f"eps list must be positive and strictly decreasing, got {eps_list}")
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    model = as_model(m, reaction)
    band = CONFIG['experiments']['band'] if band is None else band
    thresholds = tuple(thresholds or CONFIG['experiments']['thresholds'])
    power = CONFIG['experiments']['rho_power']
    rho = rho or (lambda e: e ** power)
    shifts = [np.asarray(y, dtype=float) for y in shifts] if shifts is not None else [np.zeros(G.d)] * len(eps_list)
    h = default_h(G.d) if h is None else h
    obs_times = [float(t) for t in obs_times]
    if not G.bounded:
        if window is None:
            raise ShapeError("an unbounded region needs an observation window")
        a = model.supersolution_speed() if hasattr(model, 'supersolution_speed') else S.max_support()
        G = localize(G, window + max(obs_times) * S.max_support(), a)

    record = SweepRecord(eps=eps_list, rho=[rho(e) for e in eps_list], shifts=[y.tolist() for y in shifts],
                         theta=theta, band=band, thresholds=thresholds, obs_times=obs_times,
                         region=_region_dict(G), shape=S.to_dict())
    branches: Dict[int, Dict[str, Any]] = {}
    if logger:
        logger.info(f"[homogenize] eps {eps_list}, observation times {obs_times}, band {band!r}")
    with tqdm(total=len(eps_list), desc="Epsilon branches", unit="eps", leave=False) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
            future_to_index = {
                executor.submit(_branch, model, G, S, eps, record.rho[i], shifts[i], theta, obs_times, band,
                                thresholds, window, h): i
                for i, eps in enumerate(eps_list)
            }
            for future in concurrent.futures.as_completed(future_to_index):
                branches[future_to_index[future]] = future.result()
                pbar.update(1)
    for i in range(len(eps_list)):
        record.measures.append(branches[i]['measures'])
        record.collars.append(branches[i]['collar'])
        if branches[i]['interfaces']:
            record.interfaces.append(branches[i]['interfaces'])
    if logger:
        logger.success(f"[homogenize] mixed zone at t={obs_times[-1]!r}: {record.trend()}")
    return record


def _region_dict(G: RegionSpec) -> Dict[str, Any]:
    return {key: value for key, value in asdict(G).items() if value not in ((), None)}


# --- `homogenize` command ----------------------------------------------------

def run(args: Any, config: Dict, logger: Logger, workflow_data: Dict) -> Dict:
    """
    Runs the epsilon sweep of the configured region against the reference shape.
    """
    from common.run_config import build_model, build_region, build_shape

    run_config = workflow_data['run_config']
    run_dir = workflow_data['run_dir']
    exp = run_config.experiment
    meta = provenance(workflow_data['config_hash'], run_config.seed)
    model = build_model(run_config)
    region = build_region(run_config)
    shape = build_shape(run_config, model, logger)
    workers = getattr(args, 'threads', None) or 1

    shifts = None
    if exp['shift_radius']:
        rng = np.random.default_rng(np.random.SeedSequence(run_config.seed))
        shifts = []
        for _ in exp['eps']:
            y = rng.normal(size=model.d)
            shifts.append(y / np.linalg.norm(y) * exp['shift_radius'] * rng.uniform() ** (1.0 / model.d))
    power = exp['rho_power']
    record = homogenization_sweep(region, exp['theta'], exp['eps'], model, shape, exp['obs_times'], exp['band'],
                                  rho=lambda e: e ** power, shifts=shifts, thresholds=tuple(exp['thresholds']),
                                  window=exp['window'], h=run_config.grid['h'], max_workers=workers, logger=logger)
    artifacts = [
        write_json(run_dir / config['files']['sweep'], record.to_dict(), meta),
        write_csv(run_dir / config['files']['sweep_csv'], ['eps', 'time', 'rho', 'mixed_zone', 'collar', 'interface'],
                  record.to_rows(), meta),
    ]
    checks = {'mixed_zone_nonincreasing': record.decreasing()}
    if exp['strict_trend']:
        checks['mixed_zone_strictly_decreasing'] = record.decreasing(strict=True)
    if exp['final_ratio'] is not None and record.trend()[0] > 0.0:
        checks['mixed_zone_final_ratio'] = record.trend()[-1] <= exp['final_ratio'] * record.trend()[0]
    return {
        'summary': {'eps': record.eps, 'mixed_zone': record.trend(), 'collars': record.collars,
                    'interfaces': record.interfaces},
        'checks': checks,
        'artifacts': artifacts,
    }
