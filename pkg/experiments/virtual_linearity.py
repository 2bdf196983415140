"""
Virtual linearity: the KPP solution against the supremum of surrogate solutions
started from the unit-cube pieces of its initial datum, up to time shifts +-delta t.
"""
import concurrent.futures
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from common.config import CONFIG
from common.errors import CubeCapExceededError
from common.logger import Logger
from common.utils import provenance, write_csv, write_json
from medium.medium import kpp_surrogate
from solver.grid import Field, Grid
from solver.solver import LocalModel, NonlocalModel, as_model, solve, spreading_bound


def cube_decomposition(u0: Field, cap: Optional[int] = None) -> List[Tuple[Tuple[int, ...], Field]]:
    """
    Restrictions of u0 to the open unit cubes meeting its support.

    Each cell belongs to the cube containing its center, so the pieces have
    disjoint supports and their pointwise max is u0.

    Raises:
        CubeCapExceededError: more pieces than `cap`
    """
    cap = CONFIG['experiments']['cube_cap'] if cap is None else cap
    cubes = np.floor(u0.grid.points()).astype(np.int64)
    support = u0.values > 0.0
    labels = sorted({tuple(int(v) for v in c) for c in cubes[support]})
    if len(labels) > cap:
        raise CubeCapExceededError(f"{len(labels)} cube pieces exceed the cap of {cap}; coarsen the datum")
    pieces = []
    for n in labels:
        inside = np.all(cubes == np.asarray(n), axis=-1)
        pieces.append((n, Field(grid=u0.grid, values=np.where(inside, u0.values, 0.0), time=u0.time)))
    return pieces


@dataclass
class SandwichReport:
    times: List[float]
    delta: float
    left_margins: List[float] = field(default_factory=list)
    right_margins: List[float] = field(default_factory=list)
    pieces: int = 0

    @property
    def phi(self) -> List[float]:
        """phi(delta t) per time: how far either margin dips below zero."""
        return [max(0.0, -min(a, b)) for a, b in zip(self.left_margins, self.right_margins)]

    def tau_delta(self, tolerance: Optional[float] = None) -> Optional[float]:
        """First checked time with both margins >= -tolerance."""
        tolerance = CONFIG['experiments']['phi_tolerance'] if tolerance is None else tolerance
        for t, a, b in zip(self.times, self.left_margins, self.right_margins):
            if min(a, b) >= -tolerance:
                return t
        return None

    def phi_nonincreasing(self, slack: Optional[float] = None) -> bool:
        slack = CONFIG['experiments']['phi_tolerance'] if slack is None else slack
        phi = self.phi
        return all(b <= a + slack for a, b in zip(phi, phi[1:]))

    def to_rows(self) -> List[List[float]]:
        return [[t, a, b, p] for t, a, b, p in zip(self.times, self.left_margins, self.right_margins, self.phi)]

    def to_dict(self) -> Dict[str, Any]:
        return {'times': self.times, 'delta': self.delta, 'left_margins': self.left_margins,
                'right_margins': self.right_margins, 'phi': self.phi, 'tau_delta': self.tau_delta(),
                'pieces': self.pieces}


def _surrogate_model(model):
    if isinstance(model, LocalModel):
        return LocalModel(model.medium, kpp_surrogate(model.reaction or model.medium.reaction), model.reaction_scale)
    return NonlocalModel(model.kernel, kpp_surrogate(model.reaction), model.tail_tolerance)


def _observe(u0: Field, model, times: Sequence[float], tolerance: float) -> Dict[float, np.ndarray]:
    stop = max(times) if times else u0.time
    result = solve(u0, model, stop, observers=sorted(set(times)), boundary_tolerance=tolerance)
    return {obs.time: obs.field.values for obs in result.observations}


def virtual_linearity_check(u0: Field, m, times: Sequence[float], delta: float, reaction=None,
                            max_workers: int = 1, logger: Optional[Logger] = None,
                            cap: Optional[int] = None) -> SandwichReport:
    """
    Margins of u(t) >= sup_n u'_n(t - delta t) and u(t) <= sup_n u'_n(t + delta t).

    u solves with the reaction f, each u'_n with the surrogate f' from the cube
    piece n of u0. Both margins are minima over the grid.

    Raises:
        CubeCapExceededError: too many cube pieces
        DomainTooSmallError: some solve reached the edge of u0's grid
    """
    if not 0.0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 1/2], got {delta}")
    times = sorted(float(t) for t in times)
    model = as_model(m, reaction)
    surrogate = _surrogate_model(model)
    pieces = cube_decomposition(u0, cap)
    tolerance = CONFIG['solver']['boundary_tolerance']
    report = SandwichReport(times=times, delta=delta, pieces=len(pieces))
    early = [t * (1.0 - delta) for t in times]
    late = [t * (1.0 + delta) for t in times]

    if logger:
        logger.info(f"[vlin] {len(pieces)} cube pieces, times {times}, delta={delta!r}")
    u = _observe(u0, model, times, tolerance)
    sup_early = {t: np.zeros(u0.grid.shape) for t in early}
    sup_late = {t: np.zeros(u0.grid.shape) for t in late}
    with tqdm(total=len(pieces), desc="Cube pieces", unit="piece", leave=False) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
            futures = [executor.submit(_observe, piece, surrogate, early + late, tolerance) for _, piece in pieces]
            for future in concurrent.futures.as_completed(futures):
                observed = future.result()
                for t in early:
                    np.maximum(sup_early[t], observed[t], out=sup_early[t])
                for t in late:
                    np.maximum(sup_late[t], observed[t], out=sup_late[t])
                pbar.update(1)

    for t, te, tl in zip(times, early, late):
        report.left_margins.append(float(np.min(u[t] - sup_early[te])))
        report.right_margins.append(float(np.min(sup_late[tl] - u[t])))
    if logger:
        logger.success(f"[vlin] phi(delta t) = {report.phi}, tau_delta = {report.tau_delta()}")
    return report


def sizing_radius(u0_radius: float, model, t_max: float, h: float) -> float:
    """Cube half-width holding the spread of a datum of radius u0_radius up to t_max."""
    return u0_radius + spreading_bound(model, h) * t_max + CONFIG['grid']['margin']


# --- `vlin` command ----------------------------------------------------------

def run(args: Any, config: Dict, logger: Logger, workflow_data: Dict) -> Dict:
    """
    Checks the virtual-linearity sandwich for the configured datum theta chi_G.
    """
    from common.run_config import build_model, build_region

    run_config = workflow_data['run_config']
    run_dir = workflow_data['run_dir']
    exp = run_config.experiment
    meta = provenance(workflow_data['config_hash'], run_config.seed)
    model = build_model(run_config)
    region = build_region(run_config)
    h = run_config.grid['h']
    delta = exp['delta']
    t_max = max(exp['times']) * (1.0 + delta)
    radius = run_config.grid['radius'] or sizing_radius(region.bounding_radius(), model, t_max, h)
    grid = Grid.centered(model.d, h, radius)
    u0 = Field.indicator(grid, region.contains(grid.points()), exp['theta'])

    report = virtual_linearity_check(u0, model, exp['times'], delta, max_workers=getattr(args, 'threads', None) or 1,
                                     logger=logger)
    artifacts = [
        write_json(run_dir / config['files']['sandwich'], report.to_dict(), meta),
        write_csv(run_dir / config['files']['sandwich_csv'], ['time', 'left_margin', 'right_margin', 'phi'],
                  report.to_rows(), meta),
    ]
    checks = {'phi_nonincreasing': report.phi_nonincreasing(), 'tau_delta_found': report.tau_delta() is not None}
    return {
        'summary': {'pieces': report.pieces, 'phi': report.phi, 'tau_delta': report.tau_delta(), 'delta': delta},
        'checks': checks,
        'artifacts': artifacts,
    }
