import concurrent.futures
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from common.config import CONFIG
from common.errors import HorizonExceededError
from common.logger import Logger
from solver.grid import Field, Grid
from solver.solver import as_model, solve
from wulff.passage import default_h


def hair_trigger_time(m, theta: float, eta: float, horizon: Optional[float] = None, h: Optional[float] = None,
                      reaction=None, probes_per_period: Optional[int] = None, radius: Optional[float] = None) -> float:
    """
    First probe time t with u >= 1 - eta on the cells of B_1(0) at t and at every
    probe of the following period, starting from theta chi_{B_1(0)}.

    The solve runs on the cube of half-width `radius` with zero exterior, a
    subsolution of the whole-space problem, so the time returned never
    undercuts the whole-space one.

    Raises:
        HorizonExceededError: no persistent crossing before the horizon
    """
    if theta >= 1.0:
        return 0.0
    if not 0.0 < theta < 1.0 or not 0.0 < eta < 1.0:
        raise ValueError(f"theta and eta must lie in (0, 1), got theta={theta}, eta={eta}")
    model = as_model(m, reaction)
    cfg = CONFIG['experiments']
    horizon = cfg['hair_trigger_horizon'] if horizon is None else horizon
    probes = int(cfg['hair_trigger_probes'] if probes_per_period is None else probes_per_period)
    radius = cfg['hair_trigger_radius'] if radius is None else radius
    h = default_h(model.d) if h is None else h

    grid = Grid.centered(model.d, h, radius)
    near = np.linalg.norm(grid.points(), axis=-1) < 1.0
    u = Field.ball(grid, np.zeros(model.d), 1.0, theta)
    hits: List[bool] = [bool(np.all(u.values[near] >= 1.0 - eta))]
    stamps: List[float] = [0.0]
    period = 0
    while True:
        for i in range(len(hits) - probes):
            if all(hits[i:i + probes + 1]):
                return stamps[i]
        if period + 1 > horizon:
            break
        observers = [period + k / probes for k in range(1, probes + 1)]
        result = solve(u, model, float(period + 1), observers=observers)
        for obs in result.observations:
            hits.append(bool(np.all(obs.field.values[near] >= 1.0 - eta)))
            stamps.append(obs.time)
        u = result.field
        period += 1
    raise HorizonExceededError(f"u stayed below {1.0 - eta!r} on B_1 up to t={horizon!r} (theta={theta!r})")


@dataclass
class HairTriggerCampaign:
    theta: float
    eta: float
    seeds: List[int] = field(default_factory=list)
    times: List[Optional[float]] = field(default_factory=list)
    failures: Dict[int, str] = field(default_factory=dict)

    @property
    def uniform_time(self) -> float:
        """The largest time over the seeds: a burn-in valid for all of them."""
        resolved = [t for t in self.times if t is not None]
        return max(resolved) if resolved else float('nan')

    @property
    def spread(self) -> float:
        resolved = [t for t in self.times if t is not None]
        return (max(resolved) - min(resolved)) if resolved else float('nan')

    def to_dict(self) -> Dict[str, Any]:
        return {'theta': self.theta, 'eta': self.eta, 'seeds': self.seeds, 'times': self.times,
                'uniform_time': self.uniform_time, 'spread': self.spread, 'failures': self.failures}


def hair_trigger_campaign(media: Sequence, theta: float, eta: float, max_workers: int = 1,
                          logger: Optional[Logger] = None, **kwargs) -> HairTriggerCampaign:
    """Hair-trigger time per medium, reduced to the uniform (worst) time."""
    seeds = [getattr(getattr(m, 'medium', m), 'seed', i) for i, m in enumerate(media)]
    campaign = HairTriggerCampaign(theta=theta, eta=eta, seeds=seeds, times=[None] * len(media))
    if logger:
        logger.info(f"[hair-trigger] theta={theta!r}, eta={eta!r} over {len(media)} media")
    with tqdm(total=len(media), desc="Hair-trigger", unit="medium", leave=False) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
            future_to_index = {executor.submit(hair_trigger_time, m, theta, eta, **kwargs): i for i, m in enumerate(media)}
            for future in concurrent.futures.as_completed(future_to_index):
                i = future_to_index[future]
                try:
                    campaign.times[i] = future.result()
                except Exception as e:
                    campaign.failures[seeds[i]] = f"{type(e).__name__}: {e}"
                    if logger:
                        logger.debug(f"[hair-trigger] seed {seeds[i]} failed: {e}")
                pbar.update(1)
    if logger:
        logger.success(f"[hair-trigger] uniform T_theta = {campaign.uniform_time!r} (spread {campaign.spread!r})")
    return campaign
