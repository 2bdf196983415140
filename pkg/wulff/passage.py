"""
First-passage times and the diagnostics built on them.

tau(y, z) is the first integer time from which the solution started at
(1/2) chi_{B_1(y)} stays >= 1/2 on B_1(z). "Stays" is checked over a finite
persistence window of W periods.
"""
import concurrent.futures
import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from common.config import CONFIG
from common.errors import DomainTooSmallError
from common.logger import Logger
from solver.grid import Field, Grid
from solver.solver import as_model, solve

Point = Tuple[float, ...]


def _point(x) -> Point:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))


def default_h(d: int) -> float:
    return CONFIG['grid']['h'][d]


def first_passage(m, y, z, horizon: Optional[int] = None, window: Optional[int] = None, h: Optional[float] = None,
                  reaction=None, margin: Optional[float] = None, max_retries: Optional[int] = None) -> Optional[int]:
    """
    Smallest integer t <= horizon - window with u(s) >= 1/2 on the cells centered in
    B_1(z) for every integer s in [t, t + window].

    The grid is centered at y with radius |y - z| + 1 + margin. When the solution
    becomes active on its boundary the radius grows and the solve restarts.

    Args:
        m: Medium (or a prepared model)
        y: Source point
        z: Target point
        horizon: Last time solved to (CONFIG default)
        window: Persistence window W in periods (CONFIG default)
        h: Cell width (CONFIG default for the dimension)
        reaction: Reaction override, e.g. the surrogate
        margin: Extra domain radius (CONFIG default)
        max_retries: Domain growths before giving up

    Returns:
        The passage time, or None when unresolved within the horizon

    Raises:
        DomainTooSmallError: the domain overflowed after every growth
    """
    model = as_model(m, reaction)
    cfg = CONFIG['passage']
    horizon = int(cfg['horizon'] if horizon is None else horizon)
    window = int(cfg['window'] if window is None else window)
    margin = cfg['margin'] if margin is None else margin
    retries = cfg['max_retries'] if max_retries is None else max_retries
    h = default_h(model.d) if h is None else h
    source = np.asarray(_point(y))
    target = np.asarray(_point(z))
    if window < 0 or horizon < window:
        return None

    radius = float(np.linalg.norm(source - target)) + 1.0 + margin
    for attempt in range(retries + 1):
        grid = Grid.centered(model.d, h, radius, center=source)
        near = np.linalg.norm(grid.points() - target, axis=-1) < 1.0
        streak = {'start': None, 'length': 0}

        def held_long_enough(u: Field) -> bool:
            ok = bool(np.all(u.values[near] >= 0.5)) if near.any() else False
            if ok:
                if streak['length'] == 0:
                    streak['start'] = int(round(u.time))
                streak['length'] += 1
            else:
                streak['length'] = 0
            return streak['length'] >= window + 1

        u0 = Field.ball(grid, source, 1.0, 0.5)
        try:
            result = solve(u0, model, float(horizon), stop_when=held_long_enough,
                           boundary_tolerance=CONFIG['solver']['boundary_tolerance'])
        except DomainTooSmallError:
            if attempt == retries:
                raise DomainTooSmallError(f"passage {_point(y)} -> {_point(z)} overflowed a domain of radius {radius!r}")
            radius *= cfg['growth']
            continue
        if result.stopped_at is not None:
            return streak['start']
        return None
    return None


@dataclass
class PassageTimeTable:
    """Passage times keyed by (source, target); None marks unresolved entries."""
    seed: int
    horizon: int
    window: int
    entries: Dict[Tuple[Point, Point], Optional[int]] = field(default_factory=dict)
    failures: Dict[Tuple[Point, Point], str] = field(default_factory=dict)

    def get(self, y, z) -> Optional[int]:
        return self.entries.get((_point(y), _point(z)))

    def resolved(self) -> Dict[Tuple[Point, Point], int]:
        return {key: value for key, value in self.entries.items() if value is not None}

    def to_rows(self) -> List[List[Any]]:
        rows = []
        for (y, z), tau in sorted(self.entries.items()):
            rows.append([*y, *z, float(np.linalg.norm(np.subtract(y, z))), '' if tau is None else tau])
        return rows

    def header(self, d: int) -> List[str]:
        return [f"y{i}" for i in range(d)] + [f"z{i}" for i in range(d)] + ['distance', 'tau']


def build_passage_table(m, pairs: Sequence[Tuple[Sequence[float], Sequence[float]]], horizon: Optional[int] = None,
                        window: Optional[int] = None, h: Optional[float] = None, reaction=None,
                        max_workers: Optional[int] = None, logger: Optional[Logger] = None) -> PassageTimeTable:
    """
    Solve every (y, z) pair in parallel and assemble the table in input order.

    A pair whose solve raises is logged, recorded under `failures` and left unresolved.
    """
    cfg = CONFIG['passage']
    horizon = int(cfg['horizon'] if horizon is None else horizon)
    window = int(cfg['window'] if window is None else window)
    workers = max_workers or cfg['max_workers']
    keys = list(dict.fromkeys((_point(y), _point(z)) for y, z in pairs))
    seed = getattr(getattr(m, 'medium', m), 'seed', 0)
    table = PassageTimeTable(seed=seed, horizon=horizon, window=window)
    results: Dict[Tuple[Point, Point], Optional[int]] = {}

    if logger:
        logger.info(f"[passage] Solving {len(keys)} passage times with {workers} workers (H={horizon}, W={window})")
    with tqdm(total=len(keys), desc="Passage times", unit="pair", leave=False) as pbar:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_key = {executor.submit(first_passage, m, y, z, horizon, window, h, reaction): (y, z) for y, z in keys}
            for future in concurrent.futures.as_completed(future_to_key):
                key = future_to_key[future]
                try:
                    results[key] = future.result()
                except Exception as e:
                    results[key] = None
                    table.failures[key] = f"{type(e).__name__}: {e}"
                    if logger:
                        logger.debug(f"[passage] {key[0]} -> {key[1]} failed: {e}")
                pbar.update(1)
    for key in keys:
        table.entries[key] = results[key]

    if logger:
        unresolved = sum(1 for v in table.entries.values() if v is None)
        logger.success(f"[passage] {len(keys) - unresolved}/{len(keys)} passage times resolved")
    return table


def pairs_for_triples(triples: Sequence[Tuple[Any, Any, Any]]) -> List[Tuple[Point, Point]]:
    """The three legs (y, x), (x, z), (y, z) of every triple, deduplicated in order."""
    legs = []
    for y, x, z in triples:
        legs.extend([(_point(y), _point(x)), (_point(x), _point(z)), (_point(y), _point(z))])
    return list(dict.fromkeys(legs))


def random_lattice_points(d: int, count: int, extent: int, seed: int) -> List[Point]:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return [tuple(float(v) for v in rng.integers(-extent, extent + 1, size=d)) for _ in range(count)]


def random_triples(d: int, count: int, extent: int, seed: int) -> List[Tuple[Point, Point, Point]]:
    points = random_lattice_points(d, 3 * count, extent, seed)
    return [tuple(points[3 * i:3 * i + 3]) for i in range(count)]


@dataclass
class SubadditivityReport:
    slack: float
    checked: int = 0
    skipped: int = 0
    violations: List[Dict[str, Any]] = field(default_factory=list)
    worst_excess: float = -math.inf

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {'slack': self.slack, 'checked': self.checked, 'skipped': self.skipped,
                'violations': self.violations, 'worst_excess': self.worst_excess, 'passed': self.passed}


def subadditivity_check(table: PassageTimeTable, triples: Sequence[Tuple[Any, Any, Any]]) -> SubadditivityReport:
    """
    tau(y, z) <= tau(y, x) + tau(x, z) + W + 1 for every triple with all legs resolved.

    The excess reported is tau(y, z) - tau(y, x) - tau(x, z).
    """
    report = SubadditivityReport(slack=float(table.window + 1))
    for y, x, z in triples:
        legs = (table.get(y, x), table.get(x, z), table.get(y, z))
        if any(v is None for v in legs):
            report.skipped += 1
            continue
        t_yx, t_xz, t_yz = legs
        excess = float(t_yz - t_yx - t_xz)
        report.checked += 1
        report.worst_excess = max(report.worst_excess, excess)
        if excess > report.slack:
            report.violations.append({'y': _point(y), 'x': _point(x), 'z': _point(z), 'excess': excess})
    return report


@dataclass
class RegularityReport:
    C: float
    slack: float
    pairs_checked: int = 0
    violations: List[Dict[str, Any]] = field(default_factory=list)
    worst_excess: float = -math.inf

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, Any]:
        return {'C': self.C, 'slack': self.slack, 'pairs_checked': self.pairs_checked,
                'violations': self.violations, 'worst_excess': self.worst_excess, 'passed': self.passed}


def fit_linear_constant(table: PassageTimeTable) -> float:
    """Smallest C with tau(y, z) <= C (|y - z| + 1) over the resolved entries."""
    resolved = table.resolved()
    if not resolved:
        return math.nan
    return max(tau / (float(np.linalg.norm(np.subtract(y, z))) + 1.0) for (y, z), tau in resolved.items())


def regularity_check(table: PassageTimeTable) -> RegularityReport:
    """
    Fit C from tau <= C (|y - z| + 1), then check
    |tau(y, z) - tau(y', z')| <= 3 C (|y - y'| + |z - z'| + 2) + W + 1 over all entry pairs.
    """
    C = fit_linear_constant(table)
    report = RegularityReport(C=C, slack=float(table.window + 1))
    items = sorted(table.resolved().items())
    for ((y, z), tau), ((y2, z2), tau2) in itertools.combinations(items, 2):
        bound = 3.0 * C * (float(np.linalg.norm(np.subtract(y, y2))) + float(np.linalg.norm(np.subtract(z, z2))) + 2.0)
        excess = abs(tau - tau2) - bound
        report.pairs_checked += 1
        report.worst_excess = max(report.worst_excess, excess)
        if excess > report.slack:
            report.violations.append({'first': [y, z], 'second': [y2, z2], 'excess': excess})
    return report


def recheck_persistence(m, table: PassageTimeTable, fraction: Optional[float] = None, seed: int = 0,
                        h: Optional[float] = None, reaction=None, max_workers: Optional[int] = None,
                        logger: Optional[Logger] = None) -> Dict[str, Any]:
    """Recompute a random subsample of resolved entries with window 2W and list the disagreements."""
    fraction = CONFIG['passage']['recheck_fraction'] if fraction is None else fraction
    resolved = sorted(table.resolved())
    count = min(len(resolved), max(1, int(math.ceil(fraction * len(resolved))))) if resolved else 0
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    picks = [resolved[i] for i in sorted(rng.choice(len(resolved), size=count, replace=False))] if count else []
    if not picks:
        return {'checked': 0, 'window': 2 * table.window, 'disagreements': []}
    wide = build_passage_table(m, picks, table.horizon, 2 * table.window, h, reaction, max_workers, logger)
    disagreements = [{'y': y, 'z': z, 'tau': table.entries[(y, z)], 'tau_2w': wide.entries[(y, z)]}
                     for y, z in picks if wide.entries[(y, z)] != table.entries[(y, z)]]
    return {'checked': len(picks), 'window': 2 * table.window, 'disagreements': disagreements}
