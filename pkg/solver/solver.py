import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from common.config import CONFIG
from common.errors import DomainTooSmallError
from medium.medium import KernelSpec, MediumRealization, ReactionSpec, shift_medium
from solver.grid import Field, Grid
from solver.stepper import LocalOperator, NonlocalOperator, NonlocalStencil


@dataclass(frozen=True, eq=False)
class LocalModel:
    """Local diffusion-advection-reaction with medium coefficients; `reaction` defaults to the medium's."""
    medium: MediumRealization
    reaction: Optional[ReactionSpec] = None
    reaction_scale: float = 1.0

    def operator(self, grid: Grid) -> LocalOperator:
        return LocalOperator(grid, self.medium, self.reaction, self.reaction_scale)

    def supersolution_speed(self) -> float:
        return self.medium.supersolution_speed()

    @property
    def d(self) -> int:
        return self.medium.d

    def shifted(self, y) -> 'LocalModel':
        """The same model seen from y."""
        reaction = None
        if self.reaction is not None:
            base = self.reaction.shift or (0.0,) * self.d
            offset = np.broadcast_to(np.asarray(y, dtype=float), (self.d,))
            reaction = replace(self.reaction, shift=tuple(float(s + v) for s, v in zip(base, offset)))
        return LocalModel(shift_medium(self.medium, y), reaction, self.reaction_scale)


@dataclass(frozen=True, eq=False)
class NonlocalModel:
    kernel: KernelSpec
    reaction: ReactionSpec
    tail_tolerance: Optional[float] = None

    def operator(self, grid: Grid) -> NonlocalOperator:
        return NonlocalOperator(grid, self.kernel, self.reaction, self.tail_tolerance)

    @property
    def d(self) -> int:
        return self.kernel.d

    def shifted(self, y) -> 'NonlocalModel':
        offset = np.broadcast_to(np.asarray(y, dtype=float), (self.d,))
        kernel = replace(self.kernel, shift=tuple(float(s + v) for s, v in zip(self.kernel.shift or (0.0,) * self.d, offset)))
        reaction = replace(self.reaction, shift=tuple(float(s + v) for s, v in zip(self.reaction.shift or (0.0,) * self.d, offset)))
        return NonlocalModel(kernel, reaction, self.tail_tolerance)


Model = Union[LocalModel, NonlocalModel]
Observer = Union[float, Tuple[float, str]]


@dataclass(frozen=True)
class Observation:
    time: float
    label: str
    field: Field


@dataclass
class SolveResult:
    field: Field
    observations: List[Observation] = field(default_factory=list)
    stopped_at: Optional[float] = None
    steps: int = 0

    def at(self, label_or_time) -> Field:
        for obs in self.observations:
            if obs.label == label_or_time or obs.time == label_or_time:
                return obs.field
        raise KeyError(label_or_time)

    def trajectory(self) -> List[Field]:
        return [obs.field for obs in self.observations]


def _normalize_observers(observers: Iterable[Observer]) -> List[Tuple[float, str]]:
    out = []
    for item in observers:
        if isinstance(item, tuple):
            out.append((float(item[0]), str(item[1])))
        else:
            out.append((float(item), repr(float(item))))
    return out


def solve(u0: Field, model: Model, T: float, observers: Sequence[Observer] = (),
          stop_when: Optional[Callable[[Field], bool]] = None, boundary_tolerance: Optional[float] = None,
          cfl_safety: Optional[float] = None, dt_max: Optional[float] = None) -> SolveResult:
    """
    Step u0 from u0.time to T.

    Time steps are split so the run lands exactly on every integer time (the
    temporal period) and every observer time: each segment between consecutive
    breakpoints is cut into ceil(length / dt_max) equal steps.

    Args:
        u0: Initial field; its time stamp is the start time
        model: LocalModel or NonlocalModel
        T: Final time
        observers: Times, or (time, label) pairs, at which read-only snapshots are kept
        stop_when: Called at integer times (including the start, if integral); returning True stops the run
        boundary_tolerance: Raise DomainTooSmallError when boundary activity exceeds this at a breakpoint
        cfl_safety: Fraction of the CFL bound used (CONFIG default)
        dt_max: Explicit step bound; overrides the CFL-derived one

    Returns:
        SolveResult with the final field and the observations in time order
    """
    t0 = float(u0.time)
    if T < t0:
        raise ValueError(f"final time {T} precedes start time {t0}")
    op = model.operator(u0.grid)
    safety = CONFIG['solver']['cfl_safety'] if cfl_safety is None else cfl_safety
    step_bound = dt_max if dt_max is not None else op.dt_max() * safety

    wanted = sorted(o for o in _normalize_observers(observers) if t0 <= o[0] <= T)
    result = SolveResult(field=u0)
    for time, label in wanted:
        if time == t0:
            result.observations.append(Observation(time, label, u0.frozen()))
    if stop_when is not None and float(t0).is_integer() and stop_when(u0):
        result.stopped_at = t0
        return result

    breakpoints = {float(k) for k in range(int(math.floor(t0)) + 1, int(math.floor(T)) + 1)}
    breakpoints.update(time for time, _ in wanted if time > t0)
    breakpoints.add(float(T))
    breakpoints = sorted(b for b in breakpoints if b > t0)

    u = u0
    start = t0
    for stop in breakpoints:
        n = max(1, int(math.ceil((stop - start) / step_bound)))
        dt = (stop - start) / n
        for k in range(n):
            u = op.step(u, dt)
            if k == n - 1:
                u = u.with_values(u.values, stop)
            result.steps += 1
        start = stop
        for time, label in wanted:
            if time == stop:
                result.observations.append(Observation(time, label, u.frozen()))
        if boundary_tolerance is not None and u.boundary_activity() > boundary_tolerance:
            result.field = u
            raise DomainTooSmallError(f"boundary activity {u.boundary_activity()!r} > {boundary_tolerance!r} at t={stop!r}")
        if stop_when is not None and stop.is_integer() and stop_when(u):
            result.stopped_at = stop
            break
    result.field = u
    return result


def truncation_margin(threshold: Optional[float] = None) -> float:
    """Margin m with e^{-m} = threshold."""
    threshold = CONFIG['solver']['truncation_threshold'] if threshold is None else threshold
    return math.log(1.0 / threshold)


def truncation_radius(r0: float, T: float, m: MediumRealization, threshold: Optional[float] = None) -> float:
    """
    R = r0 + a T + margin, a = gamma (1 + d + d^2).

    The moving exponential e^{a t - (dist - R)} bounds u from above, so at the
    boundary of B_R it stays below `threshold` up to time T.
    """
    return r0 + m.supersolution_speed() * T + truncation_margin(threshold)


def supersolution_excess(trajectory: Sequence[Field], e: Sequence[float], x0: Sequence[float], a: float) -> float:
    """max over snapshots of u(t, x) - e^{a t - (x - x0) . e}."""
    direction = np.asarray(e, dtype=float)
    direction = direction / np.linalg.norm(direction)
    worst = -np.inf
    for snap in trajectory:
        s = np.tensordot(snap.grid.points() - np.asarray(x0, dtype=float), direction, axes=1)
        exponent = np.minimum(a * snap.time - s, 700.0)
        worst = max(worst, float(np.max(snap.values - np.exp(exponent))))
    return worst


def supersolution_check(trajectory: Sequence[Field], e: Sequence[float], x0: Sequence[float], a: float,
                        tolerance: float = 1e-12) -> bool:
    """True iff u(t, x) <= e^{a t - (x - x0) . e} (+ tolerance) at every snapshot."""
    if not trajectory:
        return True
    return supersolution_excess(trajectory, e, x0, a) <= tolerance


def richardson_in_h(hs: Sequence[float], values: Sequence[float]) -> float:
    """First-order extrapolation to h = 0 from the two finest rungs."""
    if len(hs) != len(values) or len(hs) < 2:
        raise ValueError("need at least two (h, value) rungs")
    order = np.argsort(hs)
    h2, h1 = float(hs[order[0]]), float(hs[order[1]])
    v2, v1 = float(values[order[0]]), float(values[order[1]])
    return (h1 * v2 - h2 * v1) / (h1 - h2)


def as_model(target, reaction: Optional[ReactionSpec] = None) -> Model:
    """Wrap a bare medium into a LocalModel; models pass through."""
    if isinstance(target, (LocalModel, NonlocalModel)):
        return target
    if isinstance(target, MediumRealization):
        return LocalModel(target, reaction)
    raise TypeError(f"expected a medium or a model, got {type(target).__name__}")


def spreading_bound(model: Model, h: float = 0.1) -> float:
    """
    Upper estimate of the spreading speed, used to size truncated domains.

    Local: 2 sqrt(sup A sup fu0) + sup |b|. Nonlocal: the linearized speed
    min over lambda in (0, alpha) of (sup c sum_nu w_nu (cosh(lambda nu_1) - 1) + sup fu0) / lambda.
    """
    if isinstance(model, LocalModel):
        m = model.medium
        rate = (model.reaction or m.reaction).rate.upper * model.reaction_scale
        return 2.0 * math.sqrt(m.sup_diffusion() * rate) + math.sqrt(m.sup_drift_sq())
    k = model.kernel
    stencil = NonlocalStencil.build(Grid.centered(k.d, h, 0.0), k, model.tail_tolerance)
    reach = (stencil.weights.shape[0] - 1) // 2
    nu = (np.arange(stencil.weights.shape[0]) - reach) * h
    nu = nu.reshape((-1,) + (1,) * (k.d - 1))
    best = math.inf
    for lam in np.linspace(0.05, 0.95, 19) * k.alpha:
        growth = k.sup_intensity() * float(np.sum(stencil.weights * (np.cosh(lam * nu) - 1.0)))
        best = min(best, (growth + model.reaction.rate.upper) / lam)
    return best
