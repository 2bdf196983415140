"""
Random time-periodic media for KPP reaction-advection-diffusion equations.

A medium is a frozen bundle of spatial coefficient fields (diffusion matrix,
drift, reaction rate at u = 0) multiplied by a smooth 1-periodic modulation in
time, plus the shift y realizing the translation group. Every field is a pure
function of position, so a realization can be evaluated concurrently and
re-evaluated bit-identically from its seed.
"""
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, Optional, Tuple

import numpy as np


# --- reaction profiles -------------------------------------------------------

def _fisher(u):
    return u * (1.0 - u)


def _fisher_sq(u):
    return u * (1.0 - u) ** 2


def _surrogate(u):
    return np.minimum(u, 1.0 - u)


def _degenerate(u):
    return u * u * (1.0 - u)


@dataclass(frozen=True)
class Profile:
    name: str
    g: Callable[[np.ndarray], np.ndarray]
    lipschitz: float  # sup |g'| on [0, 1]


PROFILES: Dict[str, Profile] = {
    'fisher': Profile('fisher', _fisher, 1.0),
    'fisher_sq': Profile('fisher_sq', _fisher_sq, 1.0),
    'surrogate': Profile('surrogate', _surrogate, 1.0),
    'degenerate': Profile('degenerate', _degenerate, 1.0),
}


# --- spatial fields ----------------------------------------------------------

def _as_points(x, d: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if d == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != d:
        raise ValueError(f"expected positions with trailing dimension {d}, got shape {pts.shape}")
    return pts


class ScalarField:
    """A stationary scalar coefficient x -> c(x) with known range [lower, upper]."""
    lower: float
    upper: float

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantField(ScalarField):
    value: float

    @property
    def lower(self) -> float:
        return float(self.value)

    @property
    def upper(self) -> float:
        return float(self.value)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x)[:-1], float(self.value))


def _psi(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s)
    pos = s > 0.0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity transition from 0 (s <= 0) to 1 (s >= 1)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    a = _psi(s)
    b = _psi(1.0 - s)
    return a / (a + b)


def cell_weight(q: np.ndarray, radius: float) -> np.ndarray:
    """Mollified indicator of [0, 1) at offset q; weights of neighbouring cells sum to 1."""
    if radius <= 0.0:
        return ((q >= 0.0) & (q < 1.0)).astype(float)
    width = 2.0 * radius
    return smooth_step((q + radius) / width) - smooth_step((q - 1.0 + radius) / width)


@dataclass(frozen=True, eq=False)
class CheckerboardField(ScalarField):
    """
    Unit-cell values from a periodic table, smoothed across cell faces.

    Cell n holds table[n mod table_size]; the global offset is the random shift
    that makes the lattice field stationary. Mollified values are convex
    combinations of neighbouring cells, so the table range is the field range.
    """
    table: np.ndarray
    offset: Tuple[float, ...]
    radius: float = 0.1

    @property
    def d(self) -> int:
        return self.table.ndim

    @property
    def lower(self) -> float:
        return float(self.table.min())

    @property
    def upper(self) -> float:
        return float(self.table.max())

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=float) + np.asarray(self.offset, dtype=float)
        base = np.floor(pts)
        frac = pts - base
        base = base.astype(np.int64)
        size = np.array(self.table.shape, dtype=np.int64)
        reach = (-1, 0, 1) if self.radius > 0.0 else (0,)
        out = np.zeros(pts.shape[:-1])
        for shifts in np.ndindex(*(len(reach),) * self.d):
            weight = np.ones(pts.shape[:-1])
            index = []
            for axis, pick in enumerate(shifts):
                k = reach[pick]
                weight = weight * cell_weight(frac[..., axis] - k, self.radius)
                index.append(np.mod(base[..., axis] + k, size[axis]))
            out = out + weight * self.table[tuple(index)]
        return out


@dataclass(frozen=True, eq=False)
class FourierField(ScalarField):
    """mean + amplitude * (1/K) * sum_j cos(2 pi k_j . x + phi_j)."""
    mean: float
    amplitude: float
    wavevectors: np.ndarray  # (K, d)
    phases: np.ndarray       # (K,)

    @property
    def lower(self) -> float:
        return float(self.mean - abs(self.amplitude))

    @property
    def upper(self) -> float:
        return float(self.mean + abs(self.amplitude))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        arg = 2.0 * math.pi * np.tensordot(pts, self.wavevectors.T, axes=1) + self.phases
        return self.mean + self.amplitude * np.cos(arg).mean(axis=-1)


@dataclass(frozen=True, eq=False)
class ScaledField(ScalarField):
    """factor * base(x); used for cross-diffusion tied to the diagonal margin."""
    base: ScalarField
    factor: float

    @property
    def lower(self) -> float:
        return min(self.factor * self.base.lower, self.factor * self.base.upper)

    @property
    def upper(self) -> float:
        return max(self.factor * self.base.lower, self.factor * self.base.upper)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.factor * self.base(x)


# --- time dependence ---------------------------------------------------------

@dataclass(frozen=True)
class TimeModulation:
    """mu(t) = floor + (1 - floor) sin^2(pi t): 1-periodic, valued in [floor, 1]."""
    floor: float = 1.0

    def __call__(self, t):
        if self.floor >= 1.0:
            return 1.0 if np.ndim(t) == 0 else np.ones(np.shape(t))
        s = np.sin(math.pi * np.asarray(t, dtype=float))
        value = self.floor + (1.0 - self.floor) * s * s
        return float(value) if np.ndim(value) == 0 else value

    def samples(self, count: int) -> np.ndarray:
        return np.array([self(k / count) for k in range(count)])


# --- reactions ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReactionSpec:
    """
    Separable KPP reaction f(t, x, u) = fu0(t, x) * g(u).

    fu0 is the spatial rate field times the time modulation, evaluated at the
    shifted position. `profile` overrides the named profile for ad-hoc shapes.
    """
    rate: ScalarField
    profile_name: str = 'fisher'
    d: int = 1
    modulation: TimeModulation = TimeModulation()
    shift: Tuple[float, ...] = ()
    profile: Optional[Callable[[np.ndarray], np.ndarray]] = None
    profile_lipschitz: Optional[float] = None

    def g(self, u) -> np.ndarray:
        if self.profile is not None:
            return np.asarray(self.profile(np.asarray(u, dtype=float)), dtype=float)
        return PROFILES[self.profile_name].g(np.asarray(u, dtype=float))

    def fu0(self, t, x) -> np.ndarray:
        pts = _as_points(x, self.d)
        if self.shift:
            pts = pts + np.asarray(self.shift, dtype=float)
        return self.modulation(t) * self.rate(pts)

    def __call__(self, t, x, u) -> np.ndarray:
        return self.fu0(t, x) * self.g(u)

    @property
    def g_lipschitz(self) -> float:
        if self.profile_lipschitz is not None:
            return float(self.profile_lipschitz)
        if self.profile is not None:
            return 1.0
        return PROFILES[self.profile_name].lipschitz

    @property
    def lipschitz_const(self) -> float:
        """Lipschitz bound of f in u: sup fu0 * sup |g'|."""
        return self.rate.upper * self.g_lipschitz


@dataclass(frozen=True)
class KPPSurrogate:
    """f'(t, x, u) = fu0(t, x) * min{u, 1 - u}, built from a reaction's linearization."""
    base: ReactionSpec

    def __call__(self, t, x, u) -> np.ndarray:
        return self.base.fu0(t, x) * _surrogate(np.asarray(u, dtype=float))

    def as_reaction(self) -> ReactionSpec:
        return replace(self.base, profile_name='surrogate', profile=None, profile_lipschitz=None)


def kpp_surrogate(reaction: ReactionSpec) -> ReactionSpec:
    return KPPSurrogate(reaction).as_reaction()


# --- media -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MediumRealization:
    """
    One sample omega of (A, b, fu0) in dimension 1 or 2.

    A(t, x) = lam I + mu(t) (A_x(x + y) - lam I), b(t, x) = mu(t) b_x(x + y),
    fu0(t, x) = mu(t) r(x + y), with y the stored shift. The cross field holds the
    spatial off-diagonal entry and is kept within the diagonal margin above lam.
    """
    d: int
    ellipticity: float
    diffusion: Tuple[ScalarField, ...]
    drift: Tuple[ScalarField, ...]
    rate: ScalarField
    cross: Optional[ScalarField] = None
    profile: str = 'fisher'
    modulation: TimeModulation = TimeModulation()
    seed: int = 0
    shift: Tuple[float, ...] = ()
    generator: str = 'homogeneous'

    def __post_init__(self):
        if not self.shift:
            object.__setattr__(self, 'shift', (0.0,) * self.d)

    def positions(self, x) -> np.ndarray:
        """Points shifted by y, shape (..., d)."""
        return _as_points(x, self.d) + np.asarray(self.shift, dtype=float)

    def spatial(self, x) -> Dict[str, np.ndarray]:
        """Time-independent parts of the coefficients at (shifted) positions x."""
        pts = self.positions(x)
        return {
            'diffusion': [f(pts) for f in self.diffusion],
            'cross': self.cross(pts) if (self.cross is not None and self.d == 2) else np.zeros(pts.shape[:-1]),
            'drift': [f(pts) for f in self.drift],
            'rate': self.rate(pts),
        }

    def combine(self, spatial: Dict[str, np.ndarray], t: float) -> Dict[str, np.ndarray]:
        """Apply the time modulation to cached spatial parts."""
        mu = self.modulation(t)
        lam = self.ellipticity
        return {
            'diffusion': [lam + mu * (a - lam) for a in spatial['diffusion']],
            'cross': mu * spatial['cross'],
            'drift': [mu * b for b in spatial['drift']],
            'rate': mu * spatial['rate'],
        }

    @property
    def reaction(self) -> ReactionSpec:
        return ReactionSpec(rate=self.rate, profile_name=self.profile, d=self.d, modulation=self.modulation, shift=self.shift)

    # ranges over all (t, x); mu <= 1 so suprema sit at mu = 1

    def sup_diffusion(self) -> float:
        return max([self.ellipticity] + [f.upper for f in self.diffusion])

    def sup_cross(self) -> float:
        if self.cross is None or self.d < 2:
            return 0.0
        return max(abs(self.cross.lower), abs(self.cross.upper))

    def sup_drift_components(self) -> Tuple[float, ...]:
        return tuple(max(abs(f.lower), abs(f.upper)) for f in self.drift)

    def sup_drift_sq(self) -> float:
        return float(sum(v * v for v in self.sup_drift_components()))

    def sup_drift_l1(self) -> float:
        return float(sum(self.sup_drift_components()))

    def inf_fu0(self) -> float:
        return min(self.modulation.floor, 1.0) * self.rate.lower

    def sup_fu0(self) -> float:
        return self.rate.upper

    def gamma(self) -> float:
        """max of the sup-norms of the A entries, the b entries and fu0."""
        return max(self.sup_diffusion(), self.sup_cross(), max(self.sup_drift_components(), default=0.0), self.sup_fu0())

    def supersolution_speed(self) -> float:
        return supersolution_speed(self.gamma(), self.d)


def supersolution_speed(gamma: float, d: int) -> float:
    """a = gamma (1 + d + d^2), the speed of the moving exponential supersolution."""
    return gamma * (1 + d + d * d)


def eval_coeffs(m: MediumRealization, t: float, x) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Coefficients (A, b, fu0) at time t and position(s) x.

    Args:
        m: Medium realization
        t: Time, t >= 0
        x: Position of shape (d,) or a batch of shape (..., d)

    Returns:
        A of shape (..., d, d), b of shape (..., d), fu0 of shape (...)
    """
    parts = m.combine(m.spatial(x), t)
    diag = parts['diffusion']
    shape = np.shape(diag[0])
    A = np.zeros(shape + (m.d, m.d))
    for i in range(m.d):
        A[..., i, i] = diag[i]
    if m.d == 2:
        A[..., 0, 1] = parts['cross']
        A[..., 1, 0] = parts['cross']
    b = np.stack(parts['drift'], axis=-1)
    return A, b, parts['rate']


def shift_medium(m: MediumRealization, y) -> MediumRealization:
    """The medium seen from y: coefficients at x equal those of m at x + y."""
    y = np.broadcast_to(np.asarray(y, dtype=float), (m.d,))
    return replace(m, shift=tuple(float(s + v) for s, v in zip(m.shift, y)))


# --- nonlocal kernels --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelSpec:
    """
    Even jump kernel K(t, x, nu) = c(t, x) * K0(|nu|).

    K0(r) = max{envelope(r), e^{-alpha r}} with envelope(r) = chi_(0, alpha](r) r^-beta,
    beta in [0, d + 2 - alpha]; c(t, x) = alpha + mu(t) (c_x(x + y) - alpha) stays in
    [alpha, 1/alpha] whenever c_x does. `radial`/`envelope_fn` override the profile.
    """
    d: int
    alpha: float
    singularity: Optional[float] = None
    intensity: ScalarField = field(default_factory=lambda: ConstantField(1.0))
    modulation: TimeModulation = TimeModulation()
    seed: int = 0
    shift: Tuple[float, ...] = ()
    radial: Optional[Callable[[np.ndarray], np.ndarray]] = None
    envelope_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    generator: str = 'radial'

    @property
    def beta(self) -> float:
        if self.singularity is None:
            return self.d + 2.0 - self.alpha
        return float(self.singularity)

    def envelope(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.envelope_fn is not None:
            return np.asarray(self.envelope_fn(r), dtype=float)
        inside = (r > 0.0) & (r <= self.alpha)
        out = np.zeros_like(r)
        out[inside] = r[inside] ** (-self.beta)
        return out

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.radial is not None:
            return np.asarray(self.radial(r), dtype=float)
        return np.maximum(self.envelope(r), np.exp(-self.alpha * r))

    def intensity_at(self, t, x) -> np.ndarray:
        pts = _as_points(x, self.d)
        if self.shift:
            pts = pts + np.asarray(self.shift, dtype=float)
        return self.alpha + self.modulation(t) * (self.intensity(pts) - self.alpha)

    def __call__(self, t, x, nu) -> np.ndarray:
        r = np.linalg.norm(_as_points(nu, self.d), axis=-1)
        return self.intensity_at(t, x) * self.profile(r)

    def sup_intensity(self) -> float:
        return max(self.alpha, self.intensity.upper)

    def tail_radius(self, tolerance: float) -> float:
        """R_tail with e^{-alpha R_tail} <= tolerance."""
        return math.log(1.0 / tolerance) / self.alpha
