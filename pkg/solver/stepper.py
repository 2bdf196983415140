"""
Explicit monotone steppers.

Both steppers write the update as u + dt * (sum of nonnegative weights times
neighbour differences + reaction), so under their CFL bounds every new value is a
nondecreasing function of every old value. That is the discrete comparison
principle; range preservation and the fixed points u = 0, u = 1 follow from it.
"""
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy import ndimage

from common.config import CONFIG
from common.errors import CFLViolationError, KernelValidationError, StencilPositivityError
from medium.medium import KernelSpec, MediumRealization, ReactionSpec
from medium.validator import default_kernel_samples, validate_kernel
from solver.grid import Field, Grid


def cfl_dt(g: Grid, m: MediumRealization, lipschitz: Optional[float] = None) -> float:
    """
    Largest dt keeping the local stencil monotone.

    dt * (2 d sup A / h^2 + sup |b|_1 / h + Lip f) <= 1, with suprema over all (t, x).

    Args:
        g: Grid
        m: Medium
        lipschitz: Lipschitz bound of f in u (default: that of the medium's reaction)

    Returns:
        dt
    """
    lip = m.reaction.lipschitz_const if lipschitz is None else float(lipschitz)
    rate = 2.0 * g.d * m.sup_diffusion() / g.h ** 2 + m.sup_drift_l1() / g.h + lip
    return 1.0 / rate


class LocalOperator:
    """Coefficients of one (medium, reaction) pair cached on one grid."""

    def __init__(self, grid: Grid, m: MediumRealization, reaction: Optional[ReactionSpec] = None, reaction_scale: float = 1.0):
        self.grid = grid
        self.medium = m
        self.reaction = reaction or m.reaction
        self.reaction_scale = float(reaction_scale)
        points = grid.points()
        self.spatial = m.spatial(points)
        shift = np.asarray(self.reaction.shift, dtype=float) if self.reaction.shift else 0.0
        self.rate = self.reaction.rate(points + shift)
        self.static = m.modulation.floor >= 1.0 and self.reaction.modulation.floor >= 1.0
        self._cached: Optional[Dict] = None

        cross = np.abs(self.spatial['cross'])
        if grid.d == 2 and np.any(cross > 0.0):
            margin = np.minimum(*self.spatial['diffusion'])
            if np.any(cross > margin * (1.0 + 1e-12)):
                raise StencilPositivityError("|A12| exceeds min(A11, A22); the 7-point stencil loses positivity")

    @property
    def lipschitz(self) -> float:
        return self.reaction.lipschitz_const * self.reaction_scale

    def dt_max(self) -> float:
        return cfl_dt(self.grid, self.medium, self.lipschitz)

    def at(self, t: float) -> Dict:
        if self.static and self._cached is not None:
            return self._cached
        coeffs = self.medium.combine(self.spatial, t)
        coeffs['rate'] = self.reaction_scale * self.reaction.modulation(t) * self.rate
        if self.static:
            self._cached = coeffs
        return coeffs

    def step(self, u: Field, dt: float) -> Field:
        return step_local(u, self.medium, dt, operator=self)


def _check_center(loss: np.ndarray, dt: float, what: str) -> None:
    worst = float(np.max(loss)) * dt
    if worst > 1.0 + CONFIG['solver']['monotonicity_tolerance']:
        raise CFLViolationError(f"{what}: dt={dt!r} gives dt * loss = {worst!r} > 1")


def step_local(u: Field, m: MediumRealization, dt: float, reaction: Optional[ReactionSpec] = None,
               operator: Optional[LocalOperator] = None) -> Field:
    """
    One explicit step of u_t = sum A_ij u_ij + b . grad u + f(t, x, u).

    Central second differences for A_ii, the positive 7-point stencil for A_12,
    first-order upwinding for b, explicit Euler for f. Cells off the grid hold
    u.exterior. Nothing is clipped.

    Raises:
        CFLViolationError: dt beyond the pointwise monotonicity bound
        StencilPositivityError: |A12| > min(A11, A22) somewhere
    """
    op = operator or LocalOperator(u.grid, m, reaction)
    c_ = op.at(u.time)
    h = u.grid.h
    g = op.reaction.g
    lip_g = op.reaction.g_lipschitz
    p = np.pad(u.values, 1, mode='constant', constant_values=u.exterior)

    if u.grid.d == 1:
        c = p[1:-1]
        east, west = p[2:] - c, p[:-2] - c
        a = c_['diffusion'][0]
        b = c_['drift'][0]
        bp, bm = np.maximum(b, 0.0), np.maximum(-b, 0.0)
        flux = a * (east + west) / h ** 2 + (bp * east + bm * west) / h
        loss = 2.0 * a / h ** 2 + (bp + bm) / h
    else:
        c = p[1:-1, 1:-1]
        xp, xm = p[2:, 1:-1] - c, p[:-2, 1:-1] - c
        yp, ym = p[1:-1, 2:] - c, p[1:-1, :-2] - c
        pp, mm = p[2:, 2:] - c, p[:-2, :-2] - c
        pm, mp = p[2:, :-2] - c, p[:-2, 2:] - c
        a11, a22 = c_['diffusion']
        a12 = c_['cross']
        ap, am = np.maximum(a12, 0.0), np.maximum(-a12, 0.0)
        off = ap + am
        if np.any(off > np.minimum(a11, a22) * (1.0 + 1e-12)):
            raise StencilPositivityError("|A12| exceeds min(A11, A22); the 7-point stencil loses positivity")
        b1, b2 = c_['drift']
        b1p, b1m = np.maximum(b1, 0.0), np.maximum(-b1, 0.0)
        b2p, b2m = np.maximum(b2, 0.0), np.maximum(-b2, 0.0)
        flux = ((a11 - off) * (xp + xm) + (a22 - off) * (yp + ym) + ap * (pp + mm) + am * (pm + mp)) / h ** 2 \
            + (b1p * xp + b1m * xm + b2p * yp + b2m * ym) / h
        loss = (2.0 * (a11 + a22) - 2.0 * off) / h ** 2 + (b1p + b1m + b2p + b2m) / h

    rate = c_['rate']
    _check_center(loss + rate * lip_g, dt, "local step")
    new = c + dt * (flux + rate * g(c))
    return u.with_values(new, u.time + dt)


# --- nonlocal ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NonlocalStencil:
    """Midpoint weights K0(|nu|) h^d on lattice offsets 0 < |nu| <= R_tail; center weight 0."""
    weights: np.ndarray
    total: float
    radius: float

    @classmethod
    def build(cls, grid: Grid, k: KernelSpec, tail_tolerance: Optional[float] = None) -> 'NonlocalStencil':
        tol = CONFIG['kernel']['tail_tolerance'] if tail_tolerance is None else tail_tolerance
        radius = k.tail_radius(tol)
        reach = int(math.floor(radius / grid.h))
        offsets = np.arange(-reach, reach + 1) * grid.h
        mesh = np.meshgrid(*([offsets] * grid.d), indexing='ij')
        r = np.sqrt(sum(axis ** 2 for axis in mesh))
        keep = (r > 0.0) & (r <= radius)
        weights = np.zeros_like(r)
        weights[keep] = k.profile(r[keep]) * grid.cell_volume
        return cls(weights=weights, total=float(weights.sum()), radius=radius)


def nonlocal_cfl_dt(stencil: NonlocalStencil, k: KernelSpec, r: ReactionSpec) -> float:
    """dt * (sup c * sum of weights + Lip f) <= 1."""
    return 1.0 / (k.sup_intensity() * stencil.total + r.lipschitz_const)


class NonlocalOperator:
    """
    Nonlocal stepper bound to one grid.

    The kernel is checked against its two-sided bounds on construction.

    Raises:
        KernelValidationError: the kernel fails validate_kernel
    """
    def __init__(self, grid: Grid, k: KernelSpec, reaction: ReactionSpec, tail_tolerance: Optional[float] = None,
                 stencil: Optional[NonlocalStencil] = None):
        report = validate_kernel(k, default_kernel_samples(k, CONFIG['kernel']['operator_samples'], k.seed))
        if not report.passed:
            raise KernelValidationError(f"kernel fails {', '.join(report.failures())}; refusing to step it")
        self.grid = grid
        self.kernel = k
        self.reaction = reaction
        self.stencil = stencil or NonlocalStencil.build(grid, k, tail_tolerance)
        points = grid.points()
        shift = np.asarray(k.shift, dtype=float) if k.shift else 0.0
        self.intensity = k.intensity(points + shift)
        rshift = np.asarray(reaction.shift, dtype=float) if reaction.shift else 0.0
        self.rate = reaction.rate(points + rshift)

    @property
    def lipschitz(self) -> float:
        return self.reaction.lipschitz_const

    def dt_max(self) -> float:
        return nonlocal_cfl_dt(self.stencil, self.kernel, self.reaction)

    def step(self, u: Field, dt: float) -> Field:
        return step_nonlocal(u, self.kernel, self.reaction, dt, operator=self)


def step_nonlocal(u: Field, k: KernelSpec, r: ReactionSpec, dt: float,
                  operator: Optional[NonlocalOperator] = None) -> Field:
    """
    One explicit step of u_t = sum_nu w(t, x, nu) [u(x + nu) - u(x)] + f(t, x, u).

    With an even stencil the sum equals the symmetrized second difference
    (1/2) [u(x + nu) + u(x - nu) - 2 u(x)], so the principal value is exact.
    The convolution acts on u - exterior, so constant states give exact zeros.

    Raises:
        KernelValidationError: k fails validate_kernel (checked when no operator is given)
    """
    op = operator or NonlocalOperator(u.grid, k, r)
    t = u.time
    c = k.alpha + k.modulation(t) * (op.intensity - k.alpha)
    rate = r.modulation(t) * op.rate
    _check_center(c * op.stencil.total + rate * r.g_lipschitz, dt, "nonlocal step")
    v = u.values - u.exterior
    jump = ndimage.convolve(v, op.stencil.weights, mode='constant', cval=0.0) - op.stencil.total * v
    new = u.values + dt * (c * jump + rate * r.g(u.values))
    return u.with_values(new, t + dt)
