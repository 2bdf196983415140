from dataclasses import dataclass, fields
from typing import Any, Dict, Optional, Tuple

import numpy as np

from common.config import CONFIG
from common.errors import KernelValidationError, UnknownGeneratorError
from medium.medium import (
    PROFILES, CheckerboardField, ConstantField, FourierField, KernelSpec,
    MediumRealization, ScalarField, ScaledField, TimeModulation,
)

MEDIUM_GENERATORS = ('homogeneous', 'checkerboard', 'fourier')
KERNEL_GENERATORS = ('radial', 'checkerboard-kernel')


@dataclass(frozen=True)
class MediumSpec:
    """Generator description for sample_medium; mirrors the `medium` config section."""
    generator: str = 'homogeneous'
    d: int = 1
    ellipticity: float = 1.0
    profile: str = 'fisher'
    modulation_floor: float = 1.0
    # homogeneous
    diffusion: float = 1.0
    cross_diffusion: float = 0.0
    drift: Tuple[float, ...] = ()
    fu0: float = 1.0
    # random generators
    diffusion_range: Tuple[float, float] = (1.0, 1.0)
    cross_ratio: float = 0.0
    drift_max: float = 0.0
    fu0_range: Tuple[float, float] = (1.0, 4.0)
    fu0_values: Tuple[float, ...] = ()
    mollify_radius: Optional[float] = None
    table_cells: Optional[int] = None
    fourier_modes: Optional[int] = None
    fourier_max_frequency: Optional[float] = None

    @classmethod
    def from_dict(cls, section: Dict[str, Any]) -> 'MediumSpec':
        known = {f.name for f in fields(cls)}
        values = {}
        for key, value in section.items():
            if key not in known:
                continue
            values[key] = tuple(value) if isinstance(value, list) else value
        return cls(**values)


@dataclass(frozen=True)
class KernelGeneratorSpec:
    generator: str = 'radial'
    d: int = 1
    alpha: float = 1.0
    singularity: Optional[float] = None
    intensity_range: Tuple[float, float] = (1.0, 1.0)
    modulation_floor: float = 1.0
    mollify_radius: Optional[float] = None
    table_cells: Optional[int] = None

    @classmethod
    def from_dict(cls, section: Dict[str, Any]) -> 'KernelGeneratorSpec':
        known = {f.name for f in fields(cls)}
        values = {k: (tuple(v) if isinstance(v, list) else v) for k, v in section.items() if k in known}
        return cls(**values)


def _table_cells(d: int, requested: Optional[int]) -> int:
    return int(requested) if requested else CONFIG['medium']['table_cells'][d]


def _mollify_radius(requested: Optional[float]) -> float:
    return float(CONFIG['medium']['mollify_radius'] if requested is None else requested)


def _uniform_table(rng: np.random.Generator, lo: float, hi: float, shape) -> np.ndarray:
    if lo == hi:
        return np.full(shape, float(lo))
    return rng.uniform(lo, hi, size=shape)


def _fourier(rng: np.random.Generator, d: int, mean: float, amplitude: float, spec: MediumSpec) -> ScalarField:
    if amplitude == 0.0:
        return ConstantField(mean)
    modes = spec.fourier_modes or CONFIG['medium']['fourier_modes']
    kmax = spec.fourier_max_frequency or CONFIG['medium']['fourier_max_frequency']
    wavevectors = rng.uniform(-kmax, kmax, size=(modes, d))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=modes)
    return FourierField(mean=mean, amplitude=amplitude, wavevectors=wavevectors, phases=phases)


def _homogeneous(spec: MediumSpec, rng: np.random.Generator):
    d = spec.d
    drift = tuple(spec.drift) if spec.drift else (0.0,) * d
    cross = ConstantField(spec.cross_diffusion) if (d == 2 and spec.cross_diffusion) else None
    return {
        'diffusion': tuple(ConstantField(spec.diffusion) for _ in range(d)),
        'drift': tuple(ConstantField(v) for v in drift),
        'rate': ConstantField(spec.fu0),
        'cross': cross,
    }


def _checkerboard(spec: MediumSpec, rng: np.random.Generator):
    d = spec.d
    n = _table_cells(d, spec.table_cells)
    radius = _mollify_radius(spec.mollify_radius)
    shape = (n,) * d
    offset = tuple(float(v) for v in rng.uniform(0.0, 1.0, size=d))

    def board(table: np.ndarray) -> ScalarField:
        if np.all(table == table.flat[0]):
            return ConstantField(float(table.flat[0]))
        return CheckerboardField(table=table, offset=offset, radius=radius)

    diag_tables = [_uniform_table(rng, *spec.diffusion_range, shape) for _ in range(d)]
    drift_tables = [_uniform_table(rng, -spec.drift_max, spec.drift_max, shape) for _ in range(d)]
    if spec.fu0_values:
        rate_table = rng.choice(np.asarray(spec.fu0_values, dtype=float), size=shape)
    else:
        rate_table = _uniform_table(rng, *spec.fu0_range, shape)
    cross = None
    if d == 2 and spec.cross_ratio > 0.0:
        margin = np.minimum(diag_tables[0], diag_tables[1]) - spec.ellipticity
        cross = board(spec.cross_ratio * margin * rng.uniform(-1.0, 1.0, size=shape))
    return {
        'diffusion': tuple(board(t) for t in diag_tables),
        'drift': tuple(board(t) for t in drift_tables),
        'rate': board(rate_table),
        'cross': cross,
    }


def _fourier_medium(spec: MediumSpec, rng: np.random.Generator):
    d = spec.d

    def centered(lo: float, hi: float) -> ScalarField:
        return _fourier(rng, d, 0.5 * (lo + hi), 0.5 * (hi - lo), spec)

    diffusion = tuple(centered(*spec.diffusion_range) for _ in range(d))
    drift = tuple(_fourier(rng, d, 0.0, spec.drift_max, spec) for _ in range(d))
    lo, hi = (min(spec.fu0_values), max(spec.fu0_values)) if spec.fu0_values else spec.fu0_range
    rate = centered(lo, hi)
    cross = None
    if d == 2 and spec.cross_ratio > 0.0:
        margin = min(f.lower for f in diffusion) - spec.ellipticity
        cross = ScaledField(_fourier(rng, d, 0.0, 1.0, spec), spec.cross_ratio * margin)
    return {'diffusion': diffusion, 'drift': drift, 'rate': rate, 'cross': cross}


_BUILDERS = {
    'homogeneous': _homogeneous,
    'checkerboard': _checkerboard,
    'fourier': _fourier_medium,
}


def sample_medium(spec: MediumSpec, seed: int) -> MediumRealization:
    """
    Draw one realization of a built-in random medium.

    Args:
        spec: Generator description
        seed: 64-bit unsigned seed; equal seeds give bit-identical media

    Returns:
        The realization, with zero shift

    Raises:
        UnknownGeneratorError: if spec.generator is not a built-in generator
    """
    builder = _BUILDERS.get(spec.generator)
    if builder is None:
        raise UnknownGeneratorError(f"unknown medium generator '{spec.generator}' (known: {', '.join(MEDIUM_GENERATORS)})")
    if spec.profile not in PROFILES:
        raise UnknownGeneratorError(f"unknown reaction profile '{spec.profile}' (known: {', '.join(PROFILES)})")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    parts = builder(spec, rng)
    return MediumRealization(
        d=spec.d,
        ellipticity=spec.ellipticity,
        diffusion=parts['diffusion'],
        drift=parts['drift'],
        rate=parts['rate'],
        cross=parts['cross'],
        profile=spec.profile,
        modulation=TimeModulation(spec.modulation_floor),
        seed=int(seed),
        generator=spec.generator,
    )


def sample_kernel(spec: KernelGeneratorSpec, seed: int) -> KernelSpec:
    """Draw a kernel c(t, x) K0(|nu|); only the intensity c is random."""
    if spec.generator not in KERNEL_GENERATORS:
        raise UnknownGeneratorError(f"unknown kernel generator '{spec.generator}' (known: {', '.join(KERNEL_GENERATORS)})")
    if not 0.0 < spec.alpha <= 1.0:
        raise KernelValidationError(f"alpha must lie in (0, 1], got {spec.alpha!r}")
    lo, hi = spec.intensity_range
    if lo < spec.alpha or hi > 1.0 / spec.alpha:
        raise KernelValidationError(f"intensity range {spec.intensity_range!r} leaves [alpha, 1/alpha]")
    if spec.singularity is not None and not 0.0 <= spec.singularity <= spec.d + 2.0 - spec.alpha:
        raise KernelValidationError(f"singularity {spec.singularity!r} outside [0, d + 2 - alpha]")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    if spec.generator == 'radial' or lo == hi:
        intensity: ScalarField = ConstantField(float(lo))
    else:
        n = _table_cells(spec.d, spec.table_cells)
        offset = tuple(float(v) for v in rng.uniform(0.0, 1.0, size=spec.d))
        table = rng.uniform(lo, hi, size=(n,) * spec.d)
        intensity = CheckerboardField(table=table, offset=offset, radius=_mollify_radius(spec.mollify_radius))
    return KernelSpec(
        d=spec.d,
        alpha=spec.alpha,
        singularity=spec.singularity,
        intensity=intensity,
        modulation=TimeModulation(spec.modulation_floor),
        seed=int(seed),
        generator=spec.generator,
    )
