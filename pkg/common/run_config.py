"""
Run configuration: the YAML document a run is described by.

parse_config checks every key against the schema below, fills defaults, and
runs the hypothesis gates (drift bound, KPP profile, kernel bounds) on the
seeded medium before anything is solved. All problems found in one pass are
reported together, each with its dotted path.
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import yaml

from common.config import CONFIG
from common.errors import ConfigError, HypothesisError, ShapeError
from common.logger import Logger
from common.utils import config_hash
from medium.generators import KERNEL_GENERATORS, MEDIUM_GENERATORS, KernelGeneratorSpec, MediumSpec, sample_kernel, sample_medium
from medium.medium import PROFILES, KernelSpec, MediumRealization, kpp_surrogate

KINDS = ('validate', 'simulate', 'speed', 'wulff', 'vlin', 'homogenize')
SECTIONS = ('run', 'medium', 'reaction', 'kernel', 'grid', 'experiment', 'region')
SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class Key:
    """One schema entry: value type, default and an optional constraint returning an error message."""
    type: str
    default: Any = None
    check: Optional[Callable[[Any], Optional[str]]] = None
    optional: bool = False


def positive(v) -> Optional[str]:
    return None if v > 0 else "must be positive"


def nonnegative(v) -> Optional[str]:
    return None if v >= 0 else "must be nonnegative"


def unit_interval(v) -> Optional[str]:
    return None if 0.0 < v <= 1.0 else "must lie in (0, 1]"


def open_unit(v) -> Optional[str]:
    return None if 0.0 < v < 1.0 else "must lie in (0, 1)"


def half_interval(v) -> Optional[str]:
    return None if 0.0 < v <= 0.5 else "must lie in (0, 1/2]"


def one_of(choices) -> Callable[[Any], Optional[str]]:
    return lambda v: None if v in choices else f"must be one of {', '.join(map(str, choices))}"


def ordered_pair(v) -> Optional[str]:
    return None if len(v) == 2 and v[0] <= v[1] else "must be a [low, high] pair with low <= high"


def each(check) -> Callable[[Any], Optional[str]]:
    def run(values):
        for v in values:
            msg = check(v)
            if msg:
                return f"every entry {msg}"
        return None
    return run


def decreasing(v) -> Optional[str]:
    if not v:
        return "must not be empty"
    if any(e <= 0 for e in v) or any(b >= a for a, b in zip(v, v[1:])):
        return "must be positive and strictly decreasing"
    return None


SCHEMA: Dict[str, Dict[str, Key]] = {
    'run': {
        'kind': Key('str', None, one_of(KINDS)),
        'seed': Key('int', 0, lambda v: None if 0 <= v < SEED_LIMIT else "must be an unsigned 64-bit integer"),
        'out': Key('str', None, optional=True),
    },
    'medium': {
        'generator': Key('str', 'homogeneous', one_of(MEDIUM_GENERATORS)),
        'd': Key('int', 1, one_of((1, 2))),
        'ellipticity': Key('float', 1.0, positive),
        'modulation_floor': Key('float', 1.0, unit_interval),
        'diffusion': Key('float', 1.0, positive),
        'cross_diffusion': Key('float', 0.0),
        'drift': Key('floats', []),
        'fu0': Key('float', 1.0, positive),
        'diffusion_range': Key('floats', [1.0, 1.0], ordered_pair),
        'cross_ratio': Key('float', 0.0, lambda v: None if 0.0 <= v < 1.0 else "must lie in [0, 1)"),
        'drift_max': Key('float', 0.0, nonnegative),
        'fu0_range': Key('floats', [1.0, 4.0], ordered_pair),
        'fu0_values': Key('floats', [], each(positive)),
        'mollify_radius': Key('float', None, lambda v: None if 0.0 <= v < 0.5 else "must lie in [0, 1/2)", optional=True),
        'table_cells': Key('int', None, positive, optional=True),
        'fourier_modes': Key('int', None, positive, optional=True),
        'fourier_max_frequency': Key('float', None, positive, optional=True),
    },
    'reaction': {
        'profile': Key('str', 'fisher', one_of(tuple(PROFILES))),
        'surrogate': Key('bool', False),
    },
    'kernel': {
        'generator': Key('str', 'radial', one_of(KERNEL_GENERATORS)),
        'alpha': Key('float', 1.0, unit_interval),
        'singularity': Key('float', None, nonnegative, optional=True),
        'intensity_range': Key('floats', [1.0, 1.0], ordered_pair),
        'modulation_floor': Key('float', 1.0, unit_interval),
        'mollify_radius': Key('float', None, nonnegative, optional=True),
        'table_cells': Key('int', None, positive, optional=True),
    },
    'grid': {
        'h': Key('float', None, positive, optional=True),
        'radius': Key('float', None, positive, optional=True),
        'h_ladder': Key('floats', [], each(positive)),
    },
    'region': {
        'kind': Key('str', 'ball'),
        'center': Key('floats', None, optional=True),
        'radius': Key('float', 1.0, nonnegative),
        'lo': Key('floats', None, optional=True),
        'hi': Key('floats', None, optional=True),
        'boxes': Key('boxes', None, optional=True),
        'normal': Key('floats', None, optional=True),
        'level': Key('float', 0.0),
        'clip_radius': Key('float', None, positive, optional=True),
    },
}

_PASSAGE = {
    'ladder': Key('ints', None, each(positive), optional=True),
    'horizon': Key('int', None, positive, optional=True),
    'window': Key('int', None, nonnegative, optional=True),
}

EXPERIMENTS: Dict[str, Dict[str, Key]] = {
    'validate': {},
    'simulate': {
        'T': Key('float', 10.0, nonnegative),
        'observe': Key('floats', [], each(nonnegative)),
        'initial': Key('str', 'ball', one_of(('ball', 'constant', 'region'))),
        'level': Key('float', 0.5, unit_interval),
        'radius': Key('float', 1.0, positive),
        'supersolution_check': Key('bool', True),
    },
    'speed': {
        'directions': Key('vectors', None, optional=True),
        'spreading': Key('bool', True),
        **_PASSAGE,
        'front_time': Key('float', None, positive, optional=True),
        'expected_speed': Key('float', None, positive, optional=True),
        'speed_tolerance': Key('float', 0.05, positive),
    },
    'wulff': {
        'seeds': Key('int', 1, positive),
        'directions': Key('int', None, positive, optional=True),
        **_PASSAGE,
        'defect_tolerance': Key('float', 0.02, nonnegative),
        'expected_radius': Key('float', None, positive, optional=True),
        'wulff_tolerance': Key('float', 0.1, positive),
        'front_directions': Key('int', 0, nonnegative),
        'front_time': Key('float', None, positive, optional=True),
        'hair_theta': Key('float', None, open_unit, optional=True),
        'hair_eta': Key('float', 0.1, open_unit),
        'strong_shifts': Key('int', 0, nonnegative),
        'strong_time': Key('float', CONFIG['wulff']['probe_time'], positive),
        'strong_delta': Key('float', CONFIG['wulff']['probe_delta'], half_interval),
        'theta': Key('float', CONFIG['wulff']['probe_theta'], open_unit),
        'strong_pass_fraction': Key('float', 1.0, unit_interval),
        'triples': Key('int', 0, nonnegative),
        'triple_extent': Key('float', 10.0, positive),
    },
    'vlin': {
        'delta': Key('float', CONFIG['experiments']['vlin_delta'], half_interval),
        'times': Key('floats', [10.0, 20.0, 40.0], each(positive)),
        'theta': Key('float', 0.5, unit_interval),
    },
    'homogenize': {
        'eps': Key('floats', None, decreasing),
        'rho_power': Key('float', CONFIG['experiments']['rho_power'], positive),
        'theta': Key('float', 0.5, unit_interval),
        'obs_times': Key('floats', [1.0], each(positive)),
        'band': Key('float', CONFIG['experiments']['band'], positive),
        'thresholds': Key('floats', list(CONFIG['experiments']['thresholds']),
                          lambda v: None if len(v) == 2 and 0.0 < v[0] < v[1] < 1.0 else "must be [eta0, eta1] with 0 < eta0 < eta1 < 1"),
        'window': Key('float', None, positive, optional=True),
        'shift_radius': Key('float', 0.0, nonnegative),
        'strict_trend': Key('bool', False),
        'final_ratio': Key('float', None, positive, optional=True),
        'shape_radius': Key('float', None, positive, optional=True),
        'shape_directions': Key('int', None, positive, optional=True),
        'ladder': _PASSAGE['ladder'],
        'horizon': _PASSAGE['horizon'],
        'passage_window': _PASSAGE['window'],
    },
}

NEEDS_REGION = ('vlin', 'homogenize')


@dataclass
class RunConfig:
    kind: str
    seed: int
    medium: Dict[str, Any]
    reaction: Dict[str, Any]
    grid: Dict[str, Any]
    experiment: Dict[str, Any] = field(default_factory=dict)
    kernel: Optional[Dict[str, Any]] = None
    region: Optional[Dict[str, Any]] = None
    out: Optional[str] = None

    @property
    def d(self) -> int:
        return self.medium['d']

    def to_dict(self) -> Dict[str, Any]:
        document: Dict[str, Any] = {
            'run': {'kind': self.kind, 'seed': self.seed},
            'medium': dict(self.medium),
            'reaction': dict(self.reaction),
            'grid': dict(self.grid),
            'experiment': dict(self.experiment),
        }
        if self.out is not None:
            document['run']['out'] = self.out
        if self.kernel is not None:
            document['kernel'] = dict(self.kernel)
        if self.region is not None:
            document['region'] = dict(self.region)
        return document

    def hash_payload(self) -> Dict[str, Any]:
        """to_dict without the output location, which does not change results."""
        document = self.to_dict()
        document['run'].pop('out', None)
        return document

    def digest(self) -> str:
        return config_hash(self.hash_payload())


# --- type coercion -----------------------------------------------------------

def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(kind: str, value: Any) -> Tuple[Any, Optional[str]]:
    """Typed value or an error message."""
    if kind == 'str':
        return (value, None) if isinstance(value, str) else (None, "expected a string")
    if kind == 'bool':
        return (value, None) if isinstance(value, bool) else (None, "expected true or false")
    if kind == 'int':
        return (value, None) if isinstance(value, int) and not isinstance(value, bool) else (None, "expected an integer")
    if kind == 'float':
        if not _is_number(value) or not math.isfinite(value):
            return None, "expected a finite number"
        return float(value), None
    if kind in ('floats', 'ints'):
        if not isinstance(value, list):
            return None, "expected a list"
        out = []
        for item in value:
            coerced, msg = _coerce('int' if kind == 'ints' else 'float', item)
            if msg:
                return None, f"list entry {item!r}: {msg}"
            out.append(coerced)
        return out, None
    if kind == 'vectors':
        if not isinstance(value, list) or not value:
            return None, "expected a non-empty list of vectors"
        out = []
        for item in value:
            coerced, msg = _coerce('floats', item)
            if msg:
                return None, msg
            out.append(coerced)
        return out, None
    if kind == 'boxes':
        if not isinstance(value, list) or not value:
            return None, "expected a non-empty list of [lo, hi] pairs"
        out = []
        for item in value:
            if not isinstance(item, list) or len(item) != 2:
                return None, "every box must be a [lo, hi] pair"
            lo, msg_lo = _coerce('floats', item[0])
            hi, msg_hi = _coerce('floats', item[1])
            if msg_lo or msg_hi:
                return None, msg_lo or msg_hi
            out.append([lo, hi])
        return out, None
    raise ValueError(f"unknown schema type '{kind}'")


def _section(name: str, raw: Any, schema: Dict[str, Key], problems: List[Tuple[str, str]]) -> Dict[str, Any]:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        problems.append((name, "expected a mapping"))
        return {}
    out: Dict[str, Any] = {}
    for key in raw:
        if key not in schema:
            problems.append((f"{name}.{key}", "unknown key"))
    for key, spec in schema.items():
        path = f"{name}.{key}"
        if key not in raw or raw[key] is None:
            if spec.default is None and not spec.optional:
                problems.append((path, "required"))
            out[key] = spec.default if not isinstance(spec.default, list) else list(spec.default)
            continue
        value, msg = _coerce(spec.type, raw[key])
        if msg is None and spec.check is not None:
            msg = spec.check(value)
        if msg:
            problems.append((path, msg))
            continue
        out[key] = value
    return out


def _cross_checks(cfg: Dict[str, Dict[str, Any]], kind: str, problems: List[Tuple[str, str]]) -> None:
    medium, grid, exp, region = cfg['medium'], cfg['grid'], cfg['experiment'], cfg['region']
    d = medium.get('d') or 1
    lam = medium.get('ellipticity') or 1.0
    if medium.get('drift') and len(medium['drift']) != d:
        problems.append(('medium.drift', f"needs {d} components"))
    if medium.get('diffusion') is not None and medium['diffusion'] < lam:
        problems.append(('medium.diffusion', f"must be at least the ellipticity {lam!r}"))
    if medium.get('diffusion_range') and medium['diffusion_range'][0] < lam:
        problems.append(('medium.diffusion_range', f"lower end must be at least the ellipticity {lam!r}"))
    if d == 2 and medium.get('diffusion') is not None and abs(medium.get('cross_diffusion') or 0.0) > medium['diffusion'] - lam:
        problems.append(("medium.cross_diffusion", "|A12| must not exceed diffusion - ellipticity"))
    if medium.get('fu0_range') and medium['fu0_range'][0] <= 0.0:
        problems.append(('medium.fu0_range', "lower end must be positive"))

    kernel = cfg['kernel']
    if kernel:
        alpha = kernel.get('alpha') or 1.0
        lo, hi = kernel.get('intensity_range') or (alpha, alpha)
        if lo < alpha or hi > 1.0 / alpha:
            problems.append(('kernel.intensity_range', f"must lie within [alpha, 1/alpha] = [{alpha!r}, {1.0 / alpha!r}]"))
        beta = kernel.get('singularity')
        if beta is not None and beta > d + 2.0 - alpha:
            problems.append(('kernel.singularity', f"must not exceed d + 2 - alpha = {d + 2.0 - alpha!r}"))

    if grid.get('h') is None:
        grid['h'] = CONFIG['grid']['h'][d]
    ladder = grid.get('h_ladder') or []
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        problems.append(('grid.h_ladder', "must be strictly decreasing"))

    if (kind in NEEDS_REGION or exp.get('initial') == 'region') and region is None:
        problems.append(('region', f"required for kind '{kind}'"))
    if kind == 'speed':
        if exp.get('directions') is None:
            exp['directions'] = [[1.0], [-1.0]] if d == 1 else [[1.0, 0.0], [0.0, 1.0]]
        for i, v in enumerate(exp['directions']):
            if len(v) != d or not any(v):
                problems.append((f"experiment.directions[{i}]", f"needs {d} components, not all zero"))
    unbounded = region is not None and region.get('kind') in ('halfspace', 'complement_box') and region.get('clip_radius') is None
    if kind == 'homogenize' and unbounded and exp.get('window') is None:
        problems.append(('experiment.window', "an unbounded region needs an observation window"))


def _hypothesis_gates(config: RunConfig) -> None:
    """Build the seeded medium (and kernel) and check drift bound, KPP conditions and kernel bounds."""
    from medium.validator import (
        default_kernel_samples, default_tx_samples, default_u_samples,
        validate_drift_bound, validate_kernel, validate_kpp,
    )

    problems: List[Tuple[str, str]] = []
    medium = build_medium(config)
    tx = default_tx_samples(medium.d, 500, config.seed)
    if not validate_drift_bound(medium) or not validate_drift_bound(medium, tx):
        problems.append(('medium.drift', f"violates sup|b|^2 < 4 lambda inf fu0: {medium.sup_drift_sq()!r} >= "
                                         f"{4.0 * medium.ellipticity * medium.inf_fu0()!r}"))
    report = validate_kpp(medium.reaction, default_u_samples(), tx)
    for name in report.failures():
        problems.append(("reaction.profile", f"KPP condition '{name}' fails for '{config.reaction['profile']}'"))
    kernel = build_kernel(config)
    if kernel is not None:
        report = validate_kernel(kernel, default_kernel_samples(kernel, 300, config.seed))
        for name in report.failures():
            problems.append(('kernel', f"kernel bound '{name}' fails"))
    if problems:
        raise HypothesisError(problems)


def parse_config(text: str, overrides: Optional[Dict[str, Any]] = None, check_hypotheses: bool = True) -> RunConfig:
    """
    Parse and validate a YAML run configuration.

    Args:
        text: YAML document with sections run, medium, reaction, kernel, grid, experiment, region
        overrides: Values replacing run-section keys (CLI --seed / --out)
        check_hypotheses: Run the drift-bound, KPP and kernel gates on the seeded medium

    Returns:
        The validated RunConfig with defaults filled in

    Raises:
        ConfigError: one or more malformed fields, each with its dotted path
        HypothesisError: the configured medium violates the standing hypotheses
    """
    try:
        raw = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as e:
        raise ConfigError([('<document>', f"not valid YAML: {e}")])
    if not isinstance(raw, dict):
        raise ConfigError([('<document>', "expected a mapping of sections")])

    problems: List[Tuple[str, str]] = []
    for name in raw:
        if name not in SECTIONS:
            problems.append((name, "unknown section"))
    run_raw = raw.get('run') or {}
    if overrides and isinstance(run_raw, dict):
        run_raw = dict(run_raw)
        expected = overrides.get('kind')
        if expected and run_raw.get('kind') not in (None, expected):
            problems.append(('run.kind', f"config describes '{run_raw['kind']}', not '{expected}'"))
        run_raw.update({k: v for k, v in overrides.items() if v is not None})

    cfg: Dict[str, Any] = {'run': _section('run', run_raw, SCHEMA['run'], problems)}
    kind = cfg['run'].get('kind')
    for name in ('medium', 'reaction', 'grid'):
        cfg[name] = _section(name, raw.get(name), SCHEMA[name], problems)
    cfg['kernel'] = _section('kernel', raw['kernel'], SCHEMA['kernel'], problems) if raw.get('kernel') is not None else None
    cfg['region'] = _section('region', raw['region'], SCHEMA['region'], problems) if raw.get('region') is not None else None
    cfg['experiment'] = _section('experiment', raw.get('experiment'), EXPERIMENTS.get(kind, {}), problems) if kind else {}
    if kind:
        _cross_checks(cfg, kind, problems)

    if cfg['region'] is not None and not any(path.startswith('region') for path, _ in problems):
        from geometry.regions import RegionSpec
        try:
            RegionSpec.from_dict(cfg['region'], cfg['medium'].get('d') or 1)
        except ShapeError as e:
            problems.append(('region', str(e)))
    if problems:
        raise ConfigError(problems)

    config = RunConfig(kind=kind, seed=cfg['run']['seed'], medium=cfg['medium'], reaction=cfg['reaction'],
                       grid=cfg['grid'], experiment=cfg['experiment'], kernel=cfg['kernel'], region=cfg['region'],
                       out=cfg['run'].get('out'))
    if check_hypotheses:
        _hypothesis_gates(config)
    return config


def serialize_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=None)


def load_config(path, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    with open(path, 'r') as f:
        return parse_config(f.read(), overrides)


# --- builders ----------------------------------------------------------------

def build_medium(config: RunConfig, seed: Optional[int] = None) -> MediumRealization:
    section = dict(config.medium, profile=config.reaction['profile'])
    return sample_medium(MediumSpec.from_dict(section), config.seed if seed is None else seed)


def build_kernel(config: RunConfig, seed: Optional[int] = None) -> Optional[KernelSpec]:
    if config.kernel is None:
        return None
    section = dict(config.kernel, d=config.d)
    return sample_kernel(KernelGeneratorSpec.from_dict(section), config.seed if seed is None else seed)


def build_model(config: RunConfig, seed: Optional[int] = None):
    """LocalModel of the medium, or NonlocalModel of the kernel when a kernel section is given."""
    from solver.solver import LocalModel, NonlocalModel

    medium = build_medium(config, seed)
    reaction = kpp_surrogate(medium.reaction) if config.reaction['surrogate'] else None
    kernel = build_kernel(config, seed)
    if kernel is not None:
        return NonlocalModel(kernel, reaction or medium.reaction)
    return LocalModel(medium, reaction)


def build_region(config: RunConfig):
    from geometry.regions import RegionSpec

    if config.region is None:
        raise ConfigError([('region', f"required for kind '{config.kind}'")])
    return RegionSpec.from_dict(config.region, config.d)


def build_shape(config: RunConfig, model, logger: Optional[Logger] = None):
    """Reference shape: the configured ball, or a Wulff estimate of the model."""
    from geometry.shapes import ConvexShape
    from wulff.shape import estimate_wulff

    exp = config.experiment
    if exp.get('shape_radius') is not None:
        return ConvexShape.ball(config.d, exp['shape_radius'])
    if logger:
        logger.info("[homogenize] No shape_radius given; estimating the Wulff shape first")
    return estimate_wulff(model, exp.get('shape_directions'), exp.get('ladder'), exp.get('horizon'),
                          exp.get('passage_window'), config.grid['h'], logger=logger).shape
