from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from common.config import CONFIG
from common.errors import MalformedProfileError
from common.logger import Logger
from common.utils import provenance, write_json
from medium.medium import KernelSpec, MediumRealization, ReactionSpec, eval_coeffs, shift_medium


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    witness: Any = None
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return {'name': self.name, 'passed': bool(self.passed), 'worst': float(self.worst),
                'witness': self.witness, 'detail': self.detail}


@dataclass
class ValidationReport:
    subject: str
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> List[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {'subject': self.subject, 'passed': self.passed, 'checks': [c.to_dict() for c in self.checks]}


def _witness(value) -> Any:
    arr = np.asarray(value, dtype=float)
    return float(arr) if arr.ndim == 0 else arr.tolist()


# --- default sample sets -----------------------------------------------------

def default_u_samples() -> np.ndarray:
    """Dense grid of (0, 1) plus the sequence 10^-k, k = 1..8, decreasing to 0."""
    decreasing = 10.0 ** -np.arange(1, 9)
    grid = np.linspace(0.0, 1.0, 1001)[1:-1]
    return np.unique(np.concatenate([decreasing, grid]))


def default_tx_samples(d: int, count: int, seed: int = 0, extent: float = 50.0) -> Tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    t = rng.uniform(0.0, 2.0, size=count)
    x = rng.uniform(-extent, extent, size=(count, d))
    return t, x


@dataclass
class KernelSamples:
    t: np.ndarray
    x: np.ndarray
    nu: np.ndarray


def default_kernel_samples(k: KernelSpec, count: int, seed: int = 0) -> KernelSamples:
    """Radii near 0, around alpha and in the tail, with random directions and (t, x)."""
    rng = np.random.default_rng(seed)
    third = count // 3
    radii = np.concatenate([
        10.0 ** rng.uniform(-4.0, np.log10(0.5 * k.alpha), size=third),
        k.alpha * rng.uniform(0.8, 1.2, size=third),
        rng.uniform(k.alpha, 20.0 / k.alpha, size=count - 2 * third),
    ])
    if k.d == 1:
        directions = rng.choice([-1.0, 1.0], size=(count, 1))
    else:
        angle = rng.uniform(0.0, 2.0 * np.pi, size=count)
        directions = np.stack([np.cos(angle), np.sin(angle)], axis=-1)
    t = rng.uniform(0.0, 2.0, size=count)
    x = rng.uniform(-50.0, 50.0, size=(count, k.d))
    return KernelSamples(t=t, x=x, nu=directions * radii[:, None])


# --- reactions ---------------------------------------------------------------

def validate_kpp(r: ReactionSpec, u_samples: Sequence[float], tx_samples: Tuple[np.ndarray, np.ndarray],
                 tolerance: Optional[float] = None, small_cut: float = 1e-4) -> ValidationReport:
    """
    Check the KPP conditions on a separable reaction fu0(t, x) g(u).

    Args:
        r: Reaction to check
        u_samples: Values in [0, 1], dense in (0, 1) and including a sequence tending to 0
        tx_samples: (t, x) arrays; fu0 is evaluated there
        tolerance: Allowed linearization gap near u = 0 (CONFIG default)
        small_cut: Samples below this level form the "u -> 0" tail

    Returns:
        ValidationReport with one entry per condition; failures are reported, not raised

    Raises:
        MalformedProfileError: samples outside [0, 1] or non-finite profile values
    """
    tol = CONFIG['medium']['kpp_tolerance'] if tolerance is None else tolerance
    u = np.asarray(u_samples, dtype=float).ravel()
    if u.size == 0 or not np.all(np.isfinite(u)) or u.min() < 0.0 or u.max() > 1.0:
        raise MalformedProfileError("u samples must be finite and lie in [0, 1]")
    g = r.g(u)
    ends = r.g(np.array([0.0, 1.0]))
    if not (np.all(np.isfinite(g)) and np.all(np.isfinite(ends))):
        raise MalformedProfileError(f"profile '{r.profile_name}' returned non-finite values")

    report = ValidationReport(subject=f"reaction:{r.profile_name}")

    worst_end = float(np.max(np.abs(ends)))
    report.checks.append(CheckResult('endpoints', worst_end == 0.0, worst_end, [0.0, 1.0], "g(0) = 0 = g(1)"))

    interior = (u > 0.0) & (u < 1.0)
    ui, gi = u[interior], g[interior]
    k = int(np.argmin(gi))
    report.checks.append(CheckResult('positivity', bool(gi[k] > 0.0), float(gi[k]), float(ui[k]), "g > 0 on (0, 1)"))

    excess = gi - ui
    k = int(np.argmax(excess))
    report.checks.append(CheckResult('linear_bound', bool(np.all(gi <= ui * (1.0 + 1e-12))), float(excess[k]), float(ui[k]), "g(u) <= u"))

    gap = 1.0 - gi / ui
    tail = ui <= small_cut
    if not np.any(tail):
        tail = ui <= ui.min()
    k = int(np.argmax(gap[tail]))
    worst_gap = float(gap[tail][k])
    report.checks.append(CheckResult('linearization', worst_gap <= tol, worst_gap, float(ui[tail][k]),
                                     "sup_u (1 - g(u)/u) -> 0 as u -> 0"))

    smallest = int(np.argmin(ui))
    slope = float(gi[smallest] / ui[smallest])
    report.checks.append(CheckResult('slope_at_zero', abs(slope - 1.0) <= tol, slope, float(ui[smallest]), "g'(0) = 1"))

    t, x = tx_samples
    rates = np.asarray(r.fu0(np.asarray(t, dtype=float), np.asarray(x, dtype=float)), dtype=float).ravel()
    effective = rates * slope
    k = int(np.argmin(effective)) if effective.size else 0
    worst_rate = float(effective[k]) if effective.size else float('nan')
    report.checks.append(CheckResult('rate_positive', bool(effective.size and worst_rate > 0.0), worst_rate,
                                     None if not effective.size else _witness([t[k]] + list(np.ravel(x[k]))),
                                     "inf f_u(t, x, 0) > 0"))
    return report


# --- media -------------------------------------------------------------------

def validate_drift_bound(m: MediumRealization, samples: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> bool:
    """
    sup |b|^2 < 4 lam inf fu0, strictly.

    Without samples the generator ranges are used (exact for constant and
    checkerboard fields, an upper bound for Fourier sums).
    """
    if samples is None:
        return m.sup_drift_sq() < 4.0 * m.ellipticity * m.inf_fu0()
    t, x = samples
    _, b, fu0 = eval_coeffs(m, np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    return float(np.max(np.sum(b * b, axis=-1))) < 4.0 * m.ellipticity * float(np.min(fu0))


def validate_medium(m: MediumRealization, count: Optional[int] = None, seed: int = 0) -> ValidationReport:
    """Ellipticity, exact periodicity and shift identities at random sample points."""
    count = count or CONFIG['medium']['validation_samples']
    tol = CONFIG['medium']['periodicity_tolerance']
    t, x = default_tx_samples(m.d, count, seed)
    report = ValidationReport(subject=f"medium:{m.generator}:{m.seed}")

    A0, b0, f0 = eval_coeffs(m, t, x)
    A1, b1, f1 = eval_coeffs(m, t + 1.0, x)
    min_eig = float(np.linalg.eigvalsh(A0).min())
    worst_period = max(float(np.max(np.abs(A0 - A1))), float(np.max(np.abs(b0 - b1))), float(np.max(np.abs(f0 - f1))))
    report.checks.append(CheckResult('ellipticity', min_eig >= m.ellipticity * (1.0 - 1e-12), min_eig, None,
                                     f"smallest eigenvalue of A >= {m.ellipticity}"))
    symmetric = bool(np.array_equal(A0, np.swapaxes(A0, -1, -2)))
    report.checks.append(CheckResult('symmetry', symmetric, 0.0 if symmetric else 1.0, None, "A = A^T"))
    report.checks.append(CheckResult('periodicity', worst_period <= tol, worst_period, None, "coefficients 1-periodic in t"))

    y = np.random.default_rng(seed + 1).uniform(-10.0, 10.0, size=m.d)
    As, bs, fs = eval_coeffs(shift_medium(m, y), t, x)
    Au, bu, fu = eval_coeffs(m, t, x + y)
    worst_shift = max(float(np.max(np.abs(As - Au))), float(np.max(np.abs(bs - bu))), float(np.max(np.abs(fs - fu))))
    report.checks.append(CheckResult('stationarity', worst_shift == 0.0, worst_shift, _witness(y),
                                     "shifted medium at x equals medium at x + y"))

    drift_ok = validate_drift_bound(m) and validate_drift_bound(m, (t, x))
    report.checks.append(CheckResult('drift_bound', drift_ok,
                                     m.sup_drift_sq() - 4.0 * m.ellipticity * m.inf_fu0(), None,
                                     "sup|b|^2 < 4 lam inf fu0"))
    return report


# --- kernels -----------------------------------------------------------------

def validate_kernel(k: KernelSpec, sample_points: Optional[KernelSamples] = None) -> ValidationReport:
    """
    Check the two-sided kernel bounds and exact evenness.

    Conditions, with r = |nu|:
        chi_(0, alpha](r) <= envelope(r) <= chi_(0, alpha](r) r^(-d-2+alpha)
        alpha envelope(r) <= K(t, x, nu) <= alpha^-1 max{envelope(r), e^(-alpha r)}
        K(t, x, nu) == K(t, x, -nu)
    """
    samples = sample_points or default_kernel_samples(k, CONFIG['kernel']['validation_samples'])
    nu = np.asarray(samples.nu, dtype=float).reshape(-1, k.d)
    x = np.asarray(samples.x, dtype=float).reshape(-1, k.d)
    t = np.asarray(samples.t, dtype=float).ravel()
    r = np.linalg.norm(nu, axis=-1)
    alpha = k.alpha
    rel = 1e-12

    env = k.envelope(r)
    chi = ((r > 0.0) & (r <= alpha)).astype(float)
    cap = np.zeros_like(r)
    inside = chi > 0.0
    cap[inside] = r[inside] ** (-k.d - 2.0 + alpha)
    values = np.array([k(ti, xi, ni) for ti, xi, ni in zip(t, x, nu)], dtype=float)
    mirrored = np.array([k(ti, xi, -ni) for ti, xi, ni in zip(t, x, nu)], dtype=float)

    report = ValidationReport(subject=f"kernel:{k.generator}:{k.seed}")

    low = chi - env
    high = env - cap * (1.0 + rel)
    i = int(np.argmax(np.maximum(low, high)))
    report.checks.append(CheckResult('envelope', bool(np.all(low <= 0.0) and np.all(high <= 0.0)),
                                     float(max(low[i], high[i])), float(r[i]),
                                     "chi <= envelope <= chi r^(-d-2+alpha)"))

    lower = alpha * env - values * (1.0 + rel)
    i = int(np.argmax(lower))
    report.checks.append(CheckResult('lower_bound', bool(np.all(lower <= 0.0)), float(lower[i]), float(r[i]),
                                     "alpha envelope <= K"))

    upper = values - np.maximum(env, np.exp(-alpha * r)) / alpha * (1.0 + rel)
    i = int(np.argmax(upper))
    report.checks.append(CheckResult('upper_bound', bool(np.all(upper <= 0.0)), float(upper[i]), float(r[i]),
                                     "K <= alpha^-1 max{envelope, e^(-alpha r)}"))

    odd = np.abs(values - mirrored)
    i = int(np.argmax(odd))
    report.checks.append(CheckResult('evenness', bool(np.all(values == mirrored)), float(odd[i]), float(r[i]),
                                     "K(nu) = K(-nu)"))
    return report


# --- `validate` command ------------------------------------------------------

def run(args: Any, config: Dict, logger: Logger, workflow_data: Dict) -> Dict:
    """
    Validates the configured medium, its reaction and (if present) its kernel.
    """
    from common.run_config import build_kernel, build_medium

    run_config = workflow_data['run_config']
    run_dir = workflow_data['run_dir']
    meta = provenance(workflow_data['config_hash'], run_config.seed)

    medium = build_medium(run_config)
    logger.info(f"[validate] Checking {medium.generator} medium in d={medium.d} (seed {medium.seed})")
    reports = [validate_medium(medium, seed=run_config.seed)]
    tx = default_tx_samples(medium.d, 1000, run_config.seed)
    reports.append(validate_kpp(medium.reaction, default_u_samples(), tx))
    kernel = build_kernel(run_config)
    if kernel is not None:
        reports.append(validate_kernel(kernel, default_kernel_samples(kernel, config['kernel']['validation_samples'], run_config.seed)))

    checks = {}
    for report in reports:
        for c in report.checks:
            checks[f"{report.subject.split(':')[0]}.{c.name}"] = c.passed
            level = logger.debug if c.passed else logger.warning
            level(f"[validate] {report.subject} {c.name}: {'pass' if c.passed else 'FAIL'} (worst {c.worst!r})")

    path = write_json(run_dir / config['files']['validation'], {'reports': [r.to_dict() for r in reports]}, meta)
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        logger.warning(f"[validate] {len(failed)} check(s) failed: {', '.join(failed)}")
    else:
        logger.success(f"[validate] All {len(checks)} checks passed")
    return {
        'summary': {'checks_run': len(checks), 'checks_failed': len(failed), 'gamma': medium.gamma(),
                    'supersolution_speed': medium.supersolution_speed()},
        'checks': checks,
        'artifacts': [path],
    }
