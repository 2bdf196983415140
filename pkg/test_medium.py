#!/usr/bin/env python3
"""
Test script for the medium module.
"""
import sys
import os

import numpy as np

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.errors import KernelValidationError, MalformedProfileError, UnknownGeneratorError
from medium.generators import MediumSpec, KernelGeneratorSpec, sample_medium, sample_kernel
from medium.medium import (
    ConstantField, KernelSpec, ReactionSpec, TimeModulation, eval_coeffs, kpp_surrogate, shift_medium,
)
from medium.validator import (
    default_kernel_samples, default_tx_samples, default_u_samples,
    validate_drift_bound, validate_kernel, validate_kpp, validate_medium,
)


def _homogeneous(d=1, drift=(), **extra):
    return sample_medium(MediumSpec(generator='homogeneous', d=d, drift=tuple(drift), **extra), seed=0)


def test_eval_coeffs_homogeneous():
    """Constant medium returns A = I, b = 0, fu0 = 1 everywhere."""
    print("Testing eval_coeffs on a homogeneous medium...")

    m = _homogeneous(d=2)
    A, b, fu0 = eval_coeffs(m, 0.3, np.array([[0.0, 0.0], [5.5, -2.0]]))
    assert A.shape == (2, 2, 2)
    assert np.array_equal(A[0], np.eye(2))
    assert np.array_equal(b, np.zeros((2, 2)))
    assert np.array_equal(fu0, np.ones(2))

    print("✓ eval_coeffs homogeneous test passed")


def test_sample_medium_is_reproducible():
    """Equal seeds give bit-identical coefficients; different seeds differ."""
    print("Testing sample_medium reproducibility...")

    spec = MediumSpec(generator='checkerboard', d=1, diffusion_range=(1.0, 2.0), fu0_range=(1.0, 4.0))
    x = np.linspace(-30.0, 30.0, 301)
    first = eval_coeffs(sample_medium(spec, 7), 0.0, x)
    again = eval_coeffs(sample_medium(spec, 7), 0.0, x)
    other = eval_coeffs(sample_medium(spec, 8), 0.0, x)
    for a, b in zip(first, again):
        assert np.array_equal(a, b)
    assert not np.array_equal(first[2], other[2])

    print("✓ sample_medium reproducibility test passed")


def test_unknown_generator():
    """An unknown generator name raises UnknownGeneratorError."""
    print("Testing unknown generator rejection...")

    try:
        sample_medium(MediumSpec(generator='voronoi'), 0)
        assert False, "expected UnknownGeneratorError"
    except UnknownGeneratorError as e:
        assert 'voronoi' in str(e)

    try:
        sample_kernel(KernelGeneratorSpec(generator='levy'), 0)
        assert False, "expected UnknownGeneratorError"
    except UnknownGeneratorError:
        pass

    print("✓ unknown generator test passed")


def test_kernel_bounds_rejected():
    """Kernel parameters outside their ranges raise KernelValidationError."""
    print("Testing kernel parameter checks...")

    for spec in (KernelGeneratorSpec(alpha=1.5),
                 KernelGeneratorSpec(alpha=0.5, intensity_range=(0.1, 1.0)),
                 KernelGeneratorSpec(d=1, alpha=0.5, singularity=3.0)):
        try:
            sample_kernel(spec, 0)
            assert False, f"expected KernelValidationError for {spec}"
        except KernelValidationError:
            pass

    print("✓ kernel parameter check test passed")


def test_time_modulation():
    """mu is 1-periodic, equals the floor at integers and 1 at half-integers."""
    print("Testing time modulation...")

    mu = TimeModulation(0.5)
    assert mu(0.0) == 0.5
    assert abs(mu(0.5) - 1.0) < 1e-15
    assert abs(mu(0.25) - mu(1.25)) < 1e-12
    assert TimeModulation(1.0)(0.37) == 1.0

    print("✓ time modulation test passed")


def test_shift_medium_identity():
    """Coefficients of the shifted medium at x equal those of the medium at x + y."""
    print("Testing shift_medium...")

    m = sample_medium(MediumSpec(generator='checkerboard', d=2, diffusion_range=(1.0, 2.0)), 3)
    y = np.array([1.25, -0.5])
    x = np.random.default_rng(0).uniform(-5.0, 5.0, size=(50, 2))
    shifted = eval_coeffs(shift_medium(m, y), 0.4, x)
    direct = eval_coeffs(m, 0.4, x + y)
    for a, b in zip(shifted, direct):
        assert np.array_equal(a, b)

    print("✓ shift_medium test passed")


def test_validate_medium_checkerboard():
    """A modulated checkerboard medium passes ellipticity, periodicity and stationarity."""
    print("Testing validate_medium on a checkerboard...")

    spec = MediumSpec(generator='checkerboard', d=2, diffusion_range=(1.0, 2.0), cross_ratio=0.5,
                      drift_max=0.3, fu0_range=(1.0, 2.0), modulation_floor=0.5)
    report = validate_medium(sample_medium(spec, 11), count=500, seed=1)
    assert report.passed, report.failures()
    assert report.check('periodicity').worst <= 1e-12

    print("✓ validate_medium test passed")


def test_drift_bound():
    """With lam = 1 and fu0 = 1, b = (1.9, 0) passes and b = (2, 0) fails (strict inequality)."""
    print("Testing drift bound...")

    assert validate_drift_bound(_homogeneous(d=2, drift=(1.9, 0.0)))
    assert not validate_drift_bound(_homogeneous(d=2, drift=(2.0, 0.0)))
    samples = default_tx_samples(2, 100, seed=0)
    assert validate_drift_bound(_homogeneous(d=2, drift=(1.9, 0.0)), samples)

    print("✓ drift bound test passed")


def test_validate_kpp_profiles():
    """Fisher and the surrogate pass; the degenerate profile fails the linearization."""
    print("Testing validate_kpp...")

    u = default_u_samples()
    tx = default_tx_samples(1, 200, seed=0)
    rate = ConstantField(1.0)

    fisher = validate_kpp(ReactionSpec(rate=rate, profile_name='fisher'), u, tx)
    assert fisher.passed, fisher.failures()

    surrogate = validate_kpp(kpp_surrogate(ReactionSpec(rate=rate)), u, tx)
    assert surrogate.passed, surrogate.failures()

    degenerate = validate_kpp(ReactionSpec(rate=rate, profile_name='degenerate'), u, tx)
    assert not degenerate.passed
    assert 'linearization' in degenerate.failures()

    print("✓ validate_kpp test passed")


def test_small_rate_is_positive():
    """A small but positive fu0 passes the rate check; fu0 = 0 fails it."""
    print("Testing rate positivity...")

    u = default_u_samples()
    tx = default_tx_samples(1, 200, seed=0)

    slow = validate_kpp(ReactionSpec(rate=ConstantField(1e-4)), u, tx)
    assert slow.check('rate_positive').passed
    assert slow.passed, slow.failures()

    dead = validate_kpp(ReactionSpec(rate=ConstantField(0.0)), u, tx)
    assert dead.failures() == ['rate_positive']

    print("✓ rate positivity test passed")


def test_validate_kpp_rejects_bad_samples():
    """Samples outside [0, 1] raise MalformedProfileError."""
    print("Testing validate_kpp sample checks...")

    r = ReactionSpec(rate=ConstantField(1.0))
    try:
        validate_kpp(r, [0.5, 1.5], default_tx_samples(1, 10))
        assert False, "expected MalformedProfileError"
    except MalformedProfileError:
        pass

    print("✓ validate_kpp sample check test passed")


def test_validate_kernel():
    """The default radial kernel is even and within its two-sided bounds."""
    print("Testing validate_kernel...")

    k = sample_kernel(KernelGeneratorSpec(generator='radial', d=1, alpha=0.5), 0)
    report = validate_kernel(k, default_kernel_samples(k, 300, seed=2))
    assert report.passed, report.failures()

    # a kernel whose envelope vanishes near 0 breaks the lower envelope bound
    broken = KernelSpec(d=1, alpha=0.5, envelope_fn=lambda r: np.zeros_like(r))
    report = validate_kernel(broken, default_kernel_samples(broken, 300, seed=2))
    assert 'envelope' in report.failures()

    print("✓ validate_kernel test passed")


def main():
    """Run all tests."""
    print("Starting medium module tests...\n")

    try:
        test_eval_coeffs_homogeneous()
        test_sample_medium_is_reproducible()
        test_unknown_generator()
        test_kernel_bounds_rejected()
        test_time_modulation()
        test_shift_medium_identity()
        test_validate_medium_checkerboard()
        test_drift_bound()
        test_validate_kpp_profiles()
        test_small_rate_is_positive()
        test_validate_kpp_rejects_bad_samples()
        test_validate_kernel()

        print("\n🎉 All tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
