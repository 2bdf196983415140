#!/usr/bin/env python3
"""
Test script for the solver module.
"""
import sys
import os
import json
import math
from pathlib import Path
import tempfile

import numpy as np

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.config import CONFIG
from common.errors import CFLViolationError, DomainTooSmallError, KernelValidationError
from common.utils import provenance
from medium.generators import KernelGeneratorSpec, MediumSpec, sample_kernel, sample_medium
from medium.medium import ConstantField, KernelSpec, ReactionSpec, kpp_surrogate
from solver.grid import Field, Grid
from solver.snapshots import read_snapshot, write_snapshot
from solver.solver import (
    LocalModel, NonlocalModel, richardson_in_h, solve, spreading_bound, supersolution_check,
    truncation_margin, truncation_radius,
)
from solver.stepper import NonlocalOperator, cfl_dt, step_local, step_nonlocal
from wulff.speed import front_speed_direct


def _homogeneous(d=1):
    return sample_medium(MediumSpec(generator='homogeneous', d=d), seed=0)


def test_cfl_dt():
    """A = 1, b = 0, fu0 = 1, h = 0.1 in d = 1 gives dt = 1/201."""
    print("Testing cfl_dt...")

    dt = cfl_dt(Grid.centered(1, 0.1, 5.0), _homogeneous())
    assert abs(dt - 1.0 / 201.0) < 1e-12

    print("✓ cfl_dt test passed")


def test_step_rejects_large_dt():
    """A step far beyond the CFL bound raises CFLViolationError."""
    print("Testing CFL enforcement...")

    grid = Grid.centered(1, 0.1, 5.0)
    try:
        step_local(Field.ball(grid, [0.0]), _homogeneous(), 1.0)
        assert False, "expected CFLViolationError"
    except CFLViolationError:
        pass

    print("✓ CFL enforcement test passed")


def _checkerboard(d, seed):
    return sample_medium(MediumSpec(generator='checkerboard', d=d, diffusion_range=(1.0, 2.0),
                                    cross_ratio=0.5 if d == 2 else 0.0, drift_max=0.3, fu0_range=(1.0, 2.0),
                                    modulation_floor=0.5), seed)


def _random_kernel(d, seed):
    return sample_kernel(KernelGeneratorSpec(generator='checkerboard-kernel', d=d, alpha=0.8,
                                             intensity_range=(0.85, 1.2), modulation_floor=0.5), seed)


def _steps_for(model, grid, count):
    """A final time that forces at least `count` steps at the default CFL fraction."""
    return count * model.operator(grid).dt_max() * CONFIG['solver']['cfl_safety']


def test_constant_states_are_fixed():
    """u = 0 and u = 1 stay exactly 0 and 1 for 10^4 steps of both steppers, with f and with f'."""
    print("Testing fixed points...")

    grid = Grid.centered(2, 0.25, 3.0)
    m = sample_medium(MediumSpec(generator='checkerboard', d=2, diffusion_range=(1.0, 2.0), drift_max=0.3), 5)
    for level in (0.0, 1.0):
        result = solve(Field.constant(grid, level), LocalModel(m), 2.0)
        assert np.all(result.field.values == level)

    line = Grid.centered(1, 0.1, 2.0)
    m = _checkerboard(1, 5)
    kernel = KernelSpec(d=1, alpha=1.0)
    models = [
        LocalModel(m),
        LocalModel(m, kpp_surrogate(m.reaction)),
        NonlocalModel(kernel, m.reaction),
        NonlocalModel(kernel, kpp_surrogate(m.reaction)),
    ]
    for model in models:
        T = _steps_for(model, line, 10000)
        for level in (0.0, 1.0):
            result = solve(Field.constant(line, level), model, T)
            assert result.steps >= 10000, result.steps
            assert np.all(result.field.values == level), (type(model).__name__, level)

    print("✓ fixed point test passed")


def _ordered_pair(grid, rng):
    low = rng.uniform(0.0, 0.5, size=grid.shape) * (rng.uniform(size=grid.shape) < 0.7)
    high = np.minimum(low + rng.uniform(0.0, 0.5, size=grid.shape) * (rng.uniform(size=grid.shape) < 0.5), 1.0)
    return Field(grid, low), Field(grid, high)


def _assert_ordered(model, u0, v0, times):
    u = solve(u0, model, times[-1], observers=times)
    v = solve(v0, model, times[-1], observers=times)
    assert len(u.observations) == len(times)
    for a, b in zip(u.observations, v.observations):
        assert np.min(b.field.values - a.field.values) >= -1e-12
        assert a.field.values.min() >= -1e-12 and b.field.values.max() <= 1.0 + 1e-12


def test_comparison_principle():
    """Random ordered pairs in random checkerboard media stay ordered at every observation."""
    print("Testing comparison principle (local stepper)...")

    rng = np.random.default_rng(4)
    plane, line = Grid.centered(2, 0.25, 3.0), Grid.centered(1, 0.1, 4.0)
    for k in range(50):
        d = 1 + k % 2
        grid = line if d == 1 else plane
        u0, v0 = _ordered_pair(grid, rng)
        _assert_ordered(LocalModel(_checkerboard(d, 100 + k)), u0, v0, [0.25, 0.5, 1.0])

    print("✓ comparison principle test passed")


def test_comparison_principle_nonlocal():
    """The nonlocal stepper keeps random ordered pairs ordered under random intensity fields."""
    print("Testing comparison principle (nonlocal stepper)...")

    rng = np.random.default_rng(5)
    line, plane = Grid.centered(1, 0.1, 4.0), Grid.centered(2, 0.5, 3.0)
    for k in range(40):
        d = 2 if k % 4 == 3 else 1
        grid = line if d == 1 else plane
        model = NonlocalModel(_random_kernel(d, 200 + k), _checkerboard(d, 300 + k).reaction)
        u0, v0 = _ordered_pair(grid, rng)
        _assert_ordered(model, u0, v0, [0.5, 1.0])

    print("✓ nonlocal comparison principle test passed")


def test_kernel_failing_bounds_is_not_stepped():
    """A kernel behaving like |nu|^(-d-3) near 0 is refused by the nonlocal stepper."""
    print("Testing nonlocal kernel gate...")

    grid = Grid.centered(1, 0.1, 5.0)
    kernel = KernelSpec(d=1, alpha=1.0, radial=lambda r: np.maximum(r ** -4.0, np.exp(-r)))
    reaction = ReactionSpec(rate=ConstantField(1.0))
    try:
        step_nonlocal(Field.ball(grid, [0.0]), kernel, reaction, 1e-3)
        assert False, "expected KernelValidationError"
    except KernelValidationError as e:
        assert 'upper_bound' in str(e)

    try:
        solve(Field.ball(grid, [0.0]), NonlocalModel(kernel, reaction), 1.0)
        assert False, "expected KernelValidationError"
    except KernelValidationError:
        pass

    print("✓ nonlocal kernel gate test passed")


def test_nonlocal_speed_is_bounded():
    """Half-space data under a homogeneous kernel move at a finite speed below the exponential supersolution speed."""
    print("Testing nonlocal front speed...")

    model = NonlocalModel(KernelSpec(d=1, alpha=1.0), ReactionSpec(rate=ConstantField(1.0)))
    front = front_speed_direct(model, [1.0], T=20.0, h=0.2)
    bound = spreading_bound(model, 0.2)
    assert math.isfinite(front.speed) and front.speed > 0.0
    assert front.speed <= bound, (front.speed, bound)

    print("✓ nonlocal front speed test passed")


def test_solve_lands_on_observers():
    """Observations sit exactly at the requested times; T = t0 returns the datum."""
    print("Testing solve breakpoints...")

    grid = Grid.centered(1, 0.1, 20.0)
    u0 = Field.ball(grid, [0.0])
    result = solve(u0, LocalModel(_homogeneous()), 3.0, observers=[0.5, (2.25, 'late')])
    assert [obs.time for obs in result.observations] == [0.5, 2.25]
    assert result.at('late').time == 2.25
    assert result.field.time == 3.0
    assert not result.observations[0].field.values.flags.writeable

    same = solve(u0, LocalModel(_homogeneous()), 0.0)
    assert same.field is u0
    assert same.steps == 0

    print("✓ solve breakpoint test passed")


def test_restart_matches_single_solve():
    """Solving to T in one call equals solving to T/2 and restarting."""
    print("Testing restart determinism...")

    grid = Grid.centered(1, 0.1, 20.0)
    model = LocalModel(_homogeneous())
    u0 = Field.ball(grid, [0.0])
    whole = solve(u0, model, 2.0).field
    half = solve(u0, model, 1.0).field
    rest = solve(half, model, 2.0).field
    assert np.array_equal(whole.values, rest.values)

    print("✓ restart determinism test passed")


def test_stop_when_ends_at_integer_time():
    """stop_when runs at integer times and can end the solve early."""
    print("Testing stop_when...")

    grid = Grid.centered(1, 0.1, 20.0)
    seen = []

    def stop_at_two(u):
        seen.append(u.time)
        return u.time >= 2.0

    result = solve(Field.ball(grid, [0.0]), LocalModel(_homogeneous()), 5.0, observers=[1.5], stop_when=stop_at_two)
    assert result.stopped_at == 2.0
    assert seen == [0.0, 1.0, 2.0]
    assert result.field.time == 2.0

    print("✓ stop_when test passed")


def test_domain_too_small():
    """Activity reaching the edge of a small grid raises DomainTooSmallError."""
    print("Testing boundary monitor...")

    grid = Grid.centered(1, 0.1, 2.0)
    try:
        solve(Field.ball(grid, [0.0]), LocalModel(_homogeneous()), 5.0, boundary_tolerance=1e-6)
        assert False, "expected DomainTooSmallError"
    except DomainTooSmallError:
        pass

    print("✓ boundary monitor test passed")


def test_hair_trigger_at_origin():
    """Half a unit ball of mass in a homogeneous medium fills in near the origin."""
    print("Testing long-run invasion...")

    grid = Grid.centered(1, 0.1, 40.0)
    result = solve(Field.ball(grid, [0.0]), LocalModel(_homogeneous()), 15.0)
    assert result.field.at([0.0]) > 0.99

    print("✓ long-run invasion test passed")


def test_truncation_radius():
    """a = 7 for gamma = 1, d = 2; the margin is 8 ln 10."""
    print("Testing truncation radius...")

    m = _homogeneous(d=2)
    assert m.supersolution_speed() == 7.0
    assert _homogeneous(d=1).supersolution_speed() == 3.0
    assert abs(truncation_margin() - 8.0 * np.log(10.0)) < 1e-12
    assert abs(truncation_radius(1.0, 10.0, m) - (71.0 + 8.0 * np.log(10.0))) < 1e-9
    assert abs(spreading_bound(LocalModel(_homogeneous())) - 2.0) < 1e-12

    print("✓ truncation radius test passed")


def test_supersolution_check():
    """The moving exponential bounds the solution; a fourfold reaction breaks the bound."""
    print("Testing supersolution check...")

    grid = Grid.centered(1, 0.1, 60.0)
    m = _homogeneous()
    a = m.supersolution_speed()
    u0 = Field.ball(grid, [0.0])
    x0 = [1.1]
    times = [float(t) for t in range(11)]

    assert supersolution_check([Field.constant(grid, 0.0)], [1.0], x0, a)

    normal = solve(u0, LocalModel(m), 10.0, observers=times)
    assert supersolution_check(normal.trajectory(), [1.0], x0, a)

    boosted = solve(u0, LocalModel(m, reaction_scale=4.0), 10.0, observers=times)
    assert not supersolution_check(boosted.trajectory(), [1.0], x0, a)

    print("✓ supersolution check test passed")


def test_nonlocal_step_without_reaction():
    """With f = 0 one nonlocal step neither raises the max nor lowers the min."""
    print("Testing nonlocal stepper...")

    grid = Grid.centered(1, 0.1, 10.0)
    rng = np.random.default_rng(1)
    values = rng.uniform(0.0, 1.0, size=grid.shape)
    values[0] = values[-1] = 0.0
    u = Field(grid, values)
    model = NonlocalModel(KernelSpec(d=1, alpha=0.5), ReactionSpec(rate=ConstantField(0.0)))
    op = NonlocalOperator(grid, model.kernel, model.reaction)
    new = op.step(u, 0.9 * op.dt_max())
    assert new.values.max() <= values.max() + 1e-14
    assert new.values.min() >= values.min() - 1e-14

    zero = solve(Field.constant(grid, 0.0), model, 1.0)
    assert np.all(zero.field.values == 0.0)

    print("✓ nonlocal stepper test passed")


def test_richardson_in_h():
    """A value linear in h extrapolates to its intercept."""
    print("Testing Richardson extrapolation...")

    assert abs(richardson_in_h([0.2, 0.1], [2.2, 2.1]) - 2.0) < 1e-12
    try:
        richardson_in_h([0.1], [2.0])
        assert False, "expected ValueError"
    except ValueError:
        pass

    print("✓ Richardson extrapolation test passed")


def test_snapshot_dump():
    """Snapshots write a CSV plus a JSON sidecar and read back exactly."""
    print("Testing snapshot dump...")

    with tempfile.TemporaryDirectory() as temp_dir:
        temp_path = Path(temp_dir)
        grid = Grid.centered(2, 0.5, 1.0)
        u = Field(grid, np.random.default_rng(0).uniform(0.0, 1.0, size=grid.shape), time=1.5)
        csv_path, json_path = write_snapshot(u, temp_path, 'snapshot_t1p5', provenance('abc', 3))
        sidecar = json.loads(json_path.read_text())
        assert sidecar['seed'] == 3 and sidecar['config_hash'] == 'abc'
        assert csv_path.read_text().splitlines()[1] == 'i,j,x,y,u'
        back = read_snapshot(csv_path, sidecar)
        assert np.array_equal(back.values, u.values)
        assert back.time == 1.5

    print("✓ snapshot dump test passed")


def main():
    """Run all tests."""
    print("Starting solver module tests...\n")

    try:
        test_cfl_dt()
        test_step_rejects_large_dt()
        test_constant_states_are_fixed()
        test_comparison_principle()
        test_comparison_principle_nonlocal()
        test_kernel_failing_bounds_is_not_stepped()
        test_nonlocal_speed_is_bounded()
        test_solve_lands_on_observers()
        test_restart_matches_single_solve()
        test_stop_when_ends_at_integer_time()
        test_domain_too_small()
        test_hair_trigger_at_origin()
        test_truncation_radius()
        test_supersolution_check()
        test_nonlocal_step_without_reaction()
        test_richardson_in_h()
        test_snapshot_dump()

        print("\n🎉 All tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
