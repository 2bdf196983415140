#!/usr/bin/env python3
"""
Test script for the experiments module.
"""
import sys
import os
from unittest.mock import Mock

import numpy as np

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.errors import CubeCapExceededError, ShapeError
from common.logger import Logger
from experiments.hair_trigger import hair_trigger_campaign, hair_trigger_time
from experiments.homogenization import SweepRecord, homogenization_sweep, initial_datum, localize
from experiments.virtual_linearity import SandwichReport, cube_decomposition, sizing_radius, virtual_linearity_check
from geometry.regions import RegionSpec
from geometry.shapes import ConvexShape
from medium.generators import MediumSpec, sample_medium
from solver.grid import Field, Grid
from solver.solver import LocalModel


def _homogeneous(d=1, seed=0):
    return sample_medium(MediumSpec(generator='homogeneous', d=d), seed=seed)


def test_hair_trigger_ordering():
    """A larger initial level never takes longer to fill B_1."""
    print("Testing hair-trigger times...")

    m = _homogeneous()
    slow = hair_trigger_time(m, 0.1, 0.1, horizon=30, h=0.1, radius=30.0)
    fast = hair_trigger_time(m, 0.9, 0.1, horizon=30, h=0.1, radius=30.0)
    assert 0.0 <= fast <= slow <= 30.0
    assert hair_trigger_time(m, 1.0, 0.1) == 0.0

    try:
        hair_trigger_time(m, 0.0, 0.1)
        assert False, "expected ValueError"
    except ValueError:
        pass

    print("✓ hair-trigger time test passed")


def test_hair_trigger_campaign():
    """Identical media give identical times and a zero spread."""
    print("Testing hair-trigger campaign...")

    logger = Mock(spec=Logger)
    media = [_homogeneous(seed=0), _homogeneous(seed=1)]
    campaign = hair_trigger_campaign(media, 0.5, 0.1, max_workers=2, logger=logger, horizon=30, h=0.1, radius=20.0)
    assert not campaign.failures
    assert campaign.seeds == [0, 1]
    assert campaign.times[0] == campaign.times[1]
    assert campaign.spread == 0.0
    assert campaign.uniform_time == campaign.times[0]
    assert logger.success.called

    print("✓ hair-trigger campaign test passed")


def _block_datum(radius=60.0):
    grid = Grid.centered(1, 0.1, radius)
    x = grid.points()[..., 0]
    return Field.indicator(grid, np.abs(x) < 1.45, 0.5)


def test_cube_decomposition():
    """Pieces are keyed by the unit cube holding each cell center and cover the datum."""
    print("Testing cube decomposition...")

    u0 = _block_datum(5.0)
    pieces = cube_decomposition(u0)
    assert [n for n, _ in pieces] == [(-2,), (-1,), (0,), (1,)]
    rebuilt = np.max(np.stack([piece.values for _, piece in pieces]), axis=0)
    assert np.array_equal(rebuilt, u0.values)

    try:
        cube_decomposition(u0, cap=2)
        assert False, "expected CubeCapExceededError"
    except CubeCapExceededError:
        pass

    print("✓ cube decomposition test passed")


def test_sandwich_report():
    """phi is the depth of the worse margin; tau_delta is the first time both margins hold."""
    print("Testing sandwich report...")

    report = SandwichReport(times=[1.0, 2.0, 4.0], delta=0.2, left_margins=[-0.3, -0.05, 0.0],
                            right_margins=[0.1, -0.1, -0.001])
    assert report.phi == [0.3, 0.1, 0.001]
    assert report.tau_delta() == 4.0
    assert report.tau_delta(tolerance=0.2) == 2.0
    assert report.phi_nonincreasing()
    assert report.to_rows()[0] == [1.0, -0.3, 0.1, 0.3]

    print("✓ sandwich report test passed")


def test_virtual_linearity_sandwich():
    """In a homogeneous medium the surrogate pieces sandwich u at late times."""
    print("Testing virtual linearity...")

    m = _homogeneous()
    radius = sizing_radius(1.5, LocalModel(m), 16.0 * 1.2, 0.1)
    assert abs(radius - (1.5 + 2.0 * 19.2 + 20.0)) < 1e-9
    u0 = _block_datum(radius)
    logger = Mock(spec=Logger)
    report = virtual_linearity_check(u0, m, [4.0, 8.0, 16.0], 0.2, max_workers=2, logger=logger)
    assert report.pieces == 4
    assert len(report.phi) == 3
    assert report.phi[-1] < 0.05, report.phi
    assert logger.success.called

    try:
        virtual_linearity_check(u0, m, [4.0], 0.6)
        assert False, "expected ValueError"
    except ValueError:
        pass

    print("✓ virtual linearity test passed")


def test_initial_datum_and_localize():
    """theta on the eroded region, theta/2 on the collar; half-spaces are clipped."""
    print("Testing sweep data...")

    grid = Grid.centered(1, 0.1, 5.0)
    box = RegionSpec(kind='box', d=1, lo=(-2.0,), hi=(2.0,))
    u0 = initial_datum(grid, box, 0.5, 0.5, 1.0, [0.0])
    assert u0.at([1.0]) == 0.5
    assert u0.at([2.2]) == 0.25
    assert u0.at([3.0]) == 0.0

    half = RegionSpec(kind='halfspace', d=1, normal=(1.0,), level=0.0)
    assert localize(half, 2.0, 1.0).bounding_radius() == 6.0
    assert localize(box, 2.0, 1.0) is box

    print("✓ sweep data test passed")


def test_sweep_record_trend():
    """The nonstrict trend tolerates the noise floor; the strict one does not."""
    print("Testing sweep record...")

    record = SweepRecord(eps=[1.0, 0.5, 0.25], rho=[1.0, 0.5, 0.25], shifts=[], theta=0.5, band=0.1,
                         thresholds=(0.1, 0.9), obs_times=[1.0], region={}, shape={},
                         measures=[[4.0], [4.2], [1.0]], collars=[1.0, 0.5, 0.25])
    assert record.trend() == [4.0, 4.2, 1.0]
    assert record.decreasing()
    assert not record.decreasing(strict=True)
    assert not record.decreasing(noise_floor=0.0)
    assert len(record.to_rows()) == 3
    assert record.to_rows()[1][5] == ''

    print("✓ sweep record test passed")


def test_homogenization_sweep():
    """The mixed zone of an interval shrinks as eps goes to 0."""
    print("Testing homogenization sweep...")

    G = RegionSpec(kind='box', d=1, lo=(-1.0,), hi=(1.0,))
    S = ConvexShape.ball(1, 2.0)
    logger = Mock(spec=Logger)
    record = homogenization_sweep(G, 0.5, [1.0, 0.5, 0.25], _homogeneous(), S, [1.0], h=0.1,
                                  max_workers=3, logger=logger)
    assert len(record.measures) == 3 and len(record.collars) == 3
    assert record.measures[-1][0] < record.measures[0][0]
    assert record.decreasing()
    assert record.interfaces == []

    try:
        homogenization_sweep(G, 0.5, [0.5, 1.0], _homogeneous(), S, [1.0])
        assert False, "expected ValueError"
    except ValueError:
        pass

    half = RegionSpec(kind='halfspace', d=1, normal=(1.0,), level=0.0)
    try:
        homogenization_sweep(half, 0.5, [1.0], _homogeneous(), S, [1.0])
        assert False, "expected ShapeError"
    except ShapeError:
        pass

    try:
        homogenization_sweep(G, 0.5, [1.0], _homogeneous(), ConvexShape.ball(2, 1.0, 16), [1.0])
        assert False, "expected ShapeError"
    except ShapeError:
        pass

    print("✓ homogenization sweep test passed")


def main():
    """Run all tests."""
    print("Starting experiments module tests...\n")

    try:
        test_hair_trigger_ordering()
        test_hair_trigger_campaign()
        test_cube_decomposition()
        test_sandwich_report()
        test_virtual_linearity_sandwich()
        test_initial_datum_and_localize()
        test_sweep_record_trend()
        test_homogenization_sweep()

        print("\n🎉 All tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
