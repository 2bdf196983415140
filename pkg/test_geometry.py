#!/usr/bin/env python3
"""
Test script for the geometry module.
"""
import sys
import os
import math

import numpy as np

# Add the project root to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from common.errors import ShapeError
from geometry.mixed_zone import mixed_zone, mixed_zone_cells
from geometry.regions import RegionSpec, collar_measure, dilate, erode, minkowski_sum
from geometry.shapes import ConvexShape, direction_grid, hausdorff, shape_from_speeds, support_function
from solver.grid import Field, Grid


def _square_radial(e):
    return 1.0 / np.max(np.abs(e), axis=-1)


def test_support_function_of_square():
    """The unit square [-1, 1]^2 has support sqrt(2) along the diagonal."""
    print("Testing support function...")

    square = ConvexShape.from_radial(2, _square_radial, 32)
    assert abs(support_function(square, [1.0, 1.0]) - math.sqrt(2.0)) < 1e-12
    assert abs(support_function(square, [1.0, 0.0]) - 1.0) < 1e-12
    assert square.convexity_defect() <= 1e-12

    print("✓ support function test passed")


def test_ball_hausdorff():
    """An inscribed 64-gon sits within 2 (1 - cos(pi/64)) of the radius-2 ball."""
    print("Testing Hausdorff distance...")

    shape = ConvexShape.ball(2, 2.0, 64)
    gap = hausdorff(shape, lambda e: np.full(e.shape[0], 2.0))
    assert gap <= 2.0 * (1.0 - math.cos(math.pi / 64)) + 1e-12
    assert gap > 0.0
    assert hausdorff(shape, shape) == 0.0
    assert shape.bracket_gap() < 0.05
    assert shape.bracket_gap() > 0.0

    print("✓ Hausdorff distance test passed")


def test_outer_model_contains_inner():
    """The outer model contains the inner polygon and the true disc."""
    print("Testing shape models...")

    shape = ConvexShape.ball(2, 2.0, 32)
    angles = np.linspace(0.0, 2.0 * math.pi, 200, endpoint=False)
    circle = 1.999 * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    assert np.all(shape.contains_outer(circle))
    assert not np.all(shape.contains_inner(circle))
    assert np.all(shape.contains_outer(shape.vertices * 0.999))

    print("✓ shape model test passed")


def test_convexity_defect():
    """Doubling one sample of a ball pushes its neighbours strictly inside the hull and steepens it."""
    print("Testing convexity defect...")

    values = np.ones(32)
    values[0] = 2.0
    shape = ConvexShape(d=2, directions=direction_grid(2, 32), support_values=values)
    assert shape.convexity_defect() > 0.0
    assert ConvexShape.ball(2, 1.0, 32).convexity_defect() <= 1e-12
    assert ConvexShape.ball(2, 1.0, 32).lipschitz_constant() == 0.0
    assert abs(shape.lipschitz_constant() - 1.0 / (2.0 * math.sin(math.pi / 32))) < 1e-9
    assert ConvexShape.ball(1, 1.0).convexity_defect() == 0.0

    print("✓ convexity defect test passed")


def test_shape_from_speeds_errors():
    """Nonpositive speeds and half-open direction sets are rejected."""
    print("Testing shape_from_speeds...")

    shape = shape_from_speeds([([1.0], 2.0), ([-1.0], 1.5)])
    assert shape.d == 1
    assert abs(shape.support(np.array([-1.0])) - 1.5) < 1e-15

    try:
        shape_from_speeds([([1.0], 2.0), ([-1.0], 0.0)])
        assert False, "expected ShapeError"
    except ShapeError:
        pass

    try:
        shape_from_speeds([([1.0, 0.0], 1.0), ([0.0, 1.0], 1.0)])
        assert False, "expected ShapeError"
    except ShapeError as e:
        assert 'gap' in str(e)

    print("✓ shape_from_speeds test passed")


def test_support_function_brackets_ball():
    """Between samples the inner support of a sampled ball is r cos(pi/n); the outer one is at least r."""
    print("Testing support function bias...")

    shape = ConvexShape.ball(2, 2.0, 32)
    mid = [math.cos(math.pi / 32), math.sin(math.pi / 32)]
    assert abs(support_function(shape, mid) - 2.0 * math.cos(math.pi / 32)) < 1e-12
    assert abs(support_function(shape, [1.0, 0.0]) - 2.0) < 1e-12
    assert support_function(shape, mid, model='outer') >= 2.0 - 1e-12
    try:
        support_function(shape, mid, model='hull')
        assert False, "expected ShapeError"
    except ShapeError:
        pass

    six = [((math.cos(a), math.sin(a)), 1.0) for a in np.arange(6) * math.pi / 3]
    try:
        shape_from_speeds(six)
        assert False, "expected ShapeError"
    except ShapeError as e:
        assert 'allowed' in str(e)
    assert shape_from_speeds(six, max_gap=math.pi / 2).d == 2
    assert shape_from_speeds(((tuple(e), 1.0) for e in direction_grid(2, 8))).d == 2

    print("✓ support function bias test passed")


def test_region_validation():
    """Unknown kinds and inverted boxes raise ShapeError."""
    print("Testing region validation...")

    for bad in ({'kind': 'torus'}, {'kind': 'box', 'lo': [1.0], 'hi': [0.0]}):
        try:
            RegionSpec.from_dict(bad, 1)
            assert False, f"expected ShapeError for {bad}"
        except ShapeError:
            pass

    half = RegionSpec.from_dict({'kind': 'halfspace', 'normal': [3.0, 4.0], 'level': 1.0}, 2)
    assert abs(half.normal[0] - 0.6) < 1e-15 and abs(half.normal[1] - 0.8) < 1e-15
    assert not half.bounded
    assert half.clipped(5.0).bounding_radius() == 5.0

    print("✓ region validation test passed")


def test_erode_and_dilate():
    """Offsets move the boundary of a box by exactly r."""
    print("Testing erosion and dilation...")

    box = RegionSpec(kind='box', d=2, lo=(-1.0, -1.0), hi=(1.0, 1.0))
    inner = erode(box, 0.5)
    outer = dilate(box, 0.5)
    assert inner.contains(np.array([0.4, 0.0]))
    assert not inner.contains(np.array([0.6, 0.0]))
    assert outer.contains(np.array([1.4, 0.0]))
    assert not outer.contains(np.array([1.6, 0.0]))
    assert outer.contains(np.array([1.3, 1.3]))
    assert not outer.contains(np.array([1.4, 1.4]))

    try:
        erode(box, -1.0)
        assert False, "expected ValueError"
    except ValueError:
        pass

    print("✓ erosion and dilation test passed")


def test_union_signed_distance():
    """A union of boxes measures distance to the nearest member."""
    print("Testing union regions...")

    union = RegionSpec(kind='union', d=1, boxes=(((-3.0,), (-1.0,)), ((1.0,), (3.0,))))
    sd = union.signed_distance(np.array([[0.0], [2.0], [5.0]]))
    assert np.allclose(sd, [1.0, -1.0, 2.0])

    print("✓ union region test passed")


def test_minkowski_slices():
    """Slices of boxes, half-spaces and box complements grow by t S."""
    print("Testing Minkowski slices...")

    # box (-1, 1) + 1 * [-2, 2]
    box = RegionSpec(kind='box', d=1, lo=(-1.0,), hi=(1.0,))
    slice_ = minkowski_sum(box, ConvexShape.ball(1, 2.0), 1.0)
    assert np.array_equal(slice_.contains(np.array([[2.9], [-2.9], [3.1], [-3.1]])), [True, True, False, False])

    # half-space x . e < 0 slides to x . e < t h(e)
    S = ConvexShape.ball(2, 1.5, 32)
    half = RegionSpec(kind='halfspace', d=2, normal=(1.0, 0.0), level=0.0)
    slice_ = minkowski_sum(half, S, 2.0)
    rng = np.random.default_rng(0)
    x = rng.uniform(-10.0, 10.0, size=(500, 2))
    assert np.array_equal(slice_.contains(x), x[:, 0] < 2.0 * 1.5)

    # the hole of a box complement shrinks
    hole = RegionSpec(kind='complement_box', d=2, lo=(-5.0, -5.0), hi=(5.0, 5.0))
    slice_ = minkowski_sum(hole, ConvexShape.ball(2, 1.0, 32), 1.0)
    assert slice_.contains(np.array([4.5, 0.0]))
    assert not slice_.contains(np.array([3.5, 0.0]))

    # t = 0 is G itself
    ball = RegionSpec(kind='ball', d=2, radius=1.0)
    assert np.array_equal(minkowski_sum(ball, S, 0.0).signed_distance(x), ball.signed_distance(x))

    try:
        minkowski_sum(box, S, 1.0)
        assert False, "expected ShapeError"
    except ShapeError:
        pass

    print("✓ Minkowski slice test passed")


def test_collar_measure():
    """The r-collar of an interval has measure 4 r."""
    print("Testing collar measure...")

    grid = Grid.centered(1, 0.01, 3.0)
    box = RegionSpec(kind='box', d=1, lo=(-1.0,), hi=(1.0,))
    measure = collar_measure(box, 0.25, grid.points(), grid.cell_volume)
    assert abs(measure - 1.0) <= 0.03

    print("✓ collar measure test passed")


def test_mixed_zone_at_time_zero():
    """A high indicator matches its own region; a low one fails on the whole eroded region."""
    print("Testing mixed zone...")

    grid = Grid.centered(2, 0.1, 4.0)
    G = RegionSpec(kind='ball', d=2, radius=2.0)
    S = ConvexShape.ball(2, 1.0, 32)
    points = grid.points()

    high = Field.indicator(grid, G.contains(points), 0.95)
    assert mixed_zone(high, G, S, 0.0, band=0.1) <= collar_measure(G, 0.1, points, grid.cell_volume)

    low = Field.indicator(grid, G.contains(points), 0.5)
    zone = mixed_zone_cells(low, G, S, 0.0, band=0.1)
    assert zone.outside_cells == 0
    assert abs(zone.measure - math.pi * 1.9 ** 2) < 0.05 * math.pi * 1.9 ** 2

    try:
        mixed_zone(high, G, S, 0.0, thresholds=(0.9, 0.1))
        assert False, "expected ValueError"
    except ValueError:
        pass

    print("✓ mixed zone test passed")


def main():
    """Run all tests."""
    print("Starting geometry module tests...\n")

    try:
        test_support_function_of_square()
        test_ball_hausdorff()
        test_outer_model_contains_inner()
        test_convexity_defect()
        test_shape_from_speeds_errors()
        test_support_function_brackets_ball()
        test_region_validation()
        test_erode_and_dilate()
        test_union_signed_distance()
        test_minkowski_slices()
        test_collar_measure()
        test_mixed_zone_at_time_zero()

        print("\n🎉 All tests passed!")

    except Exception as e:
        print(f"\n❌ Test failed with error: {e}")
        import traceback
        traceback.print_exc()


if __name__ == "__main__":
    main()
