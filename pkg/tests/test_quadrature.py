from math import factorial

import numpy as np
import pytest

from cutwave.quadrature import (polygon_area, polygon_centroid,
                                polygon_diameter, polygon_rule, segment_rule,
                                triangle_rule)

UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def random_convex_polygon(rng, k):
    """Convex hull of k points on a random ellipse (angles sorted)."""
    ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=k))
    a, b = rng.uniform(0.3, 1.5, size=2)
    return np.stack([a * np.cos(ang), b * np.sin(ang)], axis=1)


@pytest.mark.parametrize("degree", range(8))
def test_segment_rule_polynomial_exactness(degree):
    p0, p1 = np.array([0.2, -0.3]), np.array([1.1, 0.7])
    pts, wts = segment_rule(p0, p1, degree)
    length = np.hypot(*(p1 - p0))
    # integrate t^k along the segment against the arclength parametrization
    t = np.linalg.norm(pts - p0, axis=1) / length
    for k in range(degree + 1):
        exact = length / (k + 1)
        assert abs(wts @ t ** k - exact) < 1e-13 * length


def test_segment_rule_weights_sum_to_length():
    pts, wts = segment_rule([0.0, 0.0], [3.0, 4.0], 5)
    assert abs(wts.sum() - 5.0) < 1e-13


@pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (2, 3), (4, 4), (5, 2)])
def test_unit_square_monomials(a, b):
    pts, wts = polygon_rule(UNIT_SQUARE, a + b)
    val = wts @ (pts[:, 0] ** a * pts[:, 1] ** b)
    assert abs(val - 1.0 / ((a + 1) * (b + 1))) < 1e-14


@pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (0, 1), (2, 1), (3, 3)])
def test_reference_triangle_monomials(a, b):
    # int_T x^a y^b over {x,y >= 0, x+y <= 1} = a! b! / (a+b+2)!
    pts, wts = triangle_rule([0, 0], [1, 0], [0, 1], a + b)
    exact = factorial(a) * factorial(b) / factorial(a + b + 2)
    assert abs(wts @ (pts[:, 0] ** a * pts[:, 1] ** b) - exact) < 1e-14


def test_triangle_rule_orientation_sign():
    # swapping two vertices flips the signed area and hence the weights
    _, w_ccw = triangle_rule([0, 0], [1, 0], [0, 1], 2)
    _, w_cw = triangle_rule([0, 0], [0, 1], [1, 0], 2)
    assert abs(w_ccw.sum() - 0.5) < 1e-14
    assert abs(w_cw.sum() + 0.5) < 1e-14


def test_random_polygon_weights_match_shoelace():
    rng = np.random.default_rng(7)
    for k in (3, 4, 5, 6, 8):
        poly = random_convex_polygon(rng, k)
        _, wts = polygon_rule(poly, 4)
        assert abs(wts.sum() - polygon_area(poly)) < 1e-13


def test_polygon_rule_degree_exactness():
    """The fan rule must integrate full polynomials, not just along fans."""
    rng = np.random.default_rng(3)
    poly = random_convex_polygon(rng, 6)
    # reference: very high degree rule
    pts_hi, wts_hi = polygon_rule(poly, 20)
    for degree in range(7):
        pts, wts = polygon_rule(poly, degree)
        for a in range(degree + 1):
            b = degree - a
            val = wts @ (pts[:, 0] ** a * pts[:, 1] ** b)
            ref = wts_hi @ (pts_hi[:, 0] ** a * pts_hi[:, 1] ** b)
            assert abs(val - ref) < 1e-13 * max(1.0, abs(ref))


def test_centroid_and_diameter():
    square = UNIT_SQUARE + [2.0, -1.0]
    np.testing.assert_allclose(polygon_centroid(square), [2.5, -0.5],
                               atol=1e-14)
    assert abs(polygon_diameter(square) - np.sqrt(2.0)) < 1e-14


def test_area_positive_for_ccw():
    assert polygon_area(UNIT_SQUARE) == pytest.approx(1.0)
    assert polygon_area(UNIT_SQUARE[::-1]) == pytest.approx(-1.0)
