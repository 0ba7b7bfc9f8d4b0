import numpy as np
import pytest

from cutwave.basis import (build_cell_basis, build_mesh_basis,
                           monomial_exponents, space_dim)
from cutwave.geometry import channel_mesh, rotated_square_mesh
from cutwave.quadrature import polygon_rule


@pytest.mark.parametrize("r,dim", [(0, 1), (1, 3), (2, 6), (3, 10)])
def test_space_dim(r, dim):
    assert space_dim(r) == dim
    assert len(monomial_exponents(r)) == dim


def random_convex_polygon(rng, k, center, size):
    ang = np.sort(rng.uniform(0.0, 2.0 * np.pi, size=k))
    radii = rng.uniform(0.4, 1.0, size=k) * size
    pts = np.stack([radii * np.cos(ang), radii * np.sin(ang)], axis=1)
    hull = pts[_hull_order(pts)]
    return hull + center


def _hull_order(pts):
    from scipy.spatial import ConvexHull
    return ConvexHull(pts).vertices


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_orthonormality_on_random_polygons(r):
    rng = np.random.default_rng(11)
    for _ in range(5):
        poly = random_convex_polygon(rng, 6, rng.uniform(-2, 2, 2),
                                     rng.uniform(0.05, 3.0))
        basis = build_cell_basis(poly, r)
        pts, wts = polygon_rule(poly, 2 * r + 2)
        phi = basis.eval(pts)
        gram = (phi * wts) @ phi.T
        np.testing.assert_allclose(gram, np.eye(space_dim(r)), atol=5e-13)


def test_modal_basis_spans_polynomials():
    """Projecting a degree-r polynomial onto the modes reproduces it."""
    rng = np.random.default_rng(5)
    poly = random_convex_polygon(rng, 5, [0.3, -0.7], 0.8)
    r = 2
    basis = build_cell_basis(poly, r)
    pts, wts = polygon_rule(poly, 2 * r + 2)

    def f(p):
        return 1.7 - 0.3 * p[:, 0] + p[:, 1] ** 2 + 0.25 * p[:, 0] * p[:, 1]

    phi = basis.eval(pts)
    coef = (phi * wts) @ f(pts)
    probe = rng.uniform(poly.min(axis=0), poly.max(axis=0), size=(40, 2))
    np.testing.assert_allclose(coef @ basis.eval(probe), f(probe),
                               atol=1e-12, rtol=1e-12)


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    poly = random_convex_polygon(rng, 6, [0.0, 0.0], 1.0)
    basis = build_cell_basis(poly, 3)
    pts = rng.uniform(-0.3, 0.3, size=(10, 2))
    delta = 1e-6
    g = basis.eval_grad(pts)
    for axis in range(2):
        step = np.zeros(2)
        step[axis] = delta
        fd = (basis.eval(pts + step) - basis.eval(pts - step)) / (2 * delta)
        np.testing.assert_allclose(g[axis], fd, atol=1e-7)


def test_sliver_basis_stays_orthonormal():
    # a 1e-9 relative-area triangle: bbox scaling must keep the modes tame
    h = 0.05
    eps = h * np.sqrt(2e-9)
    tri = np.array([[0.0, 0.0], [eps, 0.0], [0.0, eps]]) + [0.35, 0.65]
    basis = build_cell_basis(tri, 3)
    assert basis.defect < 1e-10
    pts, wts = polygon_rule(tri, 8)
    phi = basis.eval(pts)
    gram = (phi * wts) @ phi.T
    np.testing.assert_allclose(gram, np.eye(10), atol=1e-10)


def test_build_mesh_basis_covers_all_cells():
    mesh = channel_mesh(8, 0.33, 0.71)
    bases = build_mesh_basis(mesh, 2)
    assert len(bases) == len(mesh.cells)
    for cell, basis in zip(mesh.cells, bases):
        lo, hi = cell.bbox
        assert np.all(basis.center >= lo - 1e-12)
        assert np.all(basis.center <= hi + 1e-12)
        assert basis.defect < 1e-11


def test_mesh_basis_defects_small_on_cut_mesh():
    mesh = rotated_square_mesh(8, np.radians(35.0))
    for r in (1, 3):
        bases = build_mesh_basis(mesh, r)
        worst = max(b.defect for b in bases)
        assert worst < 1e-11
