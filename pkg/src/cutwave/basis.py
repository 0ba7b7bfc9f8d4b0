"""Orthonormal polynomial bases on cut cells.

Each cell gets modes phi_a that are L2(E)-orthonormal combinations of the
monomials ((x-c)/s)^p ((y-c)/s)^q in graded order, centered and scaled on
the cell's *background* cell box -- not the cut polygon's own bounds.
The stabilization evaluates a small cell's modes across neighbor cells at
background-cell distances; background scaling keeps those values O(1),
and it keeps the coordinates (x-c)/s free of cancellation even when the
cut polygon is a sliver many orders thinner than the grid.
Orthonormalization is a Cholesky factor of the monomial Gram matrix, with
a pivoted modified Gram-Schmidt fallback (plus a reorthogonalization
sweep) when Cholesky breaks down, as it does on slivers where the
monomials are nearly dependent.  Uncut cells are translates of each other
and share one coefficient matrix.

Modes extend as global polynomials: `eval` accepts points anywhere, which
is what the small-cell stabilization relies on.
"""

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .errors import BasisConditioningFailure
from .quadrature import polygon_rule

# orthonormality defect above this on the build rule means the basis is junk
DEFECT_LIMIT = 1e-8


def space_dim(r):
    return (r + 1) * (r + 2) // 2


def monomial_exponents(r):
    """Graded order: degree 0, 1, ... with x-power descending inside a degree."""
    out = []
    for d in range(r + 1):
        for px in range(d, -1, -1):
            out.append((px, d - px))
    return np.array(out, dtype=int)


class CellBasis:
    def __init__(self, r, center, scale, coef):
        self.r = r
        self.n_b = coef.shape[0]
        self.center = np.asarray(center, dtype=float)
        self.scale = float(scale)
        self.coef = coef
        self.expts = monomial_exponents(r)
        self.defect = None

    def _mono(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xh = (pts - self.center) / self.scale
        px = self.expts[:, 0][:, None]
        py = self.expts[:, 1][:, None]
        return xh[:, 0][None, :] ** px * xh[:, 1][None, :] ** py

    def _mono_grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        xh = (pts - self.center) / self.scale
        px = self.expts[:, 0][:, None].astype(float)
        py = self.expts[:, 1][:, None].astype(float)
        x = xh[:, 0][None, :]
        y = xh[:, 1][None, :]
        gx = np.where(px > 0, px * x ** np.maximum(px - 1, 0.0) * y ** py, 0.0)
        gy = np.where(py > 0, py * x ** px * y ** np.maximum(py - 1, 0.0), 0.0)
        return gx / self.scale, gy / self.scale

    def eval(self, pts):
        """Mode values, shape (n_b, npts)."""
        return self.coef @ self._mono(pts)

    def eval_grad(self, pts):
        """Mode gradients, shape (2, n_b, npts)."""
        gx, gy = self._mono_grad(pts)
        return np.stack([self.coef @ gx, self.coef @ gy])


def orthonormality_defect(basis, pts, wts):
    P = basis.eval(pts)
    G = (P * wts) @ P.T
    return float(np.max(np.abs(G - np.eye(len(G)))))


def _pivoted_mgs(V, wts):
    """Weighted Gram-Schmidt on sampled monomial rows, largest-norm pivot."""
    n = V.shape[0]
    W = V.astype(float).copy()
    C = np.eye(n)
    active = list(range(n))
    taken = []
    for _ in range(n):
        norms = [np.sqrt(max((W[i] * wts) @ W[i], 0.0)) for i in active]
        j = int(np.argmax(norms))
        pick, nv = active[j], norms[j]
        if nv <= 0.0:
            raise BasisConditioningFailure("monomial space degenerates "
                                           "on the quadrature rule")
        W[pick] /= nv
        C[pick] /= nv
        taken.append(pick)
        active.pop(j)
        for i in active:
            d = (W[pick] * wts) @ W[i]
            W[i] -= d * W[pick]
            C[i] -= d * C[pick]
    # second sweep cleans up rounding left by the first
    for idx, k in enumerate(taken):
        for j in taken[:idx]:
            d = (W[j] * wts) @ W[k]
            W[k] -= d * W[j]
            C[k] -= d * C[j]
        nv = np.sqrt((W[k] * wts) @ W[k])
        if nv <= 0.0:
            raise BasisConditioningFailure("reorthogonalization collapsed")
        W[k] /= nv
        C[k] /= nv
    return C[taken]


def build_cell_basis(vertices, r, rule=None):
    vertices = np.asarray(vertices, dtype=float)
    lo = vertices.min(axis=0)
    hi = vertices.max(axis=0)
    center = 0.5 * (lo + hi)
    scale = 0.5 * float(np.max(hi - lo))
    if scale <= 0.0:
        raise BasisConditioningFailure("cell bounding box has no extent")
    if rule is None:
        pts, wts = polygon_rule(vertices, 2 * r + 2)
    else:
        pts, wts = rule
    n_m = space_dim(r)
    proto = CellBasis(r, center, scale, np.eye(n_m))
    V = proto._mono(pts)
    G = (V * wts) @ V.T
    G = 0.5 * (G + G.T)
    try:
        L = cholesky(G, lower=True)
        coef = solve_triangular(L, np.eye(n_m), lower=True)
    except np.linalg.LinAlgError:
        coef = _pivoted_mgs(V, wts)
    basis = CellBasis(r, center, scale, coef)
    basis.defect = orthonormality_defect(basis, pts, wts)
    if basis.defect > DEFECT_LIMIT:
        raise BasisConditioningFailure(
            "orthonormality defect %.3e on cell with bbox %s--%s"
            % (basis.defect, lo, hi))
    return basis


def build_mesh_basis(mesh, r):
    """Per-cell bases; full background cells share one coefficient matrix."""
    bases = [None] * len(mesh.cells)
    canon = None
    for c in mesh.cells:
        if abs(c.alpha - 1.0) <= 1e-12:
            if canon is None:
                canon = build_cell_basis(c.vertices, r)
            b = CellBasis(r, 0.5 * (c.bbox[0] + c.bbox[1]), canon.scale,
                          canon.coef)
            b.defect = canon.defect
            bases[c.id] = b
        else:
            bases[c.id] = build_cell_basis(c.vertices, r)
    return bases
