"""Acoustic flux, wall mirroring, and the unstabilized DG operator.

State ordering is u = (p, v1, v2).  The linear flux is f(u) = (A1 u, A2 u)
with symmetric A_k, so the semi-discrete scheme

    <du/dt, w> = -a_h(u, w) - s_h(u, w)

is a fixed matrix acting on coefficient vectors once the bases are chosen
(orthonormal bases make the mass matrix the identity).  `BaseOperator`
assembles that matrix; the per-face/per-cell block builders are module
functions because the small-cell stabilization reuses them verbatim when
it subtracts scaled base-scheme terms.

Face blocks follow the geometry conventions: n points left -> right, the
test jump is [w] = w_L - w_R, and boundary faces close the system with the
mirrored state (p, v - 2(v.n)n), whose central average has zero normal
velocity -- a reflecting wall.
"""

import numpy as np
from scipy.sparse import bsr_matrix

from .basis import space_dim
from .errors import MeshFieldMismatch, NonPlanarFace
from .quadrature import polygon_rule, segment_rule

N_COMP = 3


def flux_matrices(c=1.0):
    a1 = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    a2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    return c * a1, c * a2


def flux_matrix(n, c=1.0):
    """A_n = n1 A1 + n2 A2 for a unit direction n."""
    n = np.asarray(n, dtype=float)
    if abs(np.hypot(n[0], n[1]) - 1.0) > 1e-12:
        raise ValueError("flux direction must be a unit vector")
    return c * np.array([[0.0, n[0], n[1]],
                         [n[0], 0.0, 0.0],
                         [n[1], 0.0, 0.0]])


def mirror_state(u, n):
    """(p, v - 2(v.n)n): flips normal velocity, keeps p and tangential v."""
    u = np.asarray(u, dtype=float)
    vn = u[1] * n[0] + u[2] * n[1]
    out = u.copy()
    out[1] = u[1] - 2.0 * vn * n[0]
    out[2] = u[2] - 2.0 * vn * n[1]
    return out


def mirror_matrix(n):
    m = np.eye(3)
    m[1, 1] -= 2.0 * n[0] * n[0]
    m[1, 2] -= 2.0 * n[0] * n[1]
    m[2, 1] -= 2.0 * n[1] * n[0]
    m[2, 2] -= 2.0 * n[1] * n[1]
    return m


def boundary_central_matrix(n, c):
    """(1/2) A_n (I + M_n): the central wall flux collapses to c p n."""
    b = np.zeros((3, 3))
    b[1, 0] = c * n[0]
    b[2, 0] = c * n[1]
    return b


def normal_projector(n):
    """P_n u = (0, (v.n)n), so u - M_n u = 2 P_n u."""
    p = np.zeros((3, 3))
    p[1:, 1:] = np.outer(n, n)
    return p


# ---------------------------------------------------------------------------
# dissipation operators

ZERO = "zero"
LAX_FRIEDRICHS = "lax-friedrichs"


def dissipation_matrix(kind, c):
    """S^M for the named variant: None (no term) or (c/2) I."""
    if kind == ZERO:
        return None
    if kind == LAX_FRIEDRICHS:
        return 0.5 * c * np.eye(3)
    raise ValueError("unknown dissipation %r" % (kind,))


# ---------------------------------------------------------------------------
# polynomial triples (pointwise evaluation; used by tests and verification)

class PolyTriple:
    """A degree-r polynomial triple on one cell: coef (3, n_b) over a basis."""

    def __init__(self, basis, coef):
        self.basis = basis
        self.coef = np.asarray(coef, dtype=float)

    def eval(self, pts):
        return self.coef @ self.basis.eval(pts)

    def eval_grad(self, pts):
        g = self.basis.eval_grad(pts)  # (2, n_b, nq)
        return np.einsum("cb,kbq->kcq", self.coef, g)


class MirroredTriple:
    """M_n applied to a polynomial triple across the line through x0 with
    outward normal n: x |-> (p(x), v(x) - 2(v(x^perp).n)n), where x^perp is
    the orthogonal projection of x onto the line.  Same degree as the input,
    and equal to the pointwise mirror on the line itself."""

    def __init__(self, poly, x0, n):
        self.poly = poly
        self.basis = poly.basis
        self.x0 = np.asarray(x0, dtype=float)
        self.n = np.asarray(n, dtype=float)

    def _project(self, pts):
        d = (pts - self.x0) @ self.n
        return pts - d[:, None] * self.n

    def eval(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = self.poly.eval(pts)
        valp = self.poly.eval(self._project(pts))
        n = self.n
        vn = n[0] * valp[1] + n[1] * valp[2]
        out = vals.copy()
        out[1] -= 2.0 * vn * n[0]
        out[2] -= 2.0 * vn * n[1]
        return out

    def eval_grad(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = self.n
        g = self.poly.eval_grad(pts).copy()        # (2, 3, nq)
        gp = self.poly.eval_grad(self._project(pts))
        proj = np.eye(2) - np.outer(n, n)
        # chain rule through the projection: d_k [v_b(x^perp)]
        gvp = np.einsum("lbq,lk->kbq", gp[:, 1:, :], proj)
        vn = n[0] * gvp[:, 0, :] + n[1] * gvp[:, 1, :]
        g[:, 1, :] -= 2.0 * vn * n[0]
        g[:, 2, :] -= 2.0 * vn * n[1]
        return g


def mirror_polynomial(poly, face):
    if not np.isfinite(face.a).all() or not np.isfinite(face.b).all() \
            or face.length <= 0.0:
        raise NonPlanarFace("face %d has no usable straight geometry"
                            % face.id)
    return MirroredTriple(poly, face.a, face.normal)


def surface_form(face, cell_id, u_mu, u_nu, w, c=1.0, degree=None):
    """b_gamma(u_mu, u_nu, w) = int (1/2)(A_n u_mu + A_n u_nu) . w over the
    face, seen from `cell_id` (outward normal).  Arguments are objects with
    .eval(pts) -> (3, nq); extensions from other cells are fine."""
    a, b, n, _, _ = face.geometry_for(cell_id)
    if degree is None:
        degree = 2 * getattr(u_mu, "basis", w.basis).r + 1
    pts, wts = segment_rule(a, b, degree)
    an = flux_matrix(n, c)
    avg = 0.5 * (u_mu.eval(pts) + u_nu.eval(pts))
    return float(np.einsum("q,ab,bq,aq->", wts, an, avg, w.eval(pts)))


# ---------------------------------------------------------------------------
# coefficient fields

class DgField:
    """DG coefficient field: data[cell, component, mode] over shared bases."""

    def __init__(self, mesh, bases, r, data=None, time=0.0):
        self.mesh = mesh
        self.bases = bases
        self.r = r
        self.n_b = space_dim(r)
        if data is None:
            data = np.zeros((len(mesh.cells), N_COMP, self.n_b))
        if data.shape != (len(mesh.cells), N_COMP, self.n_b):
            raise MeshFieldMismatch("field shape %s does not match mesh"
                                    % (data.shape,))
        self.data = data
        self.time = time

    def copy(self):
        return DgField(self.mesh, self.bases, self.r, self.data.copy(),
                       self.time)

    @property
    def flat(self):
        return self.data.reshape(-1)

    def eval(self, cell_id, pts):
        return self.data[cell_id] @ self.bases[cell_id].eval(pts)

    def cell_poly(self, cell_id):
        return PolyTriple(self.bases[cell_id], self.data[cell_id])


# ---------------------------------------------------------------------------
# block builders (shared with the stabilization module)

def volume_block(cell, basis, c, rule=None):
    """-(sum_k A_k (x) D_k) with D_k[a,m] = int dphi_a/dx_k phi_m."""
    if rule is None:
        rule = polygon_rule(cell.vertices, 2 * basis.r + 2)
    pts, wts = rule
    phi = basis.eval(pts)
    grad = basis.eval_grad(pts)
    a1, a2 = flux_matrices(c)
    blk = np.zeros((3 * basis.n_b, 3 * basis.n_b))
    for ak, k in ((a1, 0), (a2, 1)):
        dk = (grad[k] * wts) @ phi.T
        blk -= np.kron(ak, dk)
    return blk


def face_mass_blocks(face, bases):
    """(T_LL, T_LR, T_RR) for an internal face; (T_EE,) for a boundary face.

    T_XY[a, m] = int phi^X_a phi^Y_m over the face, with each side's basis
    evaluated in its own chart.  Same-side matrices are symmetrized so the
    assembled energy form is symmetric to the last bit.
    """
    r = bases[face.left].r
    pts, wts = segment_rule(face.a, face.b, 2 * r + 1)
    phi_l = bases[face.left].eval(pts)
    if face.right is None:
        t_ee = (phi_l * wts) @ phi_l.T
        return (0.5 * (t_ee + t_ee.T),)
    phi_r = bases[face.right].eval(pts + face.offset)
    t_ll = (phi_l * wts) @ phi_l.T
    t_rr = (phi_r * wts) @ phi_r.T
    t_lr = (phi_l * wts) @ phi_r.T
    return 0.5 * (t_ll + t_ll.T), t_lr, 0.5 * (t_rr + t_rr.T)


def central_face_blocks(face, bases, c, mass=None):
    """Blocks of the central face term, as ((test cell, trial cell), block).

    Internal: int <(1/2)(A_n u_L + A_n u_R), w_L - w_R>; the (R,L) block is
    the negated transpose of the (L,R) array so the pair is exactly skew.
    Boundary: int <(1/2) A_n (u + M_n u), w>.
    """
    if mass is None:
        mass = face_mass_blocks(face, bases)
    if face.right is None:
        b_n = boundary_central_matrix(face.normal, c)
        return [((face.left, face.left), np.kron(b_n, mass[0]))]
    t_ll, t_lr, t_rr = mass
    a_n = flux_matrix(face.normal, c)
    lr = 0.5 * np.kron(a_n, t_lr)
    return [((face.left, face.left), 0.5 * np.kron(a_n, t_ll)),
            ((face.left, face.right), lr),
            ((face.right, face.left), -lr.T),
            ((face.right, face.right), -0.5 * np.kron(a_n, t_rr))]


def dissipation_face_blocks(face, bases, c, kind, mass=None):
    """Blocks of int <S_n jump(u), jump(w)> (boundary: u - M_n u)."""
    s = dissipation_matrix(kind, c)
    if s is None:
        return []
    if mass is None:
        mass = face_mass_blocks(face, bases)
    if face.right is None:
        g = 2.0 * (s @ normal_projector(face.normal))
        return [((face.left, face.left), np.kron(g, mass[0]))]
    t_ll, t_lr, t_rr = mass
    lr = np.kron(s, t_lr)
    return [((face.left, face.left), np.kron(s, t_ll)),
            ((face.left, face.right), -lr),
            ((face.right, face.left), -lr.T),
            ((face.right, face.right), np.kron(s, t_rr))]


class BlockAccumulator:
    def __init__(self, n_cells, block_size):
        self.n_cells = n_cells
        self.bs = block_size
        self.blocks = {}

    def add(self, key, blk):
        if key in self.blocks:
            self.blocks[key] = self.blocks[key] + blk
        else:
            self.blocks[key] = blk

    def scaled_into(self, other, factor):
        for key, blk in self.blocks.items():
            other.add(key, factor * blk)

    def to_bsr(self):
        keys = sorted(self.blocks)
        indptr = np.zeros(self.n_cells + 1, dtype=np.int64)
        for i, _ in keys:
            indptr[i + 1] += 1
        np.cumsum(indptr, out=indptr)
        indices = np.array([j for _, j in keys], dtype=np.int64)
        if keys:
            data = np.stack([self.blocks[k] for k in keys])
        else:
            data = np.zeros((0, self.bs, self.bs))
        n = self.n_cells * self.bs
        return bsr_matrix((data, indices, indptr), shape=(n, n))


# ---------------------------------------------------------------------------
# assembled operator

class BaseOperator:
    """Matrix form of a_h + s_h; the semi-discrete system is du/dt = -apply(u)."""

    def __init__(self, mesh, bases, c=1.0, dissipation=LAX_FRIEDRICHS):
        self.mesh = mesh
        self.bases = bases
        self.c = c
        self.dissipation = dissipation
        self.r = bases[0].r
        self.n_b = bases[0].n_b
        acc = BlockAccumulator(len(mesh.cells), 3 * self.n_b)
        for cell in mesh.cells:
            acc.add((cell.id, cell.id),
                    volume_block(cell, bases[cell.id], c))
        for face in mesh.faces:
            mass = face_mass_blocks(face, bases)
            for key, blk in central_face_blocks(face, bases, c, mass):
                acc.add(key, blk)
            for key, blk in dissipation_face_blocks(face, bases, c,
                                                    dissipation, mass):
                acc.add(key, blk)
        self.matrix = acc.to_bsr()

    def apply(self, flat):
        return self.matrix @ flat

    def residual(self, field):
        if field.data.shape[0] != len(self.mesh.cells) \
                or field.n_b != self.n_b:
            raise MeshFieldMismatch("field does not match operator layout")
        out = field.copy()
        out.data = (self.matrix @ field.flat).reshape(field.data.shape)
        return out


def apply_base_operator(field, dissipation=LAX_FRIEDRICHS, c=1.0):
    return BaseOperator(field.mesh, field.bases, c, dissipation).residual(field)


def assemble_single_flux(mesh, bases, c=1.0):
    """Independent assembly routed through the Lax-Friedrichs numerical flux
    F(uL,uR) = (1/2) A_n (uL+uR) + (c/2)(uL-uR); used to cross-check that
    a_h + s_h is exactly the single-flux scheme."""
    n_b = bases[0].n_b
    acc = BlockAccumulator(len(mesh.cells), 3 * n_b)
    for cell in mesh.cells:
        acc.add((cell.id, cell.id), volume_block(cell, bases[cell.id], c))
    half = 0.5 * np.eye(3)
    for face in mesh.faces:
        mass = face_mass_blocks(face, bases)
        n = face.normal
        a_n = flux_matrix(n, c)
        if face.right is None:
            # F(u, M_n u) collapses on the wall line
            m1 = 0.5 * a_n @ (np.eye(3) + mirror_matrix(n)) \
                + c * normal_projector(n)
            acc.add((face.left, face.left), np.kron(m1, mass[0]))
            continue
        t_ll, t_lr, t_rr = mass
        m1 = 0.5 * a_n + c * half           # multiplies uL
        m2 = 0.5 * a_n - c * half           # multiplies uR
        acc.add((face.left, face.left), np.kron(m1, t_ll))
        acc.add((face.left, face.right), np.kron(m2, t_lr))
        acc.add((face.right, face.left), -np.kron(m1, t_lr.T))
        acc.add((face.right, face.right), -np.kron(m2, t_rr))
    return acc.to_bsr()
