"""Domain-of-dependence stabilization for small cut cells.

A small cell E with faces gamma_1..gamma_K cannot support the background
time step; instead of shrinking dt, the scheme reroutes a fraction eta_E
of the flux through E directly between its neighbors.  The machinery:

* extensions: each neighbor's polynomial is evaluated as a global
  polynomial on E's faces and volume (across a reflecting wall, the
  mirrored extension of the opposite neighbor stands in for the missing
  one);
* propagation forms p_ij = sum_k C[i,j,k] b_{gamma_k}: signed splittings
  of the face forms b_gamma that say how much of the flux entering
  through gamma_i leaves through gamma_j.  The central family works for
  interior cells; cells with a wall face get a kernel correction making
  the pair with the wall reflect (the "reflecting central" family);
* J0 (surface), J1 (volume) and Js (dissipation) terms per neighbor pair,
  minus eta_E times the base scheme's own face terms on E.

Everything is linear in the coefficients, so each small cell contributes
a set of matrix blocks touching E and its neighbors; the global
stabilizer is one sparse matrix added to the base operator.  The central
part (J0+J1) annihilates in the energy balance cell by cell, and Js keeps
the total dissipation nonnegative -- both checked by the test suite.
"""

import numpy as np

from .errors import (GeometryDegenerate, MultipleBoundaryFaces,
                     StabilizerMeshMismatch)
from .operators import (BlockAccumulator, central_face_blocks,
                        dissipation_face_blocks, dissipation_matrix,
                        face_mass_blocks, flux_matrices, flux_matrix)
from .quadrature import polygon_rule, segment_rule


# ---------------------------------------------------------------------------
# capacity

def capacity(mesh, cell, dt, r, c):
    """Cell capacity and stabilization weight.

    c_E = |E| / ((2r+1) dt c max_i |gamma_i|); eta_E = clamp(1 - c_E, 0, 1).
    A cell that can absorb what one step transports (c_E >= 1) needs no
    stabilization.
    """
    if dt <= 0.0:
        raise ValueError("capacity needs dt > 0")
    if not hasattr(cell, "face_ids"):
        cell = mesh.cells[cell]
    gmax = max(mesh.faces[f].length for f in cell.face_ids)
    cap = cell.area / ((2 * r + 1) * dt * c * gmax)
    eta = float(np.clip(1.0 - cap, 0.0, 1.0))
    return cap, eta


# ---------------------------------------------------------------------------
# propagation-form coefficient tensors

CENTRAL = "central"
REFLECTING = "reflecting-central"


def central_coefficients(K):
    """C[i,j,k] with p_ij = sum_k C[i,j,k] b_{gamma_k} (central family)."""
    C = np.zeros((K, K, K))
    for i in range(K):
        for j in range(K):
            if i == j:
                continue
            C[i, j, j] += 1.0 / (K - 1)
            C[i, j, i] -= (K - 2.0) / (K * (K - 1))
            for k in range(K):
                if k != i and k != j:
                    C[i, j, k] += 1.0 / (K * (K - 1))
    return C


def reflecting_coefficients(K, i_star):
    """Central family plus the kernel element tied to wall face i_star."""
    C = central_coefficients(K)
    for j in range(K):
        if j == i_star:
            continue
        t = np.zeros(K)
        t[j] -= (K - 2.0) / (K * (K - 1))
        for k in range(K):
            if k != i_star and k != j:
                t[k] += 1.0 / (K * (K - 1))
        C[i_star, j] += t
        C[j, i_star] -= t
    for j in range(K):
        for k in range(K):
            if j == k or j == i_star or k == i_star:
                continue
            C[j, k, k] += 1.0 / (K * (K - 1))
            C[j, k, j] -= 1.0 / (K * (K - 1))
    return C


class PropagationFormSet:
    """Surface coefficient tensor plus the shared volume weight 2/(K(K-1))."""

    def __init__(self, cell_id, K, family, i_star=None):
        if K < 2:
            raise GeometryDegenerate("propagation forms need K >= 2 faces")
        self.cell_id = cell_id
        self.K = K
        self.family = family
        self.i_star = i_star
        if family == CENTRAL:
            self.C = central_coefficients(K)
        else:
            self.C = reflecting_coefficients(K, i_star)
        self.vol_weight = 2.0 / (K * (K - 1))


def central_forms(mesh, cell):
    if not hasattr(cell, "face_ids"):
        cell = mesh.cells[cell]
    return PropagationFormSet(cell.id, len(cell.face_ids), CENTRAL)


def reflecting_forms(mesh, cell, i_star=None):
    if not hasattr(cell, "face_ids"):
        cell = mesh.cells[cell]
    walls = [k for k, f in enumerate(mesh.faces_of(cell.id)) if f.is_boundary]
    if len(walls) > 1:
        raise MultipleBoundaryFaces(
            "cell %d has %d reflecting faces" % (cell.id, len(walls)))
    if not walls:
        raise GeometryDegenerate("cell %d has no reflecting face" % cell.id)
    if i_star is None:
        i_star = walls[0]
    elif i_star != walls[0]:
        raise GeometryDegenerate("face %d of cell %d is not the wall"
                                 % (i_star, cell.id))
    return PropagationFormSet(cell.id, len(cell.face_ids), REFLECTING, i_star)


# ---------------------------------------------------------------------------
# extensions as linear maps on coefficient blocks

class Extension:
    """Extension of one cell's polynomial triple, as a matrix-valued map.

    state_map(pts)[a, J, q] is the weight of flat source coefficient J
    (component-major, J = comp*n_b + mode) in component a of the evaluated
    state at point q.  Points are given in the chart of the cell being
    stabilized; `offset` translates them into the source cell's own chart
    (periodic wrap), `mirror=(x0, n)` applies the wall reflection first.
    """

    def __init__(self, basis, cell_id, offset=None, mirror=None):
        self.basis = basis
        self.cell = cell_id
        self.offset = None if offset is None else np.asarray(offset, float)
        self.mirror = mirror

    def _shift(self, pts):
        return pts if self.offset is None else pts + self.offset

    def state_map(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        nb = self.basis.n_b
        nq = len(pts)
        out = np.zeros((3, 3 * nb, nq))
        if self.mirror is None:
            phi = self.basis.eval(self._shift(pts))
            for a in range(3):
                out[a, a * nb:(a + 1) * nb] = phi
            return out
        x0, n = self.mirror
        d = (pts - x0) @ n
        proj = pts - d[:, None] * n
        phi = self.basis.eval(self._shift(pts))
        phip = self.basis.eval(self._shift(proj))
        out[0, 0:nb] = phi
        for a in range(2):
            for b in range(2):
                blk = -2.0 * n[a] * n[b] * phip
                if a == b:
                    blk = blk + phi
                out[1 + a, (1 + b) * nb:(2 + b) * nb] = blk
        return out

    def grad_map(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        nb = self.basis.n_b
        nq = len(pts)
        out = np.zeros((2, 3, 3 * nb, nq))
        if self.mirror is None:
            g = self.basis.eval_grad(self._shift(pts))
            for a in range(3):
                out[:, a, a * nb:(a + 1) * nb] = g
            return out
        x0, n = self.mirror
        d = (pts - x0) @ n
        proj = pts - d[:, None] * n
        g = self.basis.eval_grad(self._shift(pts))
        gp = self.basis.eval_grad(self._shift(proj))
        perp = np.eye(2) - np.outer(n, n)
        gproj = np.einsum("lbq,lk->kbq", gp, perp)
        out[:, 0, 0:nb] = g
        for a in range(2):
            for b in range(2):
                blk = -2.0 * n[a] * n[b] * gproj
                if a == b:
                    blk = blk + g
                out[:, 1 + a, (1 + b) * nb:(2 + b) * nb] = blk
        return out


# ---------------------------------------------------------------------------
# per-cell stabilizer

class CellStabilizer:
    """All stabilization blocks contributed by one small cell."""

    def __init__(self, mesh, bases, cell_id, dt, c, dissipation):
        self.mesh = mesh
        self.bases = bases
        self.cell = mesh.cells[cell_id]
        self.id = cell_id
        self.c = c
        self.r = bases[cell_id].r
        self.n_b = bases[cell_id].n_b
        self.dissipation = dissipation

        faces = mesh.faces_of(cell_id)
        self.K = len(faces)
        # face geometry in E's own chart
        self.face_geo = [f.geometry_for(cell_id) for f in faces]
        self.faces = faces
        walls = [k for k, f in enumerate(faces) if f.is_boundary]
        if len(walls) > 1:
            raise MultipleBoundaryFaces(
                "small cell %d touches the wall on %d faces"
                % (cell_id, len(walls)))
        self.i_star = walls[0] if walls else None
        family = REFLECTING if walls else CENTRAL
        self.forms = PropagationFormSet(cell_id, self.K, family, self.i_star)

        self.capacity, self.eta = capacity(mesh, self.cell, dt, self.r, c)

        # plain extensions: index K means E itself
        self.ext = {}
        for k, (a, b, n, nb_id, off) in enumerate(self.face_geo):
            if nb_id is not None:
                self.ext[k] = Extension(bases[nb_id], nb_id, offset=off)
        self.ext[self.K] = Extension(bases[cell_id], cell_id)
        if self.i_star is not None:
            a, b, n, _, _ = self.face_geo[self.i_star]
            self._wall_line = (a.copy(), n.copy())

        self.face_rules = [segment_rule(g[0], g[1], 2 * self.r + 1)
                           for g in self.face_geo]
        self.vol_rule = polygon_rule(self.cell.vertices, 2 * self.r + 2)
        self._maps = {}

        self.central_blocks = self._assemble_central()
        self.dissipation_blocks = self._assemble_dissipation()

    # -- extension lookup ---------------------------------------------------

    def _mirrored(self, j):
        """Reflected extension of neighbor j across the wall face."""
        src = self.ext[j]
        return Extension(src.basis, src.cell, offset=src.offset,
                         mirror=self._wall_line)

    def pair_extensions(self, i, j):
        """Unified extensions for the pair (i, j): slots i, j, and E.

        The slot of a wall face holds the reflected extension of the
        opposite neighbor; everything else extends plainly.
        """
        ei = self._mirrored(j) if i == self.i_star else self.ext[i]
        ej = self._mirrored(i) if j == self.i_star else self.ext[j]
        return ei, ej, self.ext[self.K]

    # -- cached evaluation --------------------------------------------------

    def _ext_key(self, ext):
        # Content key, not id(): pair_extensions creates short-lived
        # mirrored Extension objects and recycled ids would alias the cache.
        off = (0.0, 0.0) if ext.offset is None else tuple(ext.offset)
        return (ext.cell, off, ext.mirror is not None)

    def _smap(self, ext, rule_key):
        key = ("s", self._ext_key(ext), rule_key)
        if key not in self._maps:
            pts = (self.vol_rule if rule_key == "vol"
                   else self.face_rules[rule_key])[0]
            self._maps[key] = ext.state_map(pts)
        return self._maps[key]

    def _gmap(self, ext, rule_key):
        key = ("g", self._ext_key(ext), rule_key)
        if key not in self._maps:
            pts = (self.vol_rule if rule_key == "vol"
                   else self.face_rules[rule_key])[0]
            self._maps[key] = ext.grad_map(pts)
        return self._maps[key]

    # -- block emission -----------------------------------------------------

    def _emit_face(self, acc, k, matrix, trials, tests, scale):
        """int_{gamma_k} <matrix * avg(trials), combo(tests)> as blocks."""
        wts = self.face_rules[k][1]
        for test_ext, tw in tests:
            mt = self._smap(test_ext, k)
            for trial_ext, uw in trials:
                mu = self._smap(trial_ext, k)
                blk = np.einsum("q,aJq,ab,bIq->JI", wts, mt, matrix, mu,
                                optimize=True)
                acc.add((test_ext.cell, trial_ext.cell), (scale * tw * uw) * blk)

    def _emit_volume(self, acc, a_stack, grad_tests, state_trials, scale):
        """int_E sum_k <A_k (grad test)_k-ish pairing> -- the one einsum
        serving p_V, the middle subtraction, and p_V* (A_k symmetric)."""
        wts = self.vol_rule[1]
        for test_ext, tw in grad_tests:
            gt = self._gmap(test_ext, "vol")
            for trial_ext, uw in state_trials:
                mu = self._smap(trial_ext, "vol")
                blk = np.einsum("q,kaJq,kab,bIq->JI", wts, gt, a_stack, mu,
                                optimize=True)
                acc.add((test_ext.cell, trial_ext.cell), (scale * tw * uw) * blk)

    def _emit_p_form(self, acc, coef_row, trials, tests, scale):
        """p = sum_k coef_row[k] b_{gamma_k} applied to (trials; tests)."""
        for k in range(self.K):
            if coef_row[k] == 0.0:
                continue
            n = self.face_geo[k][2]
            an = flux_matrix(n, self.c)
            self._emit_face(acc, k, an, trials, tests, scale * coef_row[k])

    # -- the three term groups ----------------------------------------------

    def _assemble_central(self):
        # The three groups are kept separate as well (surface_part,
        # volume_part, base_part): the energy identity they satisfy is a
        # cancellation between terms that can dwarf the residual, so
        # verification needs the individual magnitudes for normalization.
        acc0 = BlockAccumulator(len(self.mesh.cells), 3 * self.n_b)
        acc1 = BlockAccumulator(len(self.mesh.cells), 3 * self.n_b)
        accb = BlockAccumulator(len(self.mesh.cells), 3 * self.n_b)
        C = self.forms.C
        a1, a2 = flux_matrices(self.c)
        a_stack = np.stack([a1, a2])
        vw = self.forms.vol_weight
        for i in range(self.K):
            for j in range(i + 1, self.K):
                ei, ej, ee = self.pair_extensions(i, j)
                half = [(ei, 0.5), (ej, 0.5)]
                # J0 surface part
                if self.i_star is None or self.i_star not in (i, j):
                    self._emit_p_form(acc0, C[i, j], half,
                                      [(ee, 1.0), (ej, -1.0)], 1.0)
                    self._emit_p_form(acc0, C[j, i], half,
                                      [(ee, 1.0), (ei, -1.0)], 1.0)
                elif i == self.i_star:
                    self._emit_p_form(acc0, C[i, j], half,
                                      [(ee, 1.0), (ej, -1.0)], 1.0)
                    self._emit_p_form(acc0, C[j, i], half, [(ee, 1.0)], 1.0)
                else:
                    self._emit_p_form(acc0, C[j, i], half,
                                      [(ee, 1.0), (ei, -1.0)], 1.0)
                    self._emit_p_form(acc0, C[i, j], half, [(ee, 1.0)], 1.0)
                # J1 volume part
                for we, ww in ((ee, -1.0), (ei, 0.5), (ej, 0.5)):
                    self._emit_volume(acc1, a_stack, [(we, 1.0)], half,
                                      vw * ww)
                    self._emit_volume(acc1, a_stack, [(we, 1.0)], [(we, 1.0)],
                                      -vw * ww)
                    self._emit_volume(acc1, a_stack, half, [(we, 1.0)],
                                      vw * ww)
        # the base scheme's central face terms on E (subtracted on merge)
        for face in self.faces:
            for key, blk in central_face_blocks(face, self.bases, self.c,
                                                face_mass_blocks(face,
                                                                 self.bases)):
                accb.add(key, blk)
        self.surface_part = acc0
        self.volume_part = acc1
        self.base_part = accb
        acc = BlockAccumulator(len(self.mesh.cells), 3 * self.n_b)
        acc0.scaled_into(acc, 1.0)
        acc1.scaled_into(acc, 1.0)
        accb.scaled_into(acc, -1.0)
        return acc

    def _assemble_dissipation(self):
        acc = BlockAccumulator(len(self.mesh.cells), 3 * self.n_b)
        s = dissipation_matrix(self.dissipation, self.c)
        if s is None:
            return acc
        for i in range(self.K):
            for j in range(i + 1, self.K):
                ei, ej, _ = self.pair_extensions(i, j)
                for k in range(self.K):
                    # both symmetric halves, each weighted 1/6
                    self._emit_face(acc, k, s, [(ei, 1.0), (ej, -1.0)],
                                    [(ei, 1.0), (ej, -1.0)], 1.0 / 6.0)
                    self._emit_face(acc, k, s, [(ej, 1.0), (ei, -1.0)],
                                    [(ej, 1.0), (ei, -1.0)], 1.0 / 6.0)
        for face in self.faces:
            for key, blk in dissipation_face_blocks(
                    face, self.bases, self.c, self.dissipation,
                    face_mass_blocks(face, self.bases)):
                acc.add(key, -blk)
        return acc

    def quadratic_form(self, blocks, field):
        """w . (blocks u) restricted to this cell's contributions."""
        total = 0.0
        for (rc, cc), blk in sorted(blocks.blocks.items()):
            total += field.data[rc].reshape(-1) @ blk \
                @ field.data[cc].reshape(-1)
        return total


# ---------------------------------------------------------------------------
# whole-mesh stabilizer

class DodStabilizer:
    """eta-weighted sum of all small-cell stabilization blocks."""

    def __init__(self, mesh, bases, small, dt, c=1.0,
                 dissipation="lax-friedrichs"):
        if len(bases) != len(mesh.cells):
            raise StabilizerMeshMismatch("bases do not cover the mesh")
        self.mesh = mesh
        self.bases = bases
        self.small = small
        self.dt = dt
        self.c = c
        self.dissipation = dissipation
        self.cells = [CellStabilizer(mesh, bases, cid, dt, c, dissipation)
                      for cid in small.ids]
        n_b = bases[0].n_b if bases else 1
        acc_c = BlockAccumulator(len(mesh.cells), 3 * n_b)
        acc_s = BlockAccumulator(len(mesh.cells), 3 * n_b)
        for cs in self.cells:
            if cs.eta == 0.0:
                continue
            cs.central_blocks.scaled_into(acc_c, cs.eta)
            cs.dissipation_blocks.scaled_into(acc_s, cs.eta)
        self.central_matrix = acc_c.to_bsr()
        self.dissipation_matrix = acc_s.to_bsr()
        self.matrix = (self.central_matrix + self.dissipation_matrix).tobsr(
            blocksize=(3 * n_b, 3 * n_b))

    def apply(self, flat):
        return self.matrix @ flat

    def residual(self, field):
        if field.data.shape[0] != len(self.mesh.cells):
            raise StabilizerMeshMismatch("field does not match stabilizer")
        out = field.copy()
        out.data = (self.matrix @ field.flat).reshape(field.data.shape)
        return out

    def diagnostics(self):
        """One row per small cell: id, alpha, K, eta, family."""
        rows = []
        for cs in self.cells:
            rows.append({"cell": cs.id, "alpha": cs.cell.alpha, "K": cs.K,
                         "eta": cs.eta, "capacity": cs.capacity,
                         "family": cs.forms.family})
        return rows


def apply_dod(field, stabilizer):
    return stabilizer.residual(field)
