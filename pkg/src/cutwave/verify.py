"""Randomized verification of the algebraic identities behind the scheme.

Each identity the energy argument rests on is checked numerically on
randomized cut-cell configurations: a random clip line through the center
cell of a small periodic patch produces stabilized cells with 3, 4 or 5
faces, random coefficient data produces the polynomial arguments.

Residuals are reported *relative to the magnitude of the cancelling
terms* (|lhs| + |rhs|, or the sum of the group magnitudes for the cell
identity): the identities are exact cancellations whose raw terms can be
large when a neighboring cell is nearly degenerate, so this is the
scale-invariant measure of floating-point agreement.
"""

import numpy as np

from . import geometry
from .basis import build_mesh_basis
from .errors import VerificationFailure
from .geometry import (BackgroundMesh, HalfPlaneDomain, SmallCellSet,
                       build_cut_mesh)
from .operators import (BlockAccumulator, DgField, dissipation_face_blocks,
                         face_mass_blocks, flux_matrices, flux_matrix)
from .stabilization import DodStabilizer, Extension, central_coefficients

__all__ = [
    "IdentityResult", "random_clip_configuration", "run_identity_suite",
    "format_report", "require_all",
]

IDENTITIES = (
    "mirror-skew-symmetry",
    "integration-by-parts",
    "balance",
    "consistency",
    "energy-preservation-1",
    "energy-preservation-2",
    "reflection-identity",
    "cell-annihilation",
    "global-dissipativity",
    "two-face-collapse",
    "negative-control",
)


class IdentityResult:
    def __init__(self, name, residual, tol, trials, ok):
        self.name = name
        self.residual = residual
        self.tol = tol
        self.trials = trials
        self.ok = ok

    def __repr__(self):
        return "IdentityResult(%r, residual=%.3e, ok=%s)" % (
            self.name, self.residual, self.ok)


def random_clip_configuration(rng, n=4, r=1, dissipation="lax-friedrichs"):
    """A periodic n x n patch cut by one random line through the center
    cell; returns (mesh, bases, stabilizer-cell) with the center cell
    stabilized.  Lines that graze a corner too closely are redrawn."""
    h = 1.0 / n
    center = np.array([(n // 2 + 0.5) * h, (n // 2 + 0.5) * h])
    while True:
        theta = rng.uniform(0.0, 2.0 * np.pi)
        normal = np.array([np.cos(theta), np.sin(theta)])
        point = center + rng.uniform(-0.45, 0.45, 2) * h
        domain = HalfPlaneDomain([(normal, float(normal @ point))])
        bg = BackgroundMesh(n, n, ((0.0, 0.0), (1.0, 1.0)),
                            periodic=(True, True))
        try:
            mesh = build_cut_mesh(bg, domain)
        except geometry.GeometryDegenerate:
            continue
        cid = mesh.cell_of_bg.get((n // 2, n // 2))
        if cid is None:
            continue
        if not 1e-4 < mesh.cells[cid].alpha < 0.99:
            continue
        bases = build_mesh_basis(mesh, r)
        dt = 0.25 * h / (2 * r + 1)
        stab = DodStabilizer(mesh, bases, SmallCellSet(0.99, [cid]), dt,
                             dissipation=dissipation)
        return mesh, bases, stab


def _rel(lhs, rhs):
    return abs(lhs - rhs) / (abs(lhs) + abs(rhs) + 1e-30)


class _CellProbe:
    """Numeric evaluation of the forms on one stabilized cell.

    Arguments are (extension, flat coefficient vector) pairs; slots with
    plain polynomials on E use the cell's own extension."""

    def __init__(self, cs, bases):
        self.cs = cs
        self.basis = bases[cs.id]
        self.plain = cs.ext[cs.K]
        self.a_stack = np.stack(flux_matrices(cs.c))

    def values(self, arg, pts):
        ext, coef = arg
        return np.einsum("aJq,J->aq", ext.state_map(pts), coef)

    def grads(self, arg, pts):
        ext, coef = arg
        return np.einsum("kaJq,J->kaq", ext.grad_map(pts), coef)

    def bval(self, k, u, v, w):
        pts, wts = self.cs.face_rules[k]
        an = flux_matrix(self.cs.face_geo[k][2], self.cs.c)
        avg = 0.5 * (self.values(u, pts) + self.values(v, pts))
        return float(np.einsum("q,ab,bq,aq->", wts, an, avg,
                               self.values(w, pts)))

    def pval(self, i, j, u, v, w):
        C = self.cs.forms.C
        return sum(C[i, j, k] * self.bval(k, u, v, w)
                   for k in range(self.cs.K) if C[i, j, k] != 0.0)

    def volume_pair(self, u, v, w):
        """(p_V, p_V*) at (u, v, w)."""
        pts, wts = self.cs.vol_rule
        vw = self.cs.forms.vol_weight
        avg = 0.5 * (self.values(u, pts) + self.values(v, pts))
        gavg = 0.5 * (self.grads(u, pts) + self.grads(v, pts))
        pv = vw * float(np.einsum("q,kab,bq,kaq->", wts, self.a_stack, avg,
                                  self.grads(w, pts)))
        pvs = vw * float(np.einsum("q,kab,kbq,aq->", wts, self.a_stack,
                                   gavg, self.values(w, pts)))
        return pv, pvs

    def flux_grad(self, w):
        """int_E f(w) . grad w."""
        pts, wts = self.cs.vol_rule
        return float(np.einsum("q,kab,bq,kaq->", wts, self.a_stack,
                               self.values(w, pts), self.grads(w, pts)))

    def rand_coef(self, rng):
        return rng.standard_normal(3 * self.basis.n_b)

    def mirrored_self(self):
        return Extension(self.basis, self.cs.id, mirror=self.cs._wall_line)


def _check_cell_identities(probe, rng, worst):
    """Every residual is normalized by the summed magnitude of the terms
    entering the cancellation (NOT just |lhs| + |rhs|: at r = 0 several
    identities reduce to 0 = 0 where one side is exact and the other is
    quadrature roundoff, and the terms are the only meaningful scale)."""
    cs = probe.cs
    K = cs.K
    C = cs.forms.C
    E = probe.plain
    cu = probe.rand_coef(rng)
    cv = probe.rand_coef(rng)
    cw = probe.rand_coef(rng)
    u, v, w = (E, cu), (E, cv), (E, cw)

    bv = np.array([probe.bval(k, u, v, w) for k in range(K)])
    bw = np.array([probe.bval(k, w, w, w) for k in range(K)])
    bu = np.array([probe.bval(k, u, u, u) for k in range(K)])
    bvv = np.array([probe.bval(k, v, v, v) for k in range(K)])
    bdiff = np.array([probe.bval(k, u, v, (E, cu - cv)) for k in range(K)])
    babs = np.abs(bv).sum()

    # integration by parts over the cell: sum_k b_k(u,v,w) =
    # int f(avg).grad w + int div f(avg) . w
    pts, wts = cs.vol_rule
    avg = 0.5 * (probe.values(u, pts) + probe.values(v, pts))
    gavg = 0.5 * (probe.grads(u, pts) + probe.grads(v, pts))
    r1 = float(np.einsum("q,kab,bq,kaq->", wts, probe.a_stack, avg,
                         probe.grads(w, pts)))
    r2 = float(np.einsum("q,kab,kbq,aq->", wts, probe.a_stack, gavg,
                         probe.values(w, pts)))
    worst["integration-by-parts"] = max(
        worst["integration-by-parts"],
        abs(bv.sum() - r1 - r2) / (babs + abs(r1) + abs(r2) + 1e-30))

    pv, pvs = probe.volume_pair(u, v, w)
    fg = 2.0 / (K * (K - 1)) * probe.flux_grad(w)
    for i in range(K):
        for j in range(K):
            if i == j:
                continue
            csum = C[i, j] + C[j, i]
            worst["balance"] = max(
                worst["balance"],
                abs(csum @ bv - pv - pvs)
                / (np.abs(csum * bv).sum() + abs(pv) + abs(pvs) + 1e-30))
            worst["energy-preservation-1"] = max(
                worst["energy-preservation-1"],
                abs(fg - 0.5 * csum @ bw)
                / (abs(fg) + 0.5 * np.abs(csum * bw).sum() + 1e-30))
            worst["energy-preservation-2"] = max(
                worst["energy-preservation-2"],
                abs(C[i, j] @ bdiff - 0.5 * C[i, j] @ bu
                    + 0.5 * C[i, j] @ bvv)
                / (np.abs(C[i, j] * bdiff).sum()
                   + 0.5 * np.abs(C[i, j] * bu).sum()
                   + 0.5 * np.abs(C[i, j] * bvv).sum() + 1e-30))

    # consistency: sum_{i != j} p_ij = b_j at fixed arguments
    for j in range(K):
        rows = sum(C[i, j] for i in range(K) if i != j)
        worst["consistency"] = max(
            worst["consistency"],
            abs(rows @ bv - bv[j]) / (np.abs(rows * bv).sum()
                                      + abs(bv[j]) + 1e-30))

    if cs.i_star is not None:
        R = probe.mirrored_self()
        istar = cs.i_star
        # skew symmetry of the wall mirror on the wall face
        lhs = probe.bval(istar, (R, cu), (R, cu), w)
        rhs = -probe.bval(istar, u, u, (R, cw))
        worst["mirror-skew-symmetry"] = max(worst["mirror-skew-symmetry"],
                                            _rel(lhs, rhs))
        # the reflection identity of the boundary-pair forms
        bm1 = np.array([probe.bval(k, u, (R, cv), w) for k in range(K)])
        bm2 = np.array([probe.bval(k, (R, cu), v, (R, cw))
                        for k in range(K)])
        for j in range(K):
            if j == istar:
                continue
            row = C[j, istar]
            worst["reflection-identity"] = max(
                worst["reflection-identity"],
                abs(row @ bm1 + row @ bm2)
                / (np.abs(row * bm1).sum() + np.abs(row * bm2).sum()
                   + 1e-30))


def run_identity_suite(seed=0, trials=100, degrees=(0, 1, 2, 3), tol=1e-11,
                       patch=4):
    """Run every identity check `trials` times; returns IdentityResults.

    One random configuration per trial feeds all identities, cycling
    through the requested degrees."""
    rng = np.random.default_rng(seed)
    worst = {name: 0.0 for name in IDENTITIES}

    for trial in range(trials):
        r = degrees[trial % len(degrees)]
        mesh, bases, stab = random_clip_configuration(rng, n=patch, r=r)
        cs = stab.cells[0]
        probe = _CellProbe(cs, bases)
        _check_cell_identities(probe, rng, worst)

        # per-cell annihilation of the assembled blocks, normalized by
        # the magnitudes of the three cancelling groups
        field = DgField(mesh, bases, r,
                        rng.standard_normal((len(mesh.cells), 3,
                                             bases[0].n_b)))
        num = abs(cs.quadratic_form(cs.central_blocks, field))
        den = (abs(cs.quadratic_form(cs.surface_part, field))
               + abs(cs.quadratic_form(cs.volume_part, field))
               + abs(cs.quadratic_form(cs.base_part, field)) + 1e-30)
        worst["cell-annihilation"] = max(worst["cell-annihilation"],
                                         num / den)

        # global dissipativity: u^T (s_h + J^s) u >= -tol * scale
        acc = BlockAccumulator(len(mesh.cells), 3 * bases[0].n_b)
        for face in mesh.faces:
            mass = face_mass_blocks(face, bases)
            for key, blk in dissipation_face_blocks(face, bases, 1.0,
                                                    "lax-friedrichs", mass):
                acc.add(key, blk)
        S = acc.to_bsr() + stab.dissipation_matrix
        x = rng.standard_normal(S.shape[0])
        quad = float(x @ (S @ x))
        scale = float(np.abs(x) @ (abs(S) @ np.abs(x))) + 1e-30
        worst["global-dissipativity"] = max(worst["global-dissipativity"],
                                            max(0.0, -quad) / scale)

    # coefficient-level collapse of the two-face cell: p_12 = b_2
    C2 = central_coefficients(2)
    dev = max(abs(C2[0, 1] - np.array([0.0, 1.0])).max(),
              abs(C2[1, 0] - np.array([1.0, 0.0])).max())
    worst["two-face-collapse"] = dev

    # negative control: a corrupted coefficient tensor must be caught
    rng2 = np.random.default_rng(seed + 1)
    mesh, bases, stab = random_clip_configuration(rng2, n=patch, r=1)
    cs = stab.cells[0]
    probe = _CellProbe(cs, bases)
    cs.forms.C = cs.forms.C.copy()
    cs.forms.C[0, 1, 0] += 1e-3
    E = probe.plain
    cu, cv, cw = (probe.rand_coef(rng2) for _ in range(3))
    pv, pvs = probe.volume_pair((E, cu), (E, cv), (E, cw))
    corrupt = _rel(probe.pval(0, 1, (E, cu), (E, cv), (E, cw))
                   + probe.pval(1, 0, (E, cu), (E, cv), (E, cw)),
                   pv + pvs)
    worst["negative-control"] = corrupt

    results = []
    for name in IDENTITIES:
        if name == "negative-control":
            ok = worst[name] > 1e-6      # corruption must be detected
        else:
            ok = worst[name] <= tol
        results.append(IdentityResult(name, worst[name], tol, trials, ok))
    return results


def format_report(results):
    lines = []
    for res in results:
        status = "PASS" if res.ok else "FAIL"
        lines.append("%-26s %s  max residual %.3e" %
                     (res.name, status, res.residual))
    return "\n".join(lines)


def require_all(results):
    bad = [r for r in results if not r.ok]
    if bad:
        raise VerificationFailure(
            "identity checks failed: " + ", ".join(r.name for r in bad))
