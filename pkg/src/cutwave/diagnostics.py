"""Energy, error norms, filtered norms, and convergence rates."""

import csv

import numpy as np

from .quadrature import polygon_rule

__all__ = [
    "COMPONENTS", "energy", "energy_by_quadrature", "ErrorReport",
    "error_norms", "rho_sweep", "convergence_rates", "error_rows",
    "energy_rows", "write_csv",
]

COMPONENTS = ("p", "v1", "v2")


def energy(field):
    """E_h = ||u_h||_{L2}.  Orthonormal bases make this the plain
    Euclidean norm of the coefficient vector."""
    return float(np.linalg.norm(field.data))


def energy_by_quadrature(field, degree=None):
    """Same quantity through cell quadrature; the slow cross-check."""
    if degree is None:
        degree = 2 * field.r + 2
    total = 0.0
    for cell in field.mesh.cells:
        pts, wts = polygon_rule(cell.vertices, degree)
        u = field.eval(cell.id, pts)
        total += float(np.einsum("q,cq->", wts, u * u))
    return np.sqrt(total)


class ErrorReport:
    """Component-wise error norms of a field against a reference.

    l2 / linf / linf_filtered are length-3 arrays ordered like COMPONENTS;
    max_cell is the id of the cell carrying the largest pointwise error.
    """

    def __init__(self, n, r, rho_filter, l2, linf, linf_filtered, max_cell):
        self.n = n
        self.r = r
        self.rho_filter = rho_filter
        self.l2 = np.asarray(l2, dtype=float)
        self.linf = np.asarray(linf, dtype=float)
        self.linf_filtered = np.asarray(linf_filtered, dtype=float)
        self.max_cell = max_cell

    def __repr__(self):
        return ("ErrorReport(n=%s, r=%d, L2=%s, Linf=%s)"
                % (self.n, self.r, self.l2, self.linf))


def _cellwise_errors(field, exact, t):
    """Per-cell squared-L2 and pointwise-max errors, per component.

    The pointwise maximum samples the assembly quadrature points plus the
    polygon vertices (corners are where cut-cell errors peak).
    """
    mesh = field.mesh
    n_cells = len(mesh.cells)
    l2sq = np.zeros((n_cells, 3))
    pmax = np.zeros((n_cells, 3))
    degree = 2 * field.r + 2
    for cell in mesh.cells:
        pts, wts = polygon_rule(cell.vertices, degree)
        err = field.eval(cell.id, pts) - exact(pts, t)
        l2sq[cell.id] = np.einsum("q,cq->c", wts, err * err)
        verr = field.eval(cell.id, cell.vertices) - exact(cell.vertices, t)
        pmax[cell.id] = np.maximum(np.abs(err).max(axis=1),
                                   np.abs(verr).max(axis=1))
    return l2sq, pmax


def error_norms(field, exact, t=None, rho_filter=0.0, n=None):
    if t is None:
        t = field.time
    l2sq, pmax = _cellwise_errors(field, exact, t)
    alphas = np.array([c.alpha for c in field.mesh.cells])
    keep = alphas > rho_filter
    filtered = pmax[keep].max(axis=0) if keep.any() else np.zeros(3)
    return ErrorReport(
        n=n, r=field.r, rho_filter=rho_filter,
        l2=np.sqrt(l2sq.sum(axis=0)),
        linf=pmax.max(axis=0),
        linf_filtered=filtered,
        max_cell=int(pmax.max(axis=1).argmax()))


def rho_sweep(field, exact, rho_list, t=None):
    """Filtered-Linf table: [(rho, (3,) max over cells with alpha > rho)].

    Shares one error evaluation across all thresholds."""
    if t is None:
        t = field.time
    _, pmax = _cellwise_errors(field, exact, t)
    alphas = np.array([c.alpha for c in field.mesh.cells])
    out = []
    for rho in rho_list:
        keep = alphas > rho
        vals = pmax[keep].max(axis=0) if keep.any() else np.zeros(3)
        out.append((float(rho), vals))
    return out


def convergence_rates(ns, errors):
    """rate_i = log(e_i / e_{i+1}) / log(n_{i+1} / n_i); for doubled n
    this is the usual log2 ratio.  errors may be (len(ns),) or
    (len(ns), k) for per-component tables."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(ns) < 2:
        raise ValueError("need at least two resolutions")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = errors[:-1] / errors[1:]
        steps = (np.log(ns[1:] / ns[:-1]))
        if errors.ndim > 1:
            steps = steps[:, None]
        return np.log(ratio) / steps


def fit_rate(ns, errors):
    """Least-squares observed order over a whole refinement sequence
    (slope of log e against log n, negated)."""
    ns = np.asarray(ns, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(ns) < 2:
        raise ValueError("need at least two resolutions")
    return float(-np.polyfit(np.log(ns), np.log(errors), 1)[0])


def error_rows(report, label=None):
    """CSV rows (N, component, norm, value) for one report."""
    n = report.n if label is None else label
    rows = []
    for i, comp in enumerate(COMPONENTS):
        rows.append((n, comp, "l2", report.l2[i]))
        rows.append((n, comp, "linf", report.linf[i]))
        rows.append((n, comp, "linf_rho%g" % report.rho_filter,
                     report.linf_filtered[i]))
    return rows


def energy_rows(times, values):
    return [(t, "all", "energy", v) for t, v in zip(times, values)]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)
