"""Scenario drivers: mesh setup, time loops, and CSV/VTK output.

Each public run_* function takes a RunConfig, writes its artifacts into
config.resolved_out_dir(), and returns the in-memory results so tests can
assert on them without re-parsing the files.
"""

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .basis import build_mesh_basis
from .config import RunConfig
from .diagnostics import (COMPONENTS, convergence_rates, energy, energy_rows,
                          error_norms, error_rows, rho_sweep, write_csv)
from .errors import AssumptionViolated
from .geometry import (channel_mesh, classify_small_cells,
                       periodic_square_mesh, rotated_square_mesh,
                       validate_assumptions)
from .operators import BaseOperator
from .solutions import axis_plane_wave, channel_wave, project, standing_square
from .stabilization import DodStabilizer
from .timestepping import SCHEMES, compute_dt, integrate, scheme_for_degree
from .verify import format_report, run_identity_suite
from .vtk_io import write_vtk

ERROR_HEADER = ("n", "component", "norm", "value")
TRACE_HEADER = ("t", "component", "norm", "value")
RATE_HEADER = ("n", "component", "norm", "rate")
SMALL_HEADER = ("n", "cell", "alpha", "K", "eta", "capacity", "family",
                "basis_defect")


def channel_offsets(n, min_alpha):
    """Wall offsets for the 45-degree channel that produce corner slivers
    of relative volume min_alpha.

    A wall x2 - x1 = k*h passes exactly through background corners;
    pulling it away by eps leaves right triangles with legs eps at every
    corner along the diagonal, i.e. alpha = eps^2 / (2 h^2).
    """
    h = 1.0 / n
    k1 = int(round(0.3 * n))
    k2 = int(round(0.7 * n))
    eps = h * np.sqrt(2.0 * min_alpha)
    return k1 * h - eps, k2 * h + eps


def build_scenario(config, n=None):
    """Mesh, exact solution, and validated small-cell set for one resolution."""
    n = config.n_list()[0] if n is None else n
    if config.scenario == "channel":
        b_lo, b_hi = channel_offsets(n, config.min_alpha)
        mesh = channel_mesh(n, b_lo, b_hi)
        exact = channel_wave(b_lo, b_hi, config.c)
    elif config.scenario == "custom":
        # uncut baseline: periodic unit square, axis-aligned traveling wave
        mesh = periodic_square_mesh(n)
        exact = axis_plane_wave(config.c)
    else:
        angle = np.radians(config.angle_degrees)
        mesh = rotated_square_mesh(n, angle)
        exact = standing_square(angle, c=config.c)
    small = classify_small_cells(mesh, config.alpha)
    report = validate_assumptions(mesh, small)
    if not report.ok:
        raise AssumptionViolated(report)
    return mesh, exact, small


def assemble(config, mesh, small):
    """Bases, dt, scheme, and the combined semi-discrete operator.

    Returns (bases, dt, scheme, rhs) with rhs(u) = -(A_base + A_dod) u.
    """
    bases = build_mesh_basis(mesh, config.r)
    dt = compute_dt(mesh.h, config.r, config.c, config.cfl_factor)
    scheme = SCHEMES[config.scheme] if config.scheme \
        else scheme_for_degree(config.r)
    base = BaseOperator(mesh, bases, config.c, config.dissipation)
    stab = DodStabilizer(mesh, bases, small, dt, config.c, config.dissipation)
    full = (base.matrix + stab.matrix).tobsr(blocksize=base.matrix.blocksize)

    def rhs(u):
        return -(full @ u)

    return bases, dt, scheme, rhs, stab


def small_cell_rows(n, stab):
    # the basis orthonormality defect stands in for a conditioning report:
    # precision loss on slivers shows up there first
    return [(n, row["cell"], row["alpha"], row["K"], row["eta"],
             row["capacity"], row["family"], stab.bases[row["cell"]].defect)
            for row in stab.diagnostics()]


def _out_dir(config):
    path = config.resolved_out_dir()
    os.makedirs(path, exist_ok=True)
    return path


# ---------------------------------------------------------------------------
# convergence study

def run_single(config, n, out=None, tag=None):
    """One resolution: project, march to t_end, measure errors.

    Returns a dict with the error report, the rho sweep, small-cell
    diagnostics rows, and step metadata.
    """
    mesh, exact, small = build_scenario(config, n)
    bases, dt, scheme, rhs, stab = assemble(config, mesh, small)
    field = project(mesh, bases, config.r, exact, t=0.0)
    steps = integrate(field, rhs, dt, config.t_end, scheme)
    report = error_norms(field, exact, rho_filter=min(config.rho_filter),
                         n=n)
    sweep = rho_sweep(field, exact, config.rho_filter)
    if out is not None:
        name = tag if tag is not None else "n%03d" % n
        write_vtk(field, os.path.join(out, "fields_%s.vtk" % name))
    return {
        "n": n,
        "dt": dt,
        "steps": steps,
        "scheme": scheme.name,
        "report": report,
        "sweep": sweep,
        "small": small_cell_rows(n, stab),
        "min_alpha": mesh.min_alpha(),
    }


def _single_worker(args):
    config_values, n, out = args
    return run_single(RunConfig(**config_values), n, out)


def run_convergence(config):
    """Refinement sweep; writes errors.csv, rates.csv, smallcells.csv and
    one VTK snapshot per resolution.  Returns (results, rates) where rates
    maps component -> L2 rate array between consecutive resolutions.
    """
    out = _out_dir(config)
    ns = config.n_list()
    if config.threads > 1 and len(ns) > 1:
        jobs = [(config.to_dict(), n, out) for n in ns]
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_single_worker, jobs))
    else:
        results = [run_single(config, n, out) for n in ns]

    err_rows = []
    small_rows = []
    for res in results:
        err_rows.extend(error_rows(res["report"]))
        for rho, linf in res["sweep"]:
            if rho == res["report"].rho_filter:
                continue  # already emitted by error_rows
            for comp, value in zip(COMPONENTS, linf):
                err_rows.append((res["n"], comp, "linf_rho%g" % rho, value))
        small_rows.extend(res["small"])
    write_csv(os.path.join(out, "errors.csv"), ERROR_HEADER, err_rows)
    write_csv(os.path.join(out, "smallcells.csv"), SMALL_HEADER, small_rows)

    rate_rows = []
    rates = {}
    if len(ns) > 1:
        l2 = np.array([res["report"].l2 for res in results])
        linf = np.array([res["report"].linf for res in results])
        l2_rates = convergence_rates(ns, l2)
        linf_rates = convergence_rates(ns, linf)
        for k, comp in enumerate(COMPONENTS):
            rates[comp] = l2_rates[:, k]
            for i in range(len(ns) - 1):
                rate_rows.append((ns[i + 1], comp, "l2", l2_rates[i, k]))
                rate_rows.append((ns[i + 1], comp, "linf", linf_rates[i, k]))
    write_csv(os.path.join(out, "rates.csv"), RATE_HEADER, rate_rows)
    return results, rates


# ---------------------------------------------------------------------------
# long-time channel run

def run_channel(config):
    """March the channel wave to t_end, recording energy and the L-inf
    error trace on an evenly spaced snapshot schedule.

    Writes energy.csv, errors.csv (time-keyed), smallcells.csv, and
    initial/final VTK snapshots.  Returns a dict with the series.
    """
    out = _out_dir(config)
    n = config.n_list()[0]
    mesh, exact, small = build_scenario(config, n)
    bases, dt, scheme, rhs, stab = assemble(config, mesh, small)
    field = project(mesh, bases, config.r, exact, t=0.0)
    write_vtk(field, os.path.join(out, "fields_t0.vtk"))

    times = np.linspace(0.0, config.t_end, config.snapshots)
    energies = [energy(field)]
    trace_rows = []
    snap_reports = []

    def record(t):
        report = error_norms(field, exact, n=n)
        snap_reports.append((t, report))
        trace_rows.extend(error_rows(report, label="%.10g" % t))

    record(0.0)
    steps = 0
    for t_snap in times[1:]:
        steps += integrate(field, rhs, dt, t_snap, scheme)
        energies.append(energy(field))
        record(field.time)

    write_csv(os.path.join(out, "energy.csv"),
              ("t", "component", "norm", "value"),
              energy_rows(times, energies))
    write_csv(os.path.join(out, "errors.csv"), TRACE_HEADER, trace_rows)
    write_csv(os.path.join(out, "smallcells.csv"), SMALL_HEADER,
              small_cell_rows(n, stab))
    write_vtk(field, os.path.join(out, "fields_final.vtk"))

    energies = np.array(energies)
    return {
        "n": n,
        "dt": dt,
        "steps": steps,
        "times": times,
        "energies": energies,
        "drift": float(np.max(np.abs(energies - energies[0])) / energies[0]),
        "reports": snap_reports,
        "min_alpha": mesh.min_alpha(),
    }


# ---------------------------------------------------------------------------
# algebraic verification and mesh inspection

def run_verify(config, trials=100):
    """Exact-identity suite; writes verify.txt and returns (results, text).

    Callers decide how to react to failures (the command line maps them to
    a dedicated exit code via require_all)."""
    out = _out_dir(config)
    results = run_identity_suite(seed=config.seed, trials=trials)
    text = format_report(results)
    with open(os.path.join(out, "verify.txt"), "w") as fh:
        fh.write(text + "\n")
    return results, text


def run_mesh_dump(config):
    """Geometry-only inspection: mesh.csv with every cell and
    smallcells.csv with stabilization diagnostics."""
    out = _out_dir(config)
    n = config.n_list()[0]
    mesh, _, small = build_scenario(config, n)
    rows = []
    for cell in mesh.cells:
        n_bdry = sum(1 for f in mesh.faces_of(cell.id) if f.is_boundary)
        rows.append((cell.id, cell.alpha, cell.area,
                     len(cell.face_ids), n_bdry, int(cell.id in small.ids)))
    write_csv(os.path.join(out, "mesh.csv"),
              ("cell", "alpha", "area", "faces", "boundary_faces", "small"),
              rows)
    bases = build_mesh_basis(mesh, config.r)
    dt = compute_dt(mesh.h, config.r, config.c, config.cfl_factor)
    stab = DodStabilizer(mesh, bases, small, dt, config.c,
                         config.dissipation)
    write_csv(os.path.join(out, "smallcells.csv"), SMALL_HEADER,
              small_cell_rows(n, stab))
    return mesh, small


# ---------------------------------------------------------------------------
# targeted sliver placement for the rotated square

def rotated_mesh_with_min_alpha(n, angle, alpha_target, gap_alpha=None,
                                window=(0.01, 1.01), alpha=0.1):
    """Shift the rotated square along x until its smallest cut cell has
    relative volume close to alpha_target.

    A wall at perpendicular distance d from a background grid corner cuts
    off a right triangle of area d^2 / sin(2*angle), so for each
    (corner, wall) pair the shift that lands that corner exactly on the
    target distance is linear and explicit.  Candidates are tried in order
    of increasing |shift| and verified on the rebuilt mesh; gap_alpha, if
    given, additionally requires every *other* cell to stay above it.
    Origins where a cell below the stabilization threshold `alpha` touches
    the wall on two faces (a small corner cell) are rejected, since the
    stabilizer handles at most one reflecting face per cell.

    Returns (mesh, origin, alpha_min).
    """
    side = np.cos(angle) + np.sin(angle)
    h = side / n
    cg, sg = np.cos(angle), np.sin(angle)
    e1 = np.array([cg, sg])
    e2 = np.array([-sg, cg])
    origin0 = np.array([sg, 0.0])
    d_target = h * np.sqrt(alpha_target * np.sin(2.0 * angle))

    ticks = np.arange(0, n + 1) * h
    gx, gy = np.meshgrid(ticks, ticks)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    # (inward normal, offset, d(distance)/d(shift)) for the four walls
    walls = [
        (e2, -float(e2 @ origin0), sg),
        (-e2, float(e2 @ origin0) + 1.0, -sg),
        (e1, -float(e1 @ origin0), -cg),
        (-e1, float(e1 @ origin0) + 1.0, cg),
    ]
    cands = []
    for normal, offset, rate in walls:
        d0 = pts @ normal + offset
        shifts = (d_target - d0) / rate
        keep = np.abs(shifts) < 0.45 * h
        cands.extend(float(s) for s in shifts[keep])
    cands.sort(key=abs)

    for s in cands:
        origin = origin0 + np.array([s, 0.0])
        try:
            mesh = rotated_square_mesh(n, angle, origin=origin, margin=1)
        except Exception:
            continue
        alphas = np.sort([c.alpha for c in mesh.cells])
        a_min = float(alphas[0])
        if not window[0] * alpha_target <= a_min <= window[1] * alpha_target:
            continue
        if gap_alpha is not None:
            others = alphas[alphas > window[1] * alpha_target]
            if others.size and others[0] < gap_alpha:
                continue
        corner_small = any(
            c.alpha < alpha
            and sum(1 for f in mesh.faces_of(c.id) if f.is_boundary) > 1
            for c in mesh.cells)
        if corner_small:
            continue
        return mesh, origin, a_min
    raise ValueError("no shift of the rotated square reaches alpha=%g at n=%d"
                     % (alpha_target, n))
