import csv

import numpy as np
import pytest

from cutwave.basis import build_mesh_basis
from cutwave.diagnostics import (COMPONENTS, convergence_rates, energy,
                                 energy_by_quadrature, error_norms, error_rows,
                                 fit_rate, rho_sweep, write_csv)
from cutwave.geometry import channel_mesh, periodic_square_mesh
from cutwave.operators import DgField
from cutwave.solutions import axis_plane_wave, project


def test_energy_is_the_l2_norm_of_the_field():
    mesh = periodic_square_mesh(4)
    bases = build_mesh_basis(mesh, 1)
    field = DgField(mesh, bases, 1)
    rng = np.random.default_rng(0)
    field.data = rng.standard_normal(field.data.shape)
    # orthonormal modes: coefficient norm == function L2 norm
    assert energy(field) == pytest.approx(np.linalg.norm(field.data))
    assert energy_by_quadrature(field) == pytest.approx(energy(field),
                                                        rel=1e-12)


def test_error_norms_vanish_on_the_exact_projection():
    mesh = periodic_square_mesh(5)
    bases = build_mesh_basis(mesh, 2)

    def poly(pts, t):
        return np.vstack([pts[:, 0], pts[:, 1] ** 2, 0 * pts[:, 0] + 2.0])

    field = project(mesh, bases, 2, poly)
    report = error_norms(field, poly, t=0.0, n=5)
    assert report.l2.max() < 1e-13
    assert report.linf.max() < 1e-12
    assert report.n == 5 and report.r == 2


def test_error_norms_see_a_known_perturbation():
    mesh = periodic_square_mesh(4)
    bases = build_mesh_basis(mesh, 1)
    sol = axis_plane_wave()
    field = project(mesh, bases, 1, sol, t=0.0)
    # bump one cell's mean pressure by delta: L2 error ~= delta * sqrt(|E|)
    delta = 0.25
    cell = mesh.cells[5]
    phi0 = bases[5].eval(np.array([cell.vertices.mean(axis=0)]))[0, 0]
    base = error_norms(field, sol).l2[0]
    field.data[5, 0, 0] += delta / phi0
    report = error_norms(field, sol)
    expect = np.hypot(base, delta * np.sqrt(cell.area))
    assert report.l2[0] == pytest.approx(expect, rel=1e-2)
    assert report.max_cell == 5


def test_rho_sweep_is_monotone_in_the_threshold():
    # the filtered max over {alpha > rho} can only shrink as rho grows
    h = 0.1
    eps = h * np.sqrt(2e-6)
    mesh = channel_mesh(10, 3 * h - eps, 7 * h + eps)
    bases = build_mesh_basis(mesh, 1)
    field = DgField(mesh, bases, 1)
    rng = np.random.default_rng(3)
    field.data = rng.standard_normal(field.data.shape)

    def zero(pts, t):
        return np.zeros((3, len(pts)))

    rhos = [0.0, 1e-7, 1e-4, 1e-2, 0.5]
    sweep = rho_sweep(field, zero, rhos)
    for (r1, v1), (r2, v2) in zip(sweep, sweep[1:]):
        assert np.all(v1 >= v2 - 1e-15)
    # slivers dominate this random field: filtering must bite
    assert sweep[0][1].max() > sweep[-1][1].max()


def test_convergence_rates_recover_synthetic_order():
    ns = [10, 20, 40]
    errors = 3.0 * np.asarray(ns, float) ** -2.5
    rates = convergence_rates(ns, errors)
    np.testing.assert_allclose(rates, 2.5, rtol=1e-12)
    assert fit_rate(ns, errors) == pytest.approx(2.5, rel=1e-12)
    table = np.stack([errors, 7.0 * np.asarray(ns, float) ** -1.0], axis=1)
    rates2 = convergence_rates(ns, table)
    np.testing.assert_allclose(rates2[:, 0], 2.5, rtol=1e-12)
    np.testing.assert_allclose(rates2[:, 1], 1.0, rtol=1e-12)


def test_convergence_rates_need_two_points():
    with pytest.raises(ValueError):
        convergence_rates([8], [0.1])


def test_error_rows_and_csv_round_trip(tmp_path):
    mesh = periodic_square_mesh(4)
    bases = build_mesh_basis(mesh, 1)
    sol = axis_plane_wave()
    field = project(mesh, bases, 1, sol, t=0.0)
    report = error_norms(field, sol, rho_filter=1e-7, n=4)
    rows = error_rows(report)
    assert len(rows) == 9  # 3 components x (l2, linf, filtered linf)
    assert {row[1] for row in rows} == set(COMPONENTS)
    path = tmp_path / "errors.csv"
    write_csv(path, ("n", "component", "norm", "value"), rows)
    with open(path, newline="") as fh:
        parsed = list(csv.reader(fh))
    assert parsed[0] == ["n", "component", "norm", "value"]
    assert len(parsed) == 10
    for raw, row in zip(parsed[1:], rows):
        assert float(raw[3]) == pytest.approx(float(row[3]), rel=1e-15)
