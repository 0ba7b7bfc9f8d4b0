import csv
import math
import os

import numpy as np
import pytest

from cutwave.config import RunConfig
from cutwave.errors import AssumptionViolated
from cutwave.geometry import channel_mesh
from cutwave.runner import (build_scenario, channel_offsets,
                            rotated_mesh_with_min_alpha, run_channel,
                            run_convergence, run_mesh_dump, run_single,
                            run_verify)
from cutwave.solutions import axis_plane_wave, channel_wave, standing_square


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_channel_offsets_hit_requested_min_alpha():
    for n, target in ((10, 1e-5), (25, 1e-9)):
        b_lo, b_hi = channel_offsets(n, target)
        mesh = channel_mesh(n, b_lo, b_hi)
        # clipping arithmetic perturbs the tiny triangle slightly; the
        # placement formula itself is exact
        assert abs(mesh.min_alpha() / target - 1.0) < 1e-4
        small = [c for c in mesh.cells
                 if c.area / mesh.h ** 2 < 2.0 * target]
        assert len(small) == 2 * n  # one sliver per corner on both walls


def test_build_scenario_selects_solution_family():
    cfg = RunConfig(scenario="channel", n=10, min_alpha=1e-5)
    mesh, exact, small = build_scenario(cfg)
    assert type(exact).__name__ == type(channel_wave(0.3, 0.7)).__name__
    assert len(small.ids) == 20

    cfg = RunConfig(scenario="custom", n=8)
    mesh, exact, small = build_scenario(cfg)
    assert len(mesh.cells) == 64
    assert not any(f.is_boundary for f in mesh.faces)
    assert type(exact).__name__ == type(axis_plane_wave()).__name__
    assert len(small.ids) == 0

    cfg = RunConfig(scenario="convergence", n=12, angle_degrees=35.0)
    mesh, exact, small = build_scenario(cfg)
    angle = math.radians(35.0)
    assert type(exact).__name__ == type(standing_square(angle)).__name__
    assert abs(mesh.total_area() - 1.0) < 1e-12


def test_build_scenario_rejects_adjacent_small_cells():
    cfg = RunConfig(scenario="channel", n=8, alpha=0.5)
    cfg.min_alpha = 1e-5
    # force a band whose ends are thin enough that neighbors are small too
    from cutwave import runner
    orig = runner.channel_offsets
    runner.channel_offsets = lambda n, a: (0.30, 0.32)
    try:
        with pytest.raises(AssumptionViolated):
            build_scenario(cfg)
    finally:
        runner.channel_offsets = orig


def test_run_single_writes_fields_and_reports(tmp_path):
    cfg = RunConfig(scenario="convergence", n=8, r=1, t_end=0.05,
                    out_dir=str(tmp_path))
    res = run_single(cfg, 8, out=str(tmp_path))
    assert res["n"] == 8 and res["steps"] > 0
    assert res["scheme"] == "ssprk22"
    report = res["report"]
    assert report.l2.shape == (3,)
    assert np.all(np.isfinite(report.l2)) and report.l2.max() < 1.0
    assert res["min_alpha"] > 0
    assert (tmp_path / "fields_n008.vtk").exists()
    # sweep is over the configured rho ladder
    assert [rho for rho, _ in res["sweep"]] == cfg.rho_filter


def test_run_convergence_outputs_and_rates(tmp_path):
    cfg = RunConfig(scenario="convergence", n=[6, 12], r=1, t_end=0.1,
                    out_dir=str(tmp_path))
    results, rates = run_convergence(cfg)
    assert [res["n"] for res in results] == [6, 12]
    for name in ("errors.csv", "rates.csv", "smallcells.csv"):
        assert (tmp_path / name).exists()
    rows = read_csv(tmp_path / "rates.csv")
    assert rows[0] == ["n", "component", "norm", "rate"]
    assert all(row[0] == "12" for row in rows[1:])
    # a degree-1 run on a doubling pair should already show order > 1
    assert min(rates["p"]) > 1.0
    err_rows = read_csv(tmp_path / "errors.csv")
    norms = {row[2] for row in err_rows[1:] if row[0] == "6"}
    assert {"l2", "linf"} <= norms
    assert sum(1 for s in norms if s.startswith("linf_rho")) == \
        len(cfg.rho_filter)


def test_run_convergence_is_deterministic_across_workers(tmp_path):
    outs = []
    for threads, sub in ((1, "a"), (3, "b")):
        out = tmp_path / sub
        cfg = RunConfig(scenario="convergence", n=[6, 9], r=1, t_end=0.05,
                        out_dir=str(out), threads=threads)
        run_convergence(cfg)
        outs.append((out / "errors.csv").read_bytes())
    assert outs[0] == outs[1]


def test_run_channel_tracks_energy(tmp_path):
    cfg = RunConfig(scenario="channel", n=10, r=1, t_end=0.2,
                    min_alpha=1e-5, snapshots=5, dissipation="zero",
                    out_dir=str(tmp_path))
    res = run_channel(cfg)
    assert res["energies"].shape == (5,)
    assert np.all(np.isfinite(res["energies"]))
    assert res["drift"] < 1e-3
    assert (tmp_path / "energy.csv").exists()
    assert (tmp_path / "fields_t0.vtk").exists()
    assert (tmp_path / "fields_final.vtk").exists()
    rows = read_csv(tmp_path / "energy.csv")
    assert len(rows) == 1 + 5
    times = [float(row[0]) for row in rows[1:]]
    np.testing.assert_allclose(times, [0.0, 0.05, 0.1, 0.15, 0.2],
                               atol=1e-12)
    # lax-friedrichs run on the same mesh must not gain energy
    cfg2 = cfg.replace(dissipation="lax-friedrichs",
                       out_dir=str(tmp_path / "lf"))
    res2 = run_channel(cfg2)
    diffs = np.diff(res2["energies"])
    assert np.all(diffs <= 1e-12 * res2["energies"][0])


def test_run_verify_short(tmp_path):
    cfg = RunConfig(scenario="verify-forms", out_dir=str(tmp_path))
    results, text = run_verify(cfg, trials=3)
    assert all(res.ok for res in results)
    assert (tmp_path / "verify.txt").read_text() == text + "\n"


def test_run_mesh_dump(tmp_path):
    cfg = RunConfig(scenario="channel", n=10, min_alpha=1e-5,
                    out_dir=str(tmp_path))
    mesh, small = run_mesh_dump(cfg)
    rows = read_csv(tmp_path / "mesh.csv")
    assert len(rows) == 1 + len(mesh.cells)
    small_rows = read_csv(tmp_path / "smallcells.csv")
    assert len(small_rows) == 1 + len(small.ids)
    flagged = [row for row in rows[1:] if row[-1] == "1"]
    assert len(flagged) == len(small.ids)


def test_rotated_mesh_search_hits_target_with_gap():
    angle = math.radians(35.0)
    mesh, origin, amin = rotated_mesh_with_min_alpha(20, angle, 1e-9,
                                                     gap_alpha=1e-7)
    assert abs(amin - 1e-9) < 1e-11 * 1e-9 + 1e-11
    assert 0.01e-9 <= amin <= 1.01e-9
    assert abs(mesh.min_alpha() - amin) < 1e-16
    alphas = sorted(c.area / mesh.h ** 2 for c in mesh.cells)
    gap = [a for a in alphas if a > 1.01e-9]
    assert min(gap) > 1e-7  # frozen search: next cut is ~6.3e-4
    assert abs(origin[0] - 0.5711027) < 1e-4 and origin[1] == 0.0


def test_rotated_mesh_search_reports_unreachable_target():
    with pytest.raises(ValueError, match="alpha"):
        rotated_mesh_with_min_alpha(3, math.radians(35.0), 1e-9,
                                    gap_alpha=0.5)
