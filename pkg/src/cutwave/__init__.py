"""Cut-cell discontinuous Galerkin solver for the 2D acoustic wave system.

The pressure-velocity system u = (p, v1, v2), du/dt + div f(u) = 0, is
discretized with modal DG on a Cartesian background mesh cut by straight
reflecting walls.  Cells that are too small for the background time step
receive domain-of-dependence stabilization, so explicit SSP Runge-Kutta
marching stays stable at the uncut CFL limit.

Typical use goes through RunConfig plus one of the runner drivers, or the
``cutwave`` command line; the building blocks (meshes, bases, operators,
stabilizer) are importable on their own for experiments.
"""

from .basis import build_mesh_basis
from .config import RunConfig, apply_overrides, load_config, to_toml
from .diagnostics import (convergence_rates, energy, error_norms, fit_rate,
                          rho_sweep, write_csv)
from .errors import (AssumptionViolated, CutwaveError, NanEncountered,
                     VerificationFailure)
from .geometry import (build_cut_mesh, channel_mesh, classify_small_cells,
                       periodic_square_mesh, rotated_square_mesh,
                       validate_assumptions)
from .operators import LAX_FRIEDRICHS, ZERO, BaseOperator, DgField
from .runner import (build_scenario, channel_offsets,
                     rotated_mesh_with_min_alpha, run_channel,
                     run_convergence, run_mesh_dump, run_single, run_verify)
from .solutions import (axis_plane_wave, channel_wave, project,
                        standing_square)
from .stabilization import CellStabilizer, DodStabilizer
from .timestepping import SCHEMES, compute_dt, integrate, scheme_for_degree
from .verify import format_report, require_all, run_identity_suite
from .vtk_io import write_vtk

__version__ = "0.1.0"

__all__ = [
    "AssumptionViolated", "BaseOperator", "CellStabilizer", "CutwaveError",
    "DgField", "DodStabilizer", "LAX_FRIEDRICHS", "NanEncountered",
    "RunConfig", "SCHEMES", "VerificationFailure", "ZERO",
    "apply_overrides", "axis_plane_wave", "build_cut_mesh",
    "build_mesh_basis", "build_scenario", "channel_mesh", "channel_offsets",
    "channel_wave", "classify_small_cells", "compute_dt",
    "convergence_rates", "energy", "error_norms", "fit_rate",
    "format_report",
    "integrate", "load_config", "periodic_square_mesh", "project",
    "require_all", "rho_sweep", "rotated_mesh_with_min_alpha",
    "rotated_square_mesh", "run_channel", "run_convergence", "run_identity_suite",
    "run_mesh_dump", "run_single", "run_verify", "scheme_for_degree",
    "standing_square", "to_toml", "validate_assumptions", "write_csv",
    "write_vtk",
]
