"""Exception and warning types shared across the package."""


class CutwaveError(Exception):
    """Base class for all errors raised by this package."""


class NonSquareCells(CutwaveError):
    """Background bounds and cell counts do not produce square cells."""


class GeometryDegenerate(CutwaveError):
    """Mesh construction produced an inconsistent or non-simple polygon."""


class AssumptionViolated(CutwaveError):
    """A structural mesh assumption failed; carries the validation report."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


class BasisConditioningFailure(CutwaveError):
    """Orthonormalization left a Gram residual above tolerance."""


class NonPlanarFace(CutwaveError):
    """A face that must be a straight segment is not."""


class MeshFieldMismatch(CutwaveError):
    """A coefficient field does not belong to the mesh it is used with."""


class MultipleBoundaryFaces(CutwaveError):
    """A stabilized cell has more than one reflecting face."""


class StabilizerMeshMismatch(CutwaveError):
    """Stabilizers were built for a different mesh or time step."""


class NanEncountered(CutwaveError):
    """A non-finite coefficient appeared during time integration."""

    def __init__(self, cell_id, time):
        super().__init__(
            "non-finite coefficient in cell %d at t=%.6g" % (cell_id, time))
        self.cell_id = cell_id
        self.time = time


class VerificationFailure(CutwaveError):
    """An algebraic identity check exceeded its tolerance."""


class DegenerateTriangle(UserWarning):
    """A fan triangle below the area floor was skipped during quadrature."""


class MeshWarning(UserWarning):
    """Non-fatal geometry cleanup happened during mesh construction."""
