"""ASCII VTK output of cut-cell meshes and cell-mean field values."""

import numpy as np

from .quadrature import polygon_rule

__all__ = ["write_vtk"]

VTK_POLYGON = 7


def _cell_means(field):
    means = np.zeros((len(field.mesh.cells), 3))
    for cell in field.mesh.cells:
        pts, wts = polygon_rule(cell.vertices, max(field.r, 1))
        means[cell.id] = field.eval(cell.id, pts) @ wts / cell.area
    return means


def write_vtk(field, path, title="cutwave field"):
    """Write the mesh polygons with per-cell mean (p, v1, v2) as an
    ASCII unstructured grid (legacy VTK, VTK_POLYGON cells)."""
    mesh = field.mesh
    means = _cell_means(field)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
    ]
    n_points = sum(len(c.vertices) for c in mesh.cells)
    lines.append("POINTS %d double" % n_points)
    for cell in mesh.cells:
        for x, y in cell.vertices:
            lines.append("%.17g %.17g 0" % (x, y))
    total = sum(len(c.vertices) + 1 for c in mesh.cells)
    lines.append("CELLS %d %d" % (len(mesh.cells), total))
    offset = 0
    for cell in mesh.cells:
        k = len(cell.vertices)
        lines.append(" ".join([str(k)]
                              + [str(offset + i) for i in range(k)]))
        offset += k
    lines.append("CELL_TYPES %d" % len(mesh.cells))
    lines.extend([str(VTK_POLYGON)] * len(mesh.cells))
    lines.append("CELL_DATA %d" % len(mesh.cells))
    lines.append("SCALARS pressure double 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend("%.17g" % m for m in means[:, 0])
    lines.append("VECTORS velocity double")
    lines.extend("%.17g %.17g 0" % (m1, m2) for m1, m2 in means[:, 1:])
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
