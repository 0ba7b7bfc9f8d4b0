"""Cut-cell meshes on a Cartesian background grid.

A convex physical domain is described by half-planes {x : n.x <= d} with
outward unit normals.  Every background cell is clipped against the
half-planes (Sutherland-Hodgman); surviving polygons are the cut cells.
Polygon edges lying on grid lines are matched with the neighbor's edge to
form internal faces; edges created by a clip line become reflecting
boundary faces carrying that line's outward normal.

Conventions used throughout the package:

* cell polygons are counterclockwise; the faces of a cell are listed in
  CCW edge order starting at the polygon's first vertex;
* an internal face stores left = the cell with the smaller id and the
  unit normal pointing left -> right;
* on a periodic background, a face between wrap-around neighbors carries
  the chart offset of the right cell, i.e. a point x on the face as seen
  by the left cell appears at x + offset in the right cell's chart.
"""

import warnings

import numpy as np

from .errors import GeometryDegenerate, MeshWarning, NonSquareCells
from .quadrature import polygon_area, polygon_centroid, polygon_diameter

GRID = -1  # edge label for edges on background grid lines


# ---------------------------------------------------------------------------
# domains

def _check_unit(n):
    n = np.asarray(n, dtype=float)
    if abs(np.hypot(n[0], n[1]) - 1.0) > 1e-14:
        raise GeometryDegenerate("normal %s is not unit length" % (n,))
    return n


class HalfPlaneDomain:
    """Intersection of half-planes {x : n.x <= d}, n the outward unit normal."""

    def __init__(self, planes, area=None):
        self.normals = [_check_unit(n) for n, _ in planes]
        self.dists = [float(d) for _, d in planes]
        self.area = area  # analytic area if known, else None

    @classmethod
    def from_points(cls, pairs, area=None):
        """Build from (point on boundary, outward unit normal) pairs."""
        planes = []
        for p, n in pairs:
            n = _check_unit(n)
            planes.append((n, float(np.dot(n, p))))
        return cls(planes, area=area)

    def clip_box(self, box, h):
        """Clip a CCW box polygon; returns (vertices, wall normal per edge)."""
        verts, labels = box, [GRID] * len(box)
        eps = 1e-14 * h
        for idx, (n, d) in enumerate(zip(self.normals, self.dists)):
            verts, labels = clip_polygon(verts, labels, n, d, eps, idx)
            if verts is None:
                return None, None
        wall = [None if l == GRID else self.normals[l] for l in labels]
        return verts, wall


def rotated_square_domain(angle, origin=None):
    """Unit square rotated by `angle`, inscribed in [0, cos+sin]^2 by default."""
    c, s = np.cos(angle), np.sin(angle)
    if origin is None:
        origin = np.array([s, 0.0])
    origin = np.asarray(origin, dtype=float)
    e1 = np.array([c, s])
    e2 = np.array([-s, c])
    planes = [
        (-e1, -float(np.dot(e1, origin))),
        (e1, float(np.dot(e1, origin)) + 1.0),
        (-e2, -float(np.dot(e2, origin))),
        (e2, float(np.dot(e2, origin)) + 1.0),
    ]
    dom = HalfPlaneDomain(planes, area=1.0)
    dom.origin = origin
    dom.axes = (e1, e2)
    return dom


class ChannelDomain:
    """Periodic channel b_lo < x2 - x1 < b_hi (mod 1) on the unit torus.

    Each background cell intersects exactly one copy of the strip; a cell
    meeting two copies would produce a disconnected cut cell and raises.
    """

    def __init__(self, b_lo, b_hi):
        if not b_lo < b_hi:
            raise GeometryDegenerate("channel needs lower offset < upper")
        if b_hi - b_lo >= 1.0:
            raise GeometryDegenerate("channel covers the whole torus")
        self.b_lo = float(b_lo)
        self.b_hi = float(b_hi)
        self.area = b_hi - b_lo
        r = np.sqrt(2.0)
        self.n_up = np.array([-1.0, 1.0]) / r   # outward at tau = b_hi
        self.n_dn = np.array([1.0, -1.0]) / r   # outward at tau = b_lo

    def clip_box(self, box, h):
        tau = box[:, 1] - box[:, 0]
        k_min = int(np.floor(tau.min() - self.b_hi)) - 1
        k_max = int(np.ceil(tau.max() - self.b_lo)) + 1
        eps = 1e-14 * h
        r = np.sqrt(2.0)
        hits = []
        for k in range(k_min, k_max + 1):
            if self.b_lo + k >= tau.max() or self.b_hi + k <= tau.min():
                continue
            verts, labels = clip_polygon(box, [GRID] * len(box),
                                         self.n_up, (self.b_hi + k) / r, eps, 0)
            if verts is None:
                continue
            verts, labels = clip_polygon(verts, labels,
                                         self.n_dn, -(self.b_lo + k) / r, eps, 1)
            if verts is None:
                continue
            hits.append((verts, labels))
        if not hits:
            return None, None
        if len(hits) > 1:
            raise GeometryDegenerate(
                "background cell meets %d channel copies; refine the mesh"
                % len(hits))
        verts, labels = hits[0]
        wall = [None if l == GRID else (self.n_up if l == 0 else self.n_dn)
                for l in labels]
        return verts, wall


# ---------------------------------------------------------------------------
# polygon clipping

def clip_polygon(vertices, labels, normal, dist, eps, wall_label):
    """Sutherland-Hodgman clip of a CCW polygon by {x : n.x <= d}.

    `labels[k]` tags the outgoing edge of vertex k; edges created on the
    clip line get `wall_label`.  Vertices within `eps` of the line are
    snapped onto it.  Returns (vertices, labels), or (None, None) if the
    polygon is clipped away.
    """
    v = np.asarray(vertices, dtype=float)
    sig = v @ normal - dist
    snap = np.abs(sig) <= eps
    if np.any(snap):
        v = v - np.outer(np.where(snap, sig, 0.0), normal)
        sig = np.where(snap, 0.0, sig)
    inside = sig <= 0.0
    if inside.all():
        return v, list(labels)
    if not inside.any():
        return None, None
    out_v, out_l = [], []
    m = len(v)
    for a in range(m):
        b = (a + 1) % m
        sa, sb = sig[a], sig[b]
        if inside[a]:
            out_v.append(v[a])
            out_l.append(labels[a])
            if not inside[b]:
                t = sa / (sa - sb)
                out_v.append(v[a] + t * (v[b] - v[a]))
                out_l.append(wall_label)
        elif inside[b]:
            t = sa / (sa - sb)
            out_v.append(v[a] + t * (v[b] - v[a]))
            out_l.append(labels[a])
    return _merge_close(np.array(out_v), out_l, eps)


def _merge_close(v, labels, eps):
    """Merge consecutive vertices closer than eps; drop degenerate results."""
    keep_v, keep_l = [], []
    for k in range(len(v)):
        if keep_v and np.hypot(*(v[k] - keep_v[-1])) <= eps:
            keep_l[-1] = labels[k]
            continue
        keep_v.append(v[k])
        keep_l.append(labels[k])
    while len(keep_v) >= 2 and np.hypot(*(keep_v[-1] - keep_v[0])) <= eps:
        keep_v.pop()
        keep_l.pop()
    if len(keep_v) < 3:
        return None, None
    return np.array(keep_v), keep_l


# ---------------------------------------------------------------------------
# mesh data structures

class BackgroundMesh:
    def __init__(self, nx, ny, bounds, periodic=(False, False)):
        (x0, y0), (x1, y1) = bounds
        if nx < 1 or ny < 1 or x1 <= x0 or y1 <= y0:
            raise GeometryDegenerate("bad background mesh request")
        hx = (x1 - x0) / nx
        hy = (y1 - y0) / ny
        if abs(hx - hy) > 1e-12 * max(hx, hy):
            raise NonSquareCells("cell sizes differ: hx=%r hy=%r" % (hx, hy))
        self.nx = nx
        self.ny = ny
        self.lo = np.array([x0, y0], dtype=float)
        self.hi = np.array([x1, y1], dtype=float)
        self.h = hx
        self.periodic = tuple(bool(p) for p in periodic)

    def cell_box(self, i, j):
        a = self.lo + np.array([i, j]) * self.h
        return np.array([a, a + [self.h, 0.0], a + [self.h, self.h],
                         a + [0.0, self.h]])


def build_background_mesh(nx, ny, bounds, periodic=(False, False)):
    return BackgroundMesh(nx, ny, bounds, periodic)


class CutCell:
    __slots__ = ("id", "index", "vertices", "area", "alpha", "diameter",
                 "bbox", "face_ids")

    def __init__(self, cid, index, vertices, h):
        self.id = cid
        self.index = index
        self.vertices = vertices
        self.area = polygon_area(vertices)
        self.alpha = self.area / (h * h)
        self.diameter = polygon_diameter(vertices)
        self.bbox = (vertices.min(axis=0), vertices.max(axis=0))
        self.face_ids = []


INTERNAL = "internal"
PERIODIC = "periodic-internal"
BOUNDARY = "boundary-reflecting"


class Face:
    __slots__ = ("id", "kind", "left", "right", "a", "b", "normal",
                 "length", "offset")

    def __init__(self, fid, kind, left, right, a, b, normal, offset):
        self.id = fid
        self.kind = kind
        self.left = left
        self.right = right
        self.a = a
        self.b = b
        self.normal = normal
        self.length = float(np.hypot(*(b - a)))
        self.offset = offset

    @property
    def is_boundary(self):
        return self.right is None

    def geometry_for(self, cell_id):
        """Face endpoints/outward normal/neighbor as seen from `cell_id`.

        Returns (a, b, outward normal, neighbor id or None, offset) with the
        offset translating points from this cell's chart into the neighbor's.
        """
        if cell_id == self.left:
            return self.a, self.b, self.normal, self.right, self.offset
        if cell_id != self.right:
            raise GeometryDegenerate("cell %r not adjacent to face %d"
                                     % (cell_id, self.id))
        return (self.a + self.offset, self.b + self.offset, -self.normal,
                self.left, -self.offset)


class CutMesh:
    def __init__(self, background, cells, faces, domain_area=None):
        self.background = background
        self.cells = cells
        self.faces = faces
        self.domain_area = domain_area
        self.cell_of_bg = {c.index: c.id for c in cells}

    @property
    def h(self):
        return self.background.h

    def faces_of(self, cell_id):
        return [self.faces[f] for f in self.cells[cell_id].face_ids]

    def min_alpha(self):
        return min(c.alpha for c in self.cells)

    def total_area(self):
        return sum(c.area for c in self.cells)


# ---------------------------------------------------------------------------
# mesh construction

def build_cut_mesh(bg, domain=None, area_floor=None):
    h = bg.h
    floor = 1e-300 * h * h if area_floor is None else area_floor
    cells = []
    cell_walls = []  # per cell: wall normal or None per edge
    for j in range(bg.ny):
        for i in range(bg.nx):
            box = bg.cell_box(i, j)
            if domain is None:
                verts, wall = box, [None] * 4
            else:
                verts, wall = domain.clip_box(box, h)
            if verts is None:
                continue
            area = polygon_area(verts)
            if area <= floor:
                continue
            _check_simple_convex(verts, h)
            cells.append(CutCell(len(cells), (i, j), verts, h))
            cell_walls.append(wall)

    pair_map = _match_grid_edges(bg, cells, cell_walls)

    faces = []
    edge_face = {}
    for cell, wall in zip(cells, cell_walls):
        m = len(cell.vertices)
        for e in range(m):
            if (cell.id, e) in edge_face:
                continue
            va = cell.vertices[e]
            vb = cell.vertices[(e + 1) % m]
            if wall[e] is not None:
                f = Face(len(faces), BOUNDARY, cell.id, None, va, vb,
                         wall[e], np.zeros(2))
                faces.append(f)
                edge_face[(cell.id, e)] = f.id
                continue
            key = (cell.id, e)
            if key not in pair_map:
                continue  # dropped sliver edge
            other_cell, other_e, normal, offset, is_wrap, is_wall = pair_map[key]
            if is_wall:
                f = Face(len(faces), BOUNDARY, cell.id, None, va, vb,
                         normal, np.zeros(2))
            else:
                kind = PERIODIC if is_wrap else INTERNAL
                f = Face(len(faces), kind, cell.id, other_cell, va, vb,
                         normal, offset)
                edge_face[(other_cell, other_e)] = len(faces)
            faces.append(f)
            edge_face[(cell.id, e)] = f.id

    for cell in cells:
        m = len(cell.vertices)
        cell.face_ids = [edge_face[(cell.id, e)] for e in range(m)
                         if (cell.id, e) in edge_face]
        if len(cell.face_ids) < 2:
            raise GeometryDegenerate("cell %d kept %d faces"
                                     % (cell.id, len(cell.face_ids)))

    darea = getattr(domain, "area", None) if domain is not None else None
    if darea is None and domain is None:
        darea = (bg.hi[0] - bg.lo[0]) * (bg.hi[1] - bg.lo[1])
    return CutMesh(bg, cells, faces, domain_area=darea)


def _check_simple_convex(verts, h):
    m = len(verts)
    tol = -1e-10 * h * h
    for k in range(m):
        a = verts[k]
        b = verts[(k + 1) % m]
        c = verts[(k + 2) % m]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross < tol:
            raise GeometryDegenerate("non-convex/non-simple polygon at %s"
                                     % (verts[k],))


def _match_grid_edges(bg, cells, cell_walls):
    """Pair grid-line edges of neighboring cut cells.

    Returns {(cell, edge): (other cell, other edge, normal, offset,
    wrapped?, wall?)}; each pair is recorded under both keys with the
    left/right resolution left to the face-creation pass.  Unmatched grid
    edges become axis-normal walls when legitimate (outer box without
    periodicity, or the clip line coincides with the grid line so the
    neighbor background cell is empty) and raise otherwise.
    """
    h = bg.h
    tol = 1e-9 * h
    tiny = 1e-12 * h
    groups = {}
    for cell, wall in zip(cells, cell_walls):
        m = len(cell.vertices)
        for e in range(m):
            if wall[e] is not None:
                continue
            va = cell.vertices[e]
            vb = cell.vertices[(e + 1) % m]
            t = vb - va
            length = np.hypot(*t)
            if length == 0.0:
                continue
            n_out = np.array([t[1], -t[0]]) / length
            axis = int(np.argmax(np.abs(n_out)))
            if abs(n_out[1 - axis]) > 1e-9:
                raise GeometryDegenerate(
                    "grid-labeled edge of cell %d not axis aligned" % cell.id)
            sign = 1 if n_out[axis] > 0 else -1
            val = 0.5 * (va[axis] + vb[axis])
            k = int(round((val - bg.lo[axis]) / h))
            if abs(val - (bg.lo[axis] + k * h)) > tol:
                raise GeometryDegenerate(
                    "edge of cell %d off the grid lines" % cell.id)
            oth = 1 - axis
            lo_t = min(va[oth], vb[oth])
            hi_t = max(va[oth], vb[oth])
            n_axis = bg.nx if axis == 0 else bg.ny
            k_mod = k % n_axis if bg.periodic[axis] else k
            groups.setdefault((axis, k_mod), []).append(
                (lo_t, hi_t, sign, cell.id, e, k, length))

    cell_by_id = {c.id: c for c in cells}
    index_set = {c.index for c in cells}
    pair_map = {}
    for (axis, k_mod), group in sorted(groups.items()):
        group.sort(key=lambda r: (r[0], r[2]))
        used = [False] * len(group)
        for a_idx, ra in enumerate(group):
            if used[a_idx]:
                continue
            partner = None
            for b_idx in range(a_idx + 1, len(group)):
                rb = group[b_idx]
                if rb[0] - ra[0] > tol:
                    break
                if (not used[b_idx] and rb[2] == -ra[2]
                        and abs(rb[1] - ra[1]) <= tol):
                    partner = b_idx
                    break
            lo_t, hi_t, sign, cid, e, k, length = ra
            if partner is None:
                _handle_unmatched(bg, cell_by_id[cid], index_set, pair_map,
                                  axis, sign, k, cid, e, length, tiny)
                used[a_idx] = True
                continue
            lo2, hi2, sign2, cid2, e2, k2, len2 = group[partner]
            used[a_idx] = used[partner] = True
            n = np.zeros(2)
            n[axis] = sign
            offset = np.zeros(2)
            offset[axis] = (k2 - k) * h
            wrapped = k != k2
            pair_map[(cid, e)] = (cid2, e2, n.copy(), offset.copy(),
                                  wrapped, False)
            n2 = np.zeros(2)
            n2[axis] = sign2
            pair_map[(cid2, e2)] = (cid, e, n2, -offset, wrapped, False)
    return pair_map


def _handle_unmatched(bg, cell, index_set, pair_map, axis, sign, k,
                      cid, e, length, tiny):
    n_axis = bg.nx if axis == 0 else bg.ny
    on_outer = (not bg.periodic[axis]) and (k == 0 or k == n_axis)
    ni = list(cell.index)
    ni[axis] += sign
    if bg.periodic[axis]:
        ni[axis] %= n_axis
    neighbor_exists = tuple(ni) in index_set
    n = np.zeros(2)
    n[axis] = sign
    if on_outer or not neighbor_exists:
        pair_map[(cid, e)] = (None, None, n, np.zeros(2), False, True)
    elif length <= tiny:
        warnings.warn("dropping unmatched sliver edge (%.3e) of cell %d"
                      % (length, cid), MeshWarning)
    else:
        raise GeometryDegenerate(
            "unmatched grid edge of cell %d (axis %d, line %d, len %.3e)"
            % (cid, axis, k, length))


# ---------------------------------------------------------------------------
# classification and assumptions

class SmallCellSet:
    """Cells with alpha_E below the threshold, in ascending id order."""

    def __init__(self, alpha, ids):
        self.alpha = alpha
        self.ids = ids

    def __iter__(self):
        return iter(self.ids)

    def __len__(self):
        return len(self.ids)


def classify_small_cells(mesh, alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha threshold must be in (0, 1)")
    ids = sorted(c.id for c in mesh.cells if c.alpha < alpha)
    return SmallCellSet(alpha, ids)


class AssumptionReport:
    def __init__(self):
        self.adjacency = []     # (i) small cells with small neighbors
        self.bent_faces = []    # (ii) boundary faces failing straightness
        self.anisotropic = []   # (iii) cells with h_E^2 > rho |E|

    @property
    def ok(self):
        return not (self.adjacency or self.bent_faces or self.anisotropic)

    def __str__(self):
        if self.ok:
            return "all structural assumptions hold"
        parts = []
        if self.adjacency:
            parts.append("small cells with small neighbors: %s"
                         % self.adjacency)
        if self.bent_faces:
            parts.append("non-straight boundary faces on cells: %s"
                         % self.bent_faces)
        if self.anisotropic:
            parts.append("anisotropy bound violated on cells: %s"
                         % self.anisotropic)
        return "; ".join(parts)


def validate_assumptions(mesh, small, rho_aniso=20.0):
    report = AssumptionReport()
    members = set(small.ids)
    for cid in small.ids:
        cell = mesh.cells[cid]
        for face in mesh.faces_of(cid):
            if face.is_boundary:
                # construction yields straight segments; verify nonzero span
                if face.length <= 0.0:
                    report.bent_faces.append(cid)
                continue
            other = face.right if face.left == cid else face.left
            if other in members:
                report.adjacency.append(cid)
        if cell.diameter ** 2 > rho_aniso * cell.area:
            report.anisotropic.append(cid)
    return report


# ---------------------------------------------------------------------------
# convenience builders and dumps

def rotated_square_mesh(n, angle, origin=None, margin=0):
    """Rotated unit square inscribed in its bounding box, n cells across.

    `margin` adds empty background rings (used when the square is shifted
    off the inscribed position); h stays (cos+sin)/n.
    """
    side = np.cos(angle) + np.sin(angle)
    h = side / n
    lo = -margin * h
    hi = side + margin * h
    bg = build_background_mesh(n + 2 * margin, n + 2 * margin,
                               ((lo, lo), (hi, hi)))
    dom = rotated_square_domain(angle, origin)
    return build_cut_mesh(bg, dom)


def channel_mesh(n, b_lo, b_hi):
    """Periodic 45-degree channel on the unit torus with n^2 background cells."""
    bg = build_background_mesh(n, n, ((0.0, 0.0), (1.0, 1.0)),
                               periodic=(True, True))
    return build_cut_mesh(bg, ChannelDomain(b_lo, b_hi))


def periodic_square_mesh(n):
    """Uncut periodic unit square (no embedded geometry)."""
    bg = build_background_mesh(n, n, ((0.0, 0.0), (1.0, 1.0)),
                               periodic=(True, True))
    return build_cut_mesh(bg)


def mesh_to_csv(mesh):
    """Debug dump: one row per cell (id, i, j, alpha, area, vertices)."""
    lines = ["cell,i,j,alpha,area,vertices"]
    for c in mesh.cells:
        vtx = ";".join("%.17g %.17g" % (x, y) for x, y in c.vertices)
        lines.append("%d,%d,%d,%.17g,%.17g,%s"
                     % (c.id, c.index[0], c.index[1], c.alpha, c.area, vtx))
    return "\n".join(lines) + "\n"
