"""Quadrature rules on segments, triangles and convex polygons.

All rules are built from tensor Gauss-Legendre points.  A rule of
"degree d" integrates every polynomial of total degree <= d exactly
(up to roundoff); weights are positive and sum to the measure of the
integration domain.

Polygon rules fan-triangulate from the area centroid.  Triangles are
mapped to the unit square by the collapsed (Duffy) transformation

    x(s, t) = (1-s) v0 + s [(1-t) v1 + t v2],   |J| = 2 A s,

so the integrand picks up one extra power of s, which the point count
accounts for.
"""

import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DegenerateTriangle

_GL_CACHE = {}


def _gauss01(n):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    if n not in _GL_CACHE:
        x, w = leggauss(n)
        _GL_CACHE[n] = (0.5 * (x + 1.0), 0.5 * w)
    return _GL_CACHE[n]


def polygon_area(vertices):
    """Signed shoelace area (positive for counterclockwise order)."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def polygon_centroid(vertices):
    v = np.asarray(vertices, dtype=float)
    vn = np.roll(v, -1, axis=0)
    cross = v[:, 0] * vn[:, 1] - vn[:, 0] * v[:, 1]
    area = 0.5 * np.sum(cross)
    if area == 0.0:
        return v.mean(axis=0)
    c = np.sum((v + vn) * cross[:, None], axis=0) / (6.0 * area)
    return c


def polygon_diameter(vertices):
    v = np.asarray(vertices, dtype=float)
    d = v[:, None, :] - v[None, :, :]
    return float(np.sqrt((d ** 2).sum(axis=2)).max())


def segment_rule(p0, p1, degree):
    """Points/weights integrating degree-`degree` polynomials along a segment.

    Weights sum to the segment length.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    n = max(1, (degree + 2) // 2)
    t, w = _gauss01(n)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    length = float(np.hypot(*(p1 - p0)))
    return pts, w * length


def triangle_rule(v0, v1, v2, degree):
    """Collapsed tensor rule on the triangle (v0, v1, v2), exact to `degree`."""
    v0 = np.asarray(v0, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    # s-direction carries the Jacobian factor s -> one degree more.
    ns = max(1, (degree + 3) // 2)
    nt = max(1, (degree + 2) // 2)
    s, ws = _gauss01(ns)
    t, wt = _gauss01(nt)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    e1 = v1 - v0
    e2 = v2 - v1
    area2 = e1[0] * e2[1] - e1[1] * e2[0]  # = 2 * signed area
    pts = (np.multiply.outer(1.0 - S, v0)
           + np.multiply.outer(S * (1.0 - T), v1)
           + np.multiply.outer(S * T, v2))
    wts = W * S * area2
    return pts.reshape(-1, 2), wts.ravel()


def polygon_rule(vertices, degree):
    """Fan-triangulated rule on a convex polygon, exact to `degree`.

    Fan triangles with area below 1e-30 * diam^2 are skipped with a
    DegenerateTriangle warning; they can appear when nearly coincident
    vertices survive mesh cleanup.
    """
    v = np.asarray(vertices, dtype=float)
    if len(v) < 3:
        raise ValueError("polygon needs at least 3 vertices")
    c = polygon_centroid(v)
    diam = polygon_diameter(v)
    floor = 1e-30 * diam * diam
    pts, wts = [], []
    for k in range(len(v)):
        a, b = v[k], v[(k + 1) % len(v)]
        area = 0.5 * ((a[0] - c[0]) * (b[1] - c[1])
                      - (b[0] - c[0]) * (a[1] - c[1]))
        if abs(area) < floor:
            warnings.warn("skipping fan triangle with area %.3e" % area,
                          DegenerateTriangle)
            continue
        p, w = triangle_rule(c, a, b, degree)
        pts.append(p)
        wts.append(w)
    return np.vstack(pts), np.concatenate(wts)
