"""Closed-form reference solutions and their L2 projection onto DG spaces.

All three waves solve d_t p + c div v = 0, d_t v + c grad p = 0 exactly
and are compatible with the boundary conditions of the scenario they
belong to (v.n = 0 on reflecting walls, periodicity on the torus).
"""

import numpy as np

from .operators import DgField
from .quadrature import polygon_rule

__all__ = [
    "ManufacturedSolution", "standing_square", "channel_wave",
    "axis_plane_wave", "project",
]


class ManufacturedSolution:
    """Vectorized reference solution: evaluate(pts (m,2), t) -> (3, m)."""

    def __init__(self, name, evaluate, c=1.0):
        self.name = name
        self._evaluate = evaluate
        self.c = c

    def __call__(self, pts, t):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return self._evaluate(pts, float(t))


def standing_square(angle, origin=None, c=1.0):
    """Standing wave on the unit square, mapped onto the rotated copy.

    Unit-square form (hatted coordinates):
      p  =  sqrt(2) pi [sin(sqrt(2) pi t) - cos(sqrt(2) pi t)]
              * cos(pi xh1) cos(pi xh2)
      v1 = -pi [cos(sqrt(2) pi t) + sin(sqrt(2) pi t)]
              * sin(pi xh1) cos(pi xh2)
      v2 = -pi [cos(...) + sin(...)] * cos(pi xh1) sin(pi xh2)

    v.n vanishes on all four edges.  Pressure maps as a scalar, velocity
    rotates with the square.  The map matches rotated_square_domain:
    x = origin + xh1 e1 + xh2 e2.
    """
    if origin is None:
        origin = np.array([np.sin(angle), 0.0])
    origin = np.asarray(origin, dtype=float)
    rot = np.array([[np.cos(angle), -np.sin(angle)],
                    [np.sin(angle), np.cos(angle)]])
    w = np.sqrt(2.0) * np.pi * c

    def evaluate(pts, t):
        xh = (pts - origin) @ rot          # = rot.T applied to rows
        cx = np.cos(np.pi * xh[:, 0])
        sx = np.sin(np.pi * xh[:, 0])
        cy = np.cos(np.pi * xh[:, 1])
        sy = np.sin(np.pi * xh[:, 1])
        p = np.sqrt(2.0) * np.pi * (np.sin(w * t) - np.cos(w * t)) * cx * cy
        amp = -np.pi * (np.cos(w * t) + np.sin(w * t))
        vh = np.stack([amp * sx * cy, amp * cx * sy])
        v = rot @ vh
        return np.vstack([p[None, :], v])

    return ManufacturedSolution("standing-square", evaluate, c)


def channel_wave(b_lo, b_hi, c=1.0):
    """Traveling plane wave along the 45-degree channel on the torus.

    p = sin(pi (x1 + x2 + m - sqrt(2) c t)), v = p (1,1)/sqrt(2), where m
    is the integer lift that moves the point's copy of the channel strip
    (b_lo < x2 - x1 + m < b_hi) back to the reference band.  Every lift
    changes x1 + x2 by m modulo 2, and the phase by a multiple of 2 pi,
    so the wave is well defined on the torus, exactly periodic over the
    channel length l = sqrt(2), and satisfies v.n = 0 on both walls.
    """
    mid = 0.5 * (b_lo + b_hi)
    d = np.array([1.0, 1.0]) / np.sqrt(2.0)

    def evaluate(pts, t):
        m = np.round(mid - (pts[:, 1] - pts[:, 0]))
        phase = np.pi * (pts[:, 0] + pts[:, 1] + m - np.sqrt(2.0) * c * t)
        p = np.sin(phase)
        return np.vstack([p, p * d[0], p * d[1]])

    return ManufacturedSolution("channel-wave", evaluate, c)


def axis_plane_wave(c=1.0):
    """Axis-aligned traveling wave on the uncut periodic torus:
    p = v1 = sin(2 pi (x1 - c t)), v2 = 0."""

    def evaluate(pts, t):
        p = np.sin(2.0 * np.pi * (pts[:, 0] - c * t))
        return np.vstack([p, p, np.zeros_like(p)])

    return ManufacturedSolution("axis-plane-wave", evaluate, c)


def project(mesh, bases, r, solution, t=0.0):
    """Cellwise L2 projection.  With orthonormal bases the coefficients
    are plain quadrature moments: data[E, comp, a] = int_E u_comp phi_a."""
    field = DgField(mesh, bases, r)
    degree = 2 * r + 2
    for cell in mesh.cells:
        pts, wts = polygon_rule(cell.vertices, degree)
        u = solution(pts, t)                       # (3, q)
        phi = bases[cell.id].eval(pts)             # (n_b, q)
        field.data[cell.id] = np.einsum("q,cq,aq->ca", wts, u, phi)
    field.time = t
    return field
