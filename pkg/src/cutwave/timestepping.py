"""Explicit strong-stability-preserving Runge-Kutta time integration.

Every scheme here advances du/dt = F(u) through convex combinations of
forward-Euler substeps, which is what lets the semi-discrete energy
estimate survive time discretization for practical step sizes.  The
right-hand side is always the fully assembled linear operator, so a stage
is one sparse matvec.
"""

import numpy as np

from .errors import NanEncountered

__all__ = [
    "compute_dt", "RkScheme", "SSPRK22", "SSPRK33", "SSPRK104",
    "SCHEMES", "scheme_for_degree", "check_finite", "integrate",
]


def compute_dt(h, r, c=1.0, cfl_factor=0.25):
    """Admissible step size: dt = cfl_factor * h / ((2r+1) * c).

    h is the *background* cell width; the bound is deliberately
    independent of how small the cut fractions are -- that is the whole
    point of the stabilization.
    """
    if h <= 0 or c <= 0 or cfl_factor <= 0:
        raise ValueError("h, c and cfl_factor must be positive")
    return cfl_factor * h / ((2 * r + 1) * c)


class RkScheme:
    """An explicit SSP scheme in convex Shu-Osher form.

    `advance(u, dt, rhs)` maps a flat coefficient vector to the next time
    level.  `convex_weights` records, stage by stage, the convex weights
    of the combinations actually used; tests assert each tuple sums to 1
    with nonnegative entries.
    """

    def __init__(self, name, order, stages, advance, convex_weights):
        self.name = name
        self.order = order
        self.stages = stages
        self._advance = advance
        self.convex_weights = convex_weights

    def advance(self, u, dt, rhs):
        return self._advance(u, dt, rhs)

    def __repr__(self):
        return "RkScheme(%r, order=%d, stages=%d)" % (
            self.name, self.order, self.stages)


def _advance_ssprk22(u, dt, rhs):
    u1 = u + dt * rhs(u)
    return 0.5 * u + 0.5 * (u1 + dt * rhs(u1))


def _advance_ssprk33(u, dt, rhs):
    u1 = u + dt * rhs(u)
    u2 = 0.75 * u + 0.25 * (u1 + dt * rhs(u1))
    return (u + 2.0 * (u2 + dt * rhs(u2))) / 3.0


def _advance_ssprk104(u, dt, rhs):
    # Ketcheson's low-storage form: two registers, forward-Euler substeps
    # of size dt/6 throughout.
    q1 = u.copy()
    q2 = u.copy()
    for _ in range(5):
        q1 += (dt / 6.0) * rhs(q1)
    q2 = 0.04 * q2 + 0.36 * q1
    q1 = 15.0 * q2 - 5.0 * q1
    for _ in range(4):
        q1 += (dt / 6.0) * rhs(q1)
    return q2 + 0.6 * q1 + 0.1 * dt * rhs(q1)


SSPRK22 = RkScheme(
    "ssprk22", order=2, stages=2, advance=_advance_ssprk22,
    convex_weights=[(1.0,), (0.5, 0.5)])

SSPRK33 = RkScheme(
    "ssprk33", order=3, stages=3, advance=_advance_ssprk33,
    convex_weights=[(1.0,), (0.75, 0.25), (1.0 / 3.0, 2.0 / 3.0)])

# For the 10-stage scheme the mixing step q2 <- q2/25 + 9 q1/25 followed by
# q1 <- 15 q2 - 5 q1 equals q1 <- (3/5) q2_old + (2/5) q1, and the final
# combination carries mass 2/5 through q2 and 3/5 through the last Euler
# substep -- all convex.
SSPRK104 = RkScheme(
    "ssprk104", order=4, stages=10, advance=_advance_ssprk104,
    convex_weights=[(1.0,)] * 5 + [(0.6, 0.4)] + [(1.0,)] * 4 + [(0.4, 0.6)])

SCHEMES = {s.name: s for s in (SSPRK22, SSPRK33, SSPRK104)}


def scheme_for_degree(r):
    """Order-matched default: r <= 1 -> SSPRK22, r = 2 -> SSPRK33,
    r = 3 -> SSPRK104."""
    if r <= 1:
        return SSPRK22
    if r == 2:
        return SSPRK33
    return SSPRK104


def check_finite(u, block_size, time):
    """Raise NanEncountered identifying the first offending cell."""
    if np.all(np.isfinite(u)):
        return
    idx = int(np.flatnonzero(~np.isfinite(u))[0])
    raise NanEncountered(idx // block_size, time)


def integrate(field, rhs, dt, t_end, scheme, monitor=None):
    """March `field` in place from field.time to t_end with fixed dt.

    rhs maps a flat coefficient vector to du/dt.  The last step is
    truncated to land exactly on t_end (the operator, and hence the
    stabilization weights, are NOT rebuilt for it; a shorter step only
    loosens the capacity bound).  After every step the coefficients are
    checked for non-finite values.

    monitor, if given, is called as monitor(t, field) after each step;
    returning False stops the run early (used by blow-up watchdogs).
    Returns the number of steps taken.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    block = 3 * field.n_b
    u = field.data.reshape(-1)
    steps = 0
    t = field.time
    while t < t_end - 1e-12 * max(1.0, abs(t_end)):
        step = min(dt, t_end - t)
        u = scheme.advance(u, step, rhs)
        t += step
        steps += 1
        check_finite(u, block, t)
        field.data = u.reshape(field.data.shape)
        field.time = t
        if monitor is not None and monitor(t, field) is False:
            break
    return steps
