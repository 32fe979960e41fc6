"""Vortex-blob solver with exact tangency enforced by boundary source panels."""
from dataclasses import dataclass, field, replace
import logging

import numpy as np
from scipy import linalg

from . import _kernels
from .conformal import as_complex, as_pairs
from .fields import gauss_legendre
from .geometry import arclength_points

log = logging.getLogger(__name__)

MAX_UNKNOWNS = 10_000


class NumericalFailure(RuntimeError):
    """Singular systems, step-size guard violations, invalid runs."""


@dataclass(frozen=True)
class VortexState:
    """Lamb-Oseen blobs (+ optional uniform background flow)."""

    positions: np.ndarray
    strengths: np.ndarray
    delta: float
    time: float = 0.0
    background: tuple = (0.0, 0.0)
    pushed: int = 0

    @property
    def n_blobs(self):
        return len(self.strengths)

    @property
    def total_strength(self):
        return float(np.sum(self.strengths))

    def centroid(self):
        g = np.abs(self.strengths)
        if g.sum() == 0:
            return self.positions.mean(axis=0)
        return (self.positions * g[:, None]).sum(0) / g.sum()


def make_state(positions, strengths, delta, background=(0.0, 0.0)):
    pos = np.array(positions, float).reshape(-1, 2)
    g = np.array(strengths, float).reshape(-1)
    if len(g) != len(pos):
        raise ValueError("one strength per blob")
    if delta < 0:
        raise ValueError("core radius must be non-negative")
    return VortexState(pos, g, float(delta), 0.0, tuple(map(float, background)))


# --------------------------------------------------------------------------
# panels


@dataclass(frozen=True)
class PanelSystem:
    """Constant-strength source panels on every inclusion boundary.

    Unknowns: the panel strengths and one point-source strength per
    obstacle (placed at its centre).  Equations: zero normal velocity at
    every panel midpoint and zero net source (sheet plus point) per
    obstacle.  The induced field is a gradient, so the circulation around
    each obstacle vanishes identically.  The bordered matrix is square and
    LU-factored once.
    """

    layout: object
    n_panels: int
    a: np.ndarray = field(repr=False)
    b: np.ndarray = field(repr=False)
    owner: np.ndarray = field(repr=False)
    n_sub: int = 1
    lu: tuple = field(repr=False, default=None)
    rcond: float = 1.0

    @property
    def sub_a(self):
        """Sub-chord start points, ``n_sub`` per panel, all on the true boundary."""
        return self.a

    @property
    def _central(self):
        return np.arange(len(self.a) // self.n_sub) * self.n_sub + self.n_sub // 2

    @property
    def mid(self):
        """Collocation points: midpoints of each panel's central sub-chord."""
        c = self._central
        return 0.5 * (self.a[c] + self.b[c])

    @property
    def length(self):
        return np.abs(self.b - self.a).reshape(-1, self.n_sub).sum(axis=1)

    @property
    def normal(self):
        """Outward unit normal at the collocation points (boundaries are CCW)."""
        c = self._central
        t = self.b[c] - self.a[c]
        return -1j * t / np.abs(t)

    @property
    def n_obstacles(self):
        return self.layout.n_incl

    @property
    def sources(self):
        c = self.layout.centers
        return c[:, 0] + 1j * c[:, 1]

    def source_velocity(self, z, lam):
        if lam.size == 0:
            return np.zeros(z.shape, complex)
        d = z[:, None] - self.sources[None, :]
        return (lam[None, :] / (2 * np.pi * np.conj(d))).sum(1)

    def solve_rhs(self, un):
        """Strengths for prescribed external normal velocity ``un`` at midpoints."""
        P = len(self.a) // self.n_sub
        rhs = np.concatenate([-np.asarray(un, float), np.zeros(self.n_obstacles)])
        sol = linalg.lu_solve(self.lu, rhs)
        return sol[:P], sol[P:]

    def induced(self, z, sigma, lam):
        """Complex velocity of the panels and auxiliary sources at points z."""
        if len(self.a) == 0:
            return np.zeros(z.shape, complex)
        u, v = _kernels.panel_velocity(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag),
                                       self.a, self.b, np.repeat(sigma, self.n_sub))
        return u + 1j * v + self.source_velocity(z, lam)


def _panel_nodes(shape, n, cluster, n_sub=1):
    v = (np.arange(n * n_sub + 1) / n_sub + 0.5) / n
    u = v - cluster / (4 * np.pi) * np.sin(4 * np.pi * v)
    return arclength_points(shape, u)


def assemble_panels(layout, n_panels=64, cluster=0.0, n_sub=1):
    """Panels on each inclusion.

    ``cluster`` in [0, 1) refines the panels near the lateral points
    (+-1, 0) where neighbouring inclusions face each other.  Clustering
    sharpens the single-obstacle field but biases the flux through narrow
    gaps, so it is off by default.  Each panel is
    a chain of ``n_sub`` (odd) chords inscribed in the true boundary.
    """
    if n_sub < 1 or n_sub % 2 == 0:
        raise ValueError("n_sub must be a positive odd integer")
    if n_panels < 16:
        raise ValueError("need at least 16 panels per obstacle")
    if not 0.0 <= cluster < 1.0:
        raise ValueError("cluster must lie in [0, 1)")
    n_obs = layout.n_incl
    n_unk = n_obs * (n_panels + 1)
    if n_unk > MAX_UNKNOWNS:
        raise NumericalFailure(
            f"{n_unk} unknowns exceed the dense-solve limit of {MAX_UNKNOWNS}; "
            "use fewer panels per obstacle or a smaller layout")
    if n_obs == 0:
        e = np.zeros(0, complex)
        return PanelSystem(layout, n_panels, e, e, np.zeros(0, int), n_sub)
    tmpl = _panel_nodes(layout.shape, n_panels, cluster, n_sub)
    h = 0.5 * layout.eps
    c = layout.centers[:, 0] + 1j * layout.centers[:, 1]
    nodes = c[:, None] + h * tmpl[None, :]
    a = nodes[:, :-1].ravel()
    b = nodes[:, 1:].ravel()
    owner = np.repeat(np.arange(n_obs), n_panels)
    ps = PanelSystem(layout, n_panels, a, b, owner, n_sub)
    mid, nrm, ln = ps.mid, ps.normal, ps.length
    P = len(owner)
    M = np.zeros((P + n_obs, P + n_obs))
    M[:P, :P] = _kernels.panel_normal_matrix(mid, nrm, a, b, n_sub, ps._central)
    d = mid[:, None] - c[None, :]
    M[:P, P:] = (np.conj(1.0 / (2 * np.pi * np.conj(d))) * nrm[:, None]).real
    # net-source rows, scaled to O(1) entries
    perim = np.bincount(owner, weights=ln)
    scale = n_panels / perim
    M[P + owner, np.arange(P)] = ln * scale[owner]
    M[P + np.arange(n_obs), P + np.arange(n_obs)] = scale
    lu = linalg.lu_factor(M, check_finite=False)
    anorm = np.abs(M).sum(axis=0).max()
    rcond, info = linalg.lapack.dgecon(lu[0], anorm, norm="1")
    if not np.isfinite(rcond) or rcond < 1e-14:
        raise NumericalFailure(f"panel system singular: condition estimate {1 / max(rcond, 1e-300):.3e}")
    return replace(ps, lu=lu, rcond=float(rcond))


def panel_count(panels):
    return len(panels.owner)


# --------------------------------------------------------------------------
# velocity


def _blob_field(state, z):
    p = state.positions
    u, v = _kernels.blob_velocity(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag),
                                  np.ascontiguousarray(p[:, 0]), np.ascontiguousarray(p[:, 1]),
                                  np.ascontiguousarray(state.strengths), state.delta)
    return u + 1j * v + complex(*state.background)


def solve_strengths(state, panels):
    """(sigma, lambda) making the total field tangent to every inclusion."""
    if len(panels.a) == 0:
        return np.zeros(0), np.zeros(0)
    ext = _blob_field(state, panels.mid)
    un = (ext * np.conj(panels.normal)).real
    return panels.solve_rhs(un)


def _velocity(state, panels, z, strengths=None):
    vel = _blob_field(state, z)
    if len(panels.a):
        sigma, lam = solve_strengths(state, panels) if strengths is None else strengths
        vel = vel + panels.induced(z, sigma, lam)
    return vel


def velocity_total(state, panels, x):
    """Velocity at points (..., 2): blobs + background + panels."""
    z = as_complex(x)
    shape = z.shape
    return as_pairs(_velocity(state, panels, z.ravel()).reshape(shape))


def tangency_residual(state, panels, strengths=None):
    """max |u.n| / max |u| over the collocation points."""
    if len(panels.a) == 0:
        return 0.0
    # evaluate just on the fluid side of each panel (the sheet's normal velocity jumps)
    z = panels.mid + 1e-12 * panels.length * panels.normal
    vel = _velocity(state, panels, z, strengths)
    un = np.abs((vel * np.conj(panels.normal)).real)
    return float(un.max() / max(np.abs(vel).max(), 1e-300))


def interaction_energy(state):
    """Point-vortex interaction energy -(1/2pi) sum_{i<j} G_i G_j ln|x_i - x_j|."""
    z = state.positions[:, 0] + 1j * state.positions[:, 1]
    g = state.strengths
    i, j = np.triu_indices(len(g), 1)
    return float(-(g[i] * g[j] * np.log(np.abs(z[i] - z[j]))).sum() / (2 * np.pi))


# --------------------------------------------------------------------------
# time stepping


def _wall_distance(layout, z):
    if layout.n_incl == 0:
        return np.full(z.shape, np.inf)
    k, r = layout.nearest_center(as_pairs(z))
    rmax = float(np.max(np.abs(layout.shape.sample_boundary(512))))
    return np.maximum(r - 0.5 * layout.eps * rmax, 0.0)


def _push_out(state, layout, z):
    """Move blobs found inside an inclusion to the boundary plus delta/2 outward."""
    bad = ~layout.in_fluid(as_pairs(z))
    n_bad = int(bad.sum())
    if n_bad == 0:
        return z, 0
    shape = layout.shape
    tmpl = shape.sample_boundary(4096)
    h = 0.5 * layout.eps
    k, _ = layout.nearest_center(as_pairs(z[bad]))
    c = layout.centers[k, 0] + 1j * layout.centers[k, 1]
    loc = (z[bad] - c) / h
    j = np.argmin(np.abs(loc[:, None] - tmpl[None, :]), axis=1)
    p = tmpl[j]
    e = 1e-7
    gx = shape.level(p.real + e, p.imag) - shape.level(p.real - e, p.imag)
    gy = shape.level(p.real, p.imag + e) - shape.level(p.real, p.imag - e)
    n = (gx + 1j * gy) / np.abs(gx + 1j * gy)
    z = z.copy()
    z[bad] = c + h * p + 0.5 * state.delta * n
    log.info("pushed %d blob(s) out of inclusions at t=%.6g", n_bad, state.time)
    return z, n_bad


def step_rk4(state, panels, dt):
    """One classical RK4 step; the panel strengths are re-solved at every stage.

    Step guard: dt |u_k| <= 0.2 max(min(d, delta), distance of blob k to the
    nearest inclusion), so no blob can cross a gap in one step.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    lay = panels.layout
    z0 = state.positions[:, 0] + 1j * state.positions[:, 1]

    def f(z):
        s = replace(state, positions=as_pairs(z))
        return _velocity(s, panels, z)

    k1 = f(z0)
    if lay.n_incl:
        lim = 0.2 * np.maximum(min(lay.dist, state.delta if state.delta > 0 else lay.dist),
                               _wall_distance(lay, z0))
        worst = np.max(dt * np.abs(k1) / lim)
        if worst > 1.0:
            raise NumericalFailure(f"step guard violated by a factor {worst:.3g}; reduce dt below {dt / worst:.3e}")
    k2 = f(z0 + 0.5 * dt * k1)
    k3 = f(z0 + 0.5 * dt * k2)
    k4 = f(z0 + dt * k3)
    z = z0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    pushed = 0
    if lay.n_incl:
        z, pushed = _push_out(state, lay, z)
    return replace(state, positions=as_pairs(z), time=state.time + dt, pushed=state.pushed + pushed)


def step_adaptive(state, panels, dt, max_halvings=8):
    """Advance by dt, splitting into halves wherever the step guard trips.

    Returns the new state and the number of RK4 substeps taken.
    """
    try:
        return step_rk4(state, panels, dt), 1
    except NumericalFailure:
        if max_halvings <= 0:
            raise
    state, n1 = step_adaptive(state, panels, 0.5 * dt, max_halvings - 1)
    state, n2 = step_adaptive(state, panels, 0.5 * dt, max_halvings - 1)
    return state, n1 + n2


def run_steps(state, panels, dt, n_steps, callback=None, adaptive=False):
    for n in range(n_steps):
        if adaptive:
            state, _ = step_adaptive(state, panels, dt)
        else:
            state = step_rk4(state, panels, dt)
        if callback is not None:
            callback(n + 1, state)
    if state.n_blobs and state.pushed > 0.01 * state.n_blobs * max(n_steps, 1):
        raise NumericalFailure(f"run invalid: {state.pushed} wall pushes exceed 1% of blob-steps")
    return state


# --------------------------------------------------------------------------
# diagnostics


def _check_path(layout, pts, what):
    if layout.n_incl and not np.all(layout.in_fluid(as_pairs(pts))):
        raise ValueError(f"{what} intersects an inclusion")


def gate_segments(layout, y=0.0, x_range=(0.0, 1.0)):
    """Gap segments of the row at height y; the whole x_range without inclusions."""
    if layout.n_incl == 0:
        return [((x_range[0], y), (x_range[1], y))]
    h = 0.5 * layout.eps
    row = layout.centers[np.abs(layout.centers[:, 1] - y) < 1e-12]
    row = row[np.argsort(row[:, 0])]
    hw = float(layout.shape.half_width(0.0))
    return [((row[i, 0] + h * hw, y), (row[i + 1, 0] - h * hw, y)) for i in range(len(row) - 1)]


def flux_gates(state, panels, segments, n_quad=16, strengths=None):
    """Signed flux through each oriented segment (normal = tangent turned left)."""
    t, w = gauss_legendre(n_quad)
    p0 = np.array([complex(*s[0]) for s in segments])
    p1 = np.array([complex(*s[1]) for s in segments])
    pts = p0[:, None] + (p1 - p0)[:, None] * t[None, :]
    samp = p0[:, None] + (p1 - p0)[:, None] * np.linspace(0, 1, 203)[None, 1:-1]
    _check_path(panels.layout, samp.ravel(), "gate")
    vel = _velocity(state, panels, pts.ravel(), strengths).reshape(pts.shape)
    tang = (p1 - p0) / np.abs(p1 - p0)
    nrm = 1j * tang
    un = (vel * np.conj(nrm[:, None])).real
    return (un * w[None, :]).sum(1) * np.abs(p1 - p0)


def flux_gate(state, panels, gate, n_quad=16):
    return float(flux_gates(state, panels, [gate], n_quad)[0])


def circulation_loop(state, panels, loop, n_quad=8, strengths=None):
    """Counter-clockwise line integral of u along a closed polyline (vertices (M, 2))."""
    v = as_complex(np.asarray(loop, float))
    if abs(v[0] - v[-1]) == 0:
        v = v[:-1]
    a, b = v, np.roll(v, -1)
    t, w = gauss_legendre(n_quad)
    pts = a[:, None] + (b - a)[:, None] * t[None, :]
    samp = a[:, None] + (b - a)[:, None] * np.linspace(0, 1, 9)[None, :]
    _check_path(panels.layout, samp.ravel(), "loop")
    vel = _velocity(state, panels, pts.ravel(), strengths).reshape(pts.shape)
    dz = (b - a)[:, None]
    return float(((vel * np.conj(dz)).real * w[None, :]).sum())


def circle_loop(center, radius, m=512):
    th = 2 * np.pi * np.arange(m) / m
    return np.stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)], -1)


def cell_loop(layout, k, n_side=32):
    """Closed polyline around inclusion k along its cell box.

    The box sides run through the middle of the neighbouring gaps and
    vertices are graded toward each side's midpoint, where the gap is.
    """
    cx, cy = layout.centers[k]
    hx = 0.5 * layout.pitch_x
    hy = 0.5 * layout.pitch_y if layout.n_rows > 1 else layout.eps
    t = np.linspace(-1.0, 1.0, n_side + 1)[:-1]
    g = np.sign(t) * np.abs(t) ** 3
    right = (cx + hx) + 1j * (cy + hy * g)
    top = (cx - hx * g) + 1j * (cy + hy)
    left = (cx - hx) + 1j * (cy - hy * g)
    bottom = (cx + hx * g) + 1j * (cy - hy)
    return as_pairs(np.concatenate([right, top, left, bottom]))
