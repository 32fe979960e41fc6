"""Cell cutoffs, the corrected velocity v^eps and its distance to the plane law."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .conformal import as_complex, as_pairs
from .fields import biot_savart_plane, gauss_legendre
from .geometry import smoothstep7, smoothstep7_deriv

CUTOFF_KINDS = ("square_case", "segment_case")


def profile(s):
    """Non-increasing C^3 profile: 1 for s <= 0, 0 for s >= 1."""
    return 1.0 - smoothstep7(s)


def profile_deriv(s):
    return -smoothstep7_deriv(s)


@dataclass(frozen=True)
class CutoffFamily:
    """Per-cell cutoff, evaluated in coordinates relative to the cell centre."""

    kind: str
    eps: float
    dist: float
    shape: object = field(repr=False, default=None)

    @property
    def gamma(self):
        return self.shape.gamma

    @property
    def rho2(self):
        return self.shape.rho2

    @property
    def half_box(self):
        """(hx, hy) half sizes of the cell box."""
        h = 0.5 * (self.eps + self.dist)
        return (h, h) if self.kind == "square_case" else (h, self.eps)

    def lateral_width(self, x2):
        """d(x2) = d/2 + (eps/2) e(2 x2 / eps) and its derivative."""
        s = 2.0 * np.asarray(x2, float) / self.eps
        return (0.5 * self.dist + 0.5 * self.eps * self.shape.envelope(s),
                self.shape.envelope_deriv(s))

    def _parts(self, x1, x2):
        eps = self.eps
        if self.kind == "square_case":
            q1, q2 = x1 / eps, x2 / eps
            a1, a2 = 2 * np.abs(q1) - 1, 2 * np.abs(q2) - 1
            p1, p2 = profile(a1), profile(a2)
            d1 = profile_deriv(a1) * 2 * np.sign(q1) / eps
            d2 = profile_deriv(a2) * 2 * np.sign(q2) / eps
            return p1 * p2, p2 * d1, p1 * d2
        h = 0.5 * (eps + self.dist)
        av = (2 * np.abs(x2) - eps) / eps
        V = profile(av)
        dV = profile_deriv(av) * 2 * np.sign(x2) / eps
        D, dD = self.lateral_width(x2)
        b1 = (h - x1) / D
        b2 = (x1 + h) / D
        L = 1.0 - profile(b1) - profile(b2)
        g1 = profile_deriv(b1)
        g2 = profile_deriv(b2)
        dL1 = g1 / D - g2 / D
        dL2 = (g1 * b1 + g2 * b2) * dD / D
        return V * L, V * dL1, dV * L + V * dL2

    def _mask(self, x1, x2):
        hx, hy = self.half_box
        return (np.abs(x1) < hx) & (np.abs(x2) < hy)

    def value(self, x):
        x = np.asarray(x, float)
        x1, x2 = x[..., 0], x[..., 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            v, _, _ = self._parts(x1, x2)
        return np.where(self._mask(x1, x2), v, 0.0)

    def gradient(self, x):
        x = np.asarray(x, float)
        x1, x2 = x[..., 0], x[..., 1]
        with np.errstate(invalid="ignore", divide="ignore"):
            _, g1, g2 = self._parts(x1, x2)
        m = self._mask(x1, x2)
        return np.stack([np.where(m, g1, 0.0), np.where(m, g2, 0.0)], axis=-1)

    def value_and_gradient(self, x1, x2):
        with np.errstate(invalid="ignore", divide="ignore"):
            v, g1, g2 = self._parts(x1, x2)
        m = self._mask(x1, x2)
        return np.where(m, v, 0.0), np.where(m, g1, 0.0), np.where(m, g2, 0.0)


def build_cutoff(kind, eps, dist, shape):
    if kind not in CUTOFF_KINDS:
        raise ValueError(f"unknown cutoff kind {kind!r}")
    if eps <= 0 or dist <= 0:
        raise ValueError("eps and dist must be positive")
    if kind == "square_case" and dist < eps:
        raise ValueError(f"square_case needs dist >= eps (got dist={dist}, eps={eps}); use segment_case")
    return CutoffFamily(kind, float(eps), float(dist), shape)


# --------------------------------------------------------------------------
# cell quadrature


def _graded(a, b, toward_b, ratio=0.5, smallest=None, levels=None):
    """Breakpoints in [a, b] accumulating geometrically at one end."""
    L = b - a
    if L <= 0:
        return np.array([a, b])
    if levels is None:
        levels = int(np.ceil(np.log(L / smallest) / np.log(1 / ratio))) if smallest else 12
        levels = max(1, min(levels, 40))
    gaps = L * ratio ** np.arange(1, levels + 1)
    pts = b - gaps if toward_b else a + gaps
    return np.unique(np.concatenate([[a, b], pts]))


def cell_rule(cf, exclude_inclusion=True, n=8):
    """Cell-local nodes (x1, x2) and weights covering the cutoff's support.

    Tensor Gauss panels: x2 panels graded toward the inclusion's top and,
    for the segment case, toward x2 = 0 on the scale where d(x2) starts to
    grow; x1 panels split at the lateral strips and, with
    ``exclude_inclusion``, at the inclusion boundary (cut out exactly).
    """
    eps, shape = cf.eps, cf.shape
    he = 0.5 * eps
    hx, hy = cf.half_box
    top = he * shape.height
    y_lo = eps
    bps = [0.0, he, y_lo]
    if top < he:
        bps.append(top)
    bps += list(_graded(0.0, top, toward_b=True, levels=16))
    if cf.kind == "segment_case":
        if math.isinf(shape.gamma):
            bps += [he * shape.rho0, he * (shape.rho0 + 1.0) / 2]
        else:
            s_star = (cf.dist / (eps * shape.rho2)) ** (1.0 / (shape.gamma + 1.0))
            bps += list(_graded(0.0, he, toward_b=False, smallest=0.1 * he * min(s_star, 1.0)))
    b = np.unique(np.array(bps))
    b = b[(b >= 0) & (b <= y_lo)]
    b = np.unique(np.concatenate([-b, b]))
    t, wt = gauss_legendre(n)
    y2 = ((b[1:] - b[:-1])[:, None] * t[None, :] + b[:-1, None]).ravel()
    w2 = ((b[1:] - b[:-1])[:, None] * wt[None, :]).ravel()
    if cf.kind == "segment_case":
        D, _ = cf.lateral_width(y2)
    a = he * shape.half_width(2.0 * y2 / eps) if exclude_inclusion else np.zeros_like(y2)
    inner = (np.abs(y2) <= top) & (a > 0)
    X1, X2, W = [], [], []
    for k in range(y2.size):
        if cf.kind == "square_case":
            cuts = [-eps, -he, he, eps]
        else:
            cuts = [-hx, -hx + D[k], hx - D[k], hx]
        if inner[k]:
            left = [c for c in cuts if c < -a[k]] + [-a[k]]
            right = [a[k]] + [c for c in cuts if c > a[k]]
            segs = list(zip(left[:-1], left[1:])) + list(zip(right[:-1], right[1:]))
        else:
            segs = list(zip(cuts[:-1], cuts[1:]))
        for lo, hi in segs:
            if hi > lo:
                X1.append(lo + (hi - lo) * t)
                X2.append(np.full(n, y2[k]))
                W.append((hi - lo) * wt * w2[k])
    return np.concatenate(X1), np.concatenate(X2), np.concatenate(W)


def cutoff_norms(cf, n=8):
    """(||phi||_L2, ||grad phi||_L2) over one cell box."""
    x1, x2, w = cell_rule(cf, exclude_inclusion=False, n=n)
    v, g1, g2 = cf.value_and_gradient(x1, x2)
    return float(np.sqrt(np.sum(w * v * v))), float(np.sqrt(np.sum(w * (g1 * g1 + g2 * g2))))


# --------------------------------------------------------------------------
# corrected velocity


@dataclass(frozen=True)
class CorrectionField:
    layout: object
    cmap: object
    cutoff: CutoffFamily
    source: object
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def eps(self):
        return self.layout.eps

    @property
    def logc(self):
        return math.log(self.eps / (2.0 * self.cmap.beta))

    def cell_of(self, x):
        """(k, local complex coordinate) for each point; k = -1 outside every cell box."""
        z = as_complex(x)
        lay = self.layout
        if lay.n_incl == 0:
            return np.full(z.shape, -1), z
        hx, hy = self.cutoff.half_box
        x0 = lay.centers[0, 0] - hx
        i = np.floor((z.real - x0) / (2 * hx)).astype(int)
        if lay.n_rows == 1:
            j = np.zeros(z.shape, int)
        else:
            j = np.floor((z.imag + hy) / (2 * hy)).astype(int)
        ok = (i >= 0) & (i < lay.n_cols) & (j >= 0) & (j < lay.n_rows)
        k = np.where(ok, np.clip(j, 0, lay.n_rows - 1) * lay.n_cols + np.clip(i, 0, lay.n_cols - 1), -1)
        c = lay.centers[np.maximum(k, 0)]
        loc = z - (c[..., 0] + 1j * c[..., 1])
        ok &= (np.abs(loc.real) < hx) & (np.abs(loc.imag) < hy)
        return np.where(ok, k, -1), loc

    def _sums(self, k, loc):
        """Kernel sums at cell-local targets of cell k."""
        h = 0.5 * self.eps
        c = complex(*self.layout.centers[k])
        t, dt = self.cmap.forward_and_derivative(loc / h)
        ty = self.cmap.forward((self.nodes - c) / h)
        return _kernels.cell_sums(np.ascontiguousarray(loc + c), np.ascontiguousarray(t),
                                  np.ascontiguousarray(dt / h), np.ascontiguousarray(self.nodes),
                                  np.ascontiguousarray(ty), np.ascontiguousarray(self.weights), self.logc)

    def _check_fluid(self, z):
        if not np.all(self.layout.in_fluid(as_pairs(z))):
            raise ValueError("point inside an inclusion")


def build_correction(layout, source, cmap=None, kind=None, n_r=16, n_theta=32):
    """Corrected-velocity object; the source must stay clear of every cell."""
    from .conformal import build_map

    cmap = build_map(layout.shape) if cmap is None else cmap
    if kind is None:
        kind = "square_case" if layout.kind == "square" and layout.dist >= layout.eps else "segment_case"
    if layout.kind == "square" and kind == "segment_case":
        hy_needed = layout.eps
        if 2 * hy_needed > layout.eps + layout.dist + 1e-15:
            raise ValueError("segment_case cells overlap in a square layout with dist < eps")
    cf = build_cutoff(kind, layout.eps, layout.dist, layout.shape)
    nodes, w = source.quadrature(n_r, n_theta)
    field_ = CorrectionField(layout, cmap, cf, source, nodes, w)
    if layout.n_incl:
        k, _ = field_.cell_of(as_pairs(nodes))
        hx, hy = cf.half_box
        c = layout.centers
        lo = c.min(0) - [hx, hy]
        hi = c.max(0) + [hx, hy]
        sc = np.array(source.center)
        gap = np.maximum(np.maximum(lo - sc, sc - hi), 0.0)
        if np.hypot(*gap) <= source.radius or np.any(k >= 0):
            raise ValueError("source support meets the porous region")
    return field_


def correction_velocity(cfield, x):
    """v^eps at points (..., 2) via the product rule on each cell."""
    z = as_complex(x)
    shape = z.shape
    z = z.ravel()
    cfield._check_fluid(z)
    out = as_complex(biot_savart_plane(cfield.source, as_pairs(z)))
    k, loc = cfield.cell_of(z)
    for kk in np.unique(k[k >= 0]):
        sel = np.flatnonzero(k == kk)
        psi_p, psi_e, _, _, kc, uec, _, _ = cfield._sums(kk, loc[sel])
        phi, g1, g2 = cfield.cutoff.value_and_gradient(loc[sel].real, loc[sel].imag)
        K = 1j * kc / (2 * np.pi)
        ue = 1j * uec / (2 * np.pi)
        gperp = 1j * (g1 + 1j * g2)
        out[sel] = (1 - phi) * K + phi * ue + gperp * (psi_e - psi_p) / (2 * np.pi)
    return as_pairs(out.reshape(shape))


def w_terms(cfield, i, j, x):
    """The four decomposition integrals at points (..., 2) of cell (i, j).

    Returns ``w1, w2`` (scalars) and ``w3, w4`` (vectors); then
    K[f] - v^eps = (1/2pi) [grad-perp(phi) (w1 + w2) + phi (w3 + w4)].
    """
    kk = cfield.layout.index(i, j)
    z = as_complex(x)
    shape = z.shape
    z = z.ravel()
    k, loc = cfield.cell_of(z)
    if np.any(k != kk):
        raise ValueError(f"point outside cell ({i}, {j})")
    cfield._check_fluid(z)
    h = 0.5 * cfield.eps
    _, _, w1, w2, _, _, w3c, w4c = cfield._sums(kk, loc)
    dt = cfield.cmap.derivative(loc / h) / h
    w3 = 1j * w3c
    w4 = 1j * np.conj(dt) * w4c
    return (w1.reshape(shape), w2.reshape(shape), as_pairs(w3.reshape(shape)), as_pairs(w4.reshape(shape)))


def discrepancy_l2(cfield, n=8):
    """||K[f] - v^eps||_L2 over the fluid; the integrand lives on the cells only."""
    lay = cfield.layout
    if lay.n_incl == 0:
        return 0.0
    x1, x2, w = cell_rule(cfield.cutoff, exclude_inclusion=True, n=n)
    loc = x1 + 1j * x2
    phi, g1, g2 = cfield.cutoff.value_and_gradient(x1, x2)
    gperp = 1j * (g1 + 1j * g2)
    h = 0.5 * cfield.eps
    dtc = np.conj(cfield.cmap.derivative(loc / h) / h)
    keep = (phi != 0) | (g1 != 0) | (g2 != 0)
    loc, w, phi, gperp, dtc = loc[keep], w[keep], phi[keep], gperp[keep], dtc[keep]
    total = 0.0
    for kk in range(lay.n_incl):
        _, _, w1, w2, _, _, w3c, w4c = cfield._sums(kk, loc)
        diff = (gperp * (w1 + w2) + phi * (1j * w3c + 1j * dtc * w4c)) / (2 * np.pi)
        total += float(np.sum(w * (diff.real ** 2 + diff.imag ** 2)))
    return math.sqrt(total)
