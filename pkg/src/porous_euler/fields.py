"""Source vorticities and Biot-Savart laws in the plane and outside one obstacle."""
from dataclasses import dataclass, field
import math

import numpy as np

from . import _kernels
from .conformal import as_complex, as_pairs

SOURCE_KINDS = ("circular_patch", "gaussian_bump", "blob_sum")


def gauss_legendre(n, a=0.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


@dataclass(frozen=True)
class SourceVorticity:
    """Compactly supported vorticity.

    ``circular_patch``: ``amplitude`` on the disk of ``radius``.
    ``gaussian_bump``: ``amplitude * exp(-|x-c|^2 / width^2)`` cut at ``radius``.
    ``blob_sum``: Lamb-Oseen blobs with core ``width`` at ``blobs[:, :2]``
    carrying ``blobs[:, 2]``; the support radius is ``radius`` around ``center``.
    """

    kind: str
    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    amplitude: float = 1.0
    width: float = 0.0
    blobs: np.ndarray = field(default=None, repr=False)

    @property
    def center_c(self):
        return complex(self.center[0], self.center[1])

    @property
    def total_mass(self):
        if self.kind == "circular_patch":
            return self.amplitude * math.pi * self.radius ** 2
        if self.kind == "gaussian_bump":
            return self.amplitude * math.pi * self.width ** 2 * -math.expm1(-(self.radius / self.width) ** 2)
        return float(self.blobs[:, 2].sum())

    @property
    def linf_norm(self):
        if self.kind == "blob_sum":
            return float(np.max(np.abs(self.density(self.blobs[:, :2]))))
        return abs(self.amplitude)

    @property
    def l1_norm(self):
        if self.kind == "blob_sum":
            return float(np.abs(self.blobs[:, 2]).sum())
        return abs(self.total_mass)

    def density(self, x):
        z = as_complex(x)
        r2 = np.abs(z - self.center_c) ** 2
        if self.kind == "circular_patch":
            return np.where(r2 <= self.radius ** 2, self.amplitude, 0.0)
        if self.kind == "gaussian_bump":
            return np.where(r2 <= self.radius ** 2, self.amplitude * np.exp(-r2 / self.width ** 2), 0.0)
        zb = self.blobs[:, 0] + 1j * self.blobs[:, 1]
        d2 = np.abs(z[..., None] - zb) ** 2
        return (self.blobs[:, 2] / (math.pi * self.width ** 2) * np.exp(-d2 / self.width ** 2)).sum(-1)

    def quadrature(self, n_r=24, n_theta=48):
        """Nodes (complex) and weights of a polar Gauss x trapezoid rule on the support.

        Blob sums return the blob centres and strengths.
        """
        if self.kind == "blob_sum":
            return self.blobs[:, 0] + 1j * self.blobs[:, 1], self.blobs[:, 2].copy()
        r, wr = gauss_legendre(n_r, 0.0, self.radius)
        th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
        z = self.center_c + r[:, None] * np.exp(1j * th)[None, :]
        w = (wr * r)[:, None] * np.full(n_theta, 2 * np.pi / n_theta)[None, :]
        return z.ravel(), (w * self.density(z)).ravel()


def circular_patch(center=(0.0, 0.0), radius=1.0, amplitude=1.0):
    if radius <= 0:
        raise ValueError("patch radius must be positive")
    return SourceVorticity("circular_patch", tuple(map(float, center)), float(radius), float(amplitude))


def gaussian_bump(center=(0.0, 0.0), width=0.1, amplitude=1.0, truncation=None):
    truncation = 4.0 * width if truncation is None else truncation
    if width <= 0 or truncation <= 0:
        raise ValueError("width and truncation radius must be positive")
    return SourceVorticity("gaussian_bump", tuple(map(float, center)), float(truncation),
                           float(amplitude), float(width))


def blob_sum(positions, strengths, delta):
    pos = np.asarray(positions, float).reshape(-1, 2)
    g = np.asarray(strengths, float).reshape(-1)
    if len(g) != len(pos):
        raise ValueError("one strength per blob position")
    if delta <= 0:
        raise ValueError("blob core radius must be positive")
    c = pos.mean(axis=0)
    rad = float(np.max(np.hypot(*(pos - c).T))) + 4.0 * delta
    return SourceVorticity("blob_sum", tuple(c), rad, 0.0, float(delta), np.column_stack([pos, g]))


# --------------------------------------------------------------------------
# whole-plane law


def _point_vortex_sum(z, nodes, weights, delta=0.0):
    u, v = _kernels.blob_velocity(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag),
                                  np.ascontiguousarray(nodes.real), np.ascontiguousarray(nodes.imag),
                                  np.ascontiguousarray(weights, dtype=float), float(delta))
    return u + 1j * v


def _gauss_near(f, x, n_rho=48, n_phi=128):
    """Polar rule centred at the target for a truncated Gaussian (complex velocity)."""
    c = f.center_c
    R = f.radius
    p = x - c
    D = abs(p)
    if D < R:
        phi = 2 * np.pi * np.arange(n_phi) / n_phi
        wphi = np.full(n_phi, 2 * np.pi / n_phi)
        e = np.exp(1j * phi)
        pe = (np.conj(p) * e).real
        rho_max = -pe + np.sqrt(pe * pe + R * R - D * D)
        rho0 = np.zeros(n_phi)
    else:
        t, wt = gauss_legendre(n_phi, -0.5 * np.pi, 0.5 * np.pi)
        alpha = math.asin(min(R / D, 1.0))
        phi0 = math.atan2(-p.imag, -p.real)
        phi = phi0 + alpha * np.sin(t)
        wphi = wt * alpha * np.cos(t)
        e = np.exp(1j * phi)
        pe = (np.conj(p) * e).real
        disc = np.sqrt(np.clip(pe * pe - (D * D - R * R), 0.0, None))
        rho0 = -pe - disc
        rho_max = -pe + disc
    s, ws = gauss_legendre(n_rho)
    rho = rho0[:, None] + (rho_max - rho0)[:, None] * s[None, :]
    y = x + rho * e[:, None]
    dens = f.amplitude * np.exp(-np.abs(y - c) ** 2 / f.width ** 2)
    inner = (dens * ws[None, :]).sum(1) * (rho_max - rho0)
    # K = -(1/2pi) int e_perp(phi) int f drho dphi, e_perp = i e
    return -(1j * e * inner * wphi).sum() / (2 * np.pi)


def biot_savart_plane(f, x):
    """K[f](x) = (1/2pi) int (x-y)^perp / |x-y|^2 f(y) dy for points (..., 2)."""
    z = as_complex(x)
    shape = z.shape
    z = z.ravel()
    if f.kind == "circular_patch":
        p = z - f.center_c
        r2 = np.abs(p) ** 2
        R2 = f.radius ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(r2 <= R2, 0.5 * f.amplitude * 1j * p, f.total_mass / (2 * np.pi) * 1j * p / r2)
        out[r2 == 0] = 0.0
    elif f.kind == "blob_sum":
        zb, g = f.quadrature()
        out = _point_vortex_sum(z, zb, g, f.width)
    else:
        out = np.empty(z.size, complex)
        far = np.abs(z - f.center_c) > 1.5 * f.radius
        if far.any():
            nodes, w = f.quadrature(48, 96)
            out[far] = _point_vortex_sum(z[far], nodes, w)
        for k in np.flatnonzero(~far):
            out[k] = _gauss_near(f, z[k])
    return as_pairs(out.reshape(shape))


# --------------------------------------------------------------------------
# exterior law for one obstacle


def biot_savart_exterior(cmap, f, x, n_r=32, n_theta=64):
    """Velocity outside K with tangency, curl f and zero circulation around K.

    ``cmap`` works in template coordinates (K itself); the plane part is
    the exact or adaptive whole-plane law, the remainder is smooth.
    """
    z = as_complex(x)
    shape = z.shape
    z = z.ravel()
    if not np.all(cmap.in_exterior(z, 1e-12)):
        raise ValueError("biot_savart_exterior: target inside the inclusion")
    nodes, w = f.quadrature(n_r, n_theta)
    if not np.all(cmap.in_exterior(nodes)):
        raise ValueError("biot_savart_exterior: source support meets the inclusion")
    ty = cmap.forward(nodes)
    t, dt = cmap.forward_and_derivative(z)
    acc = np.zeros(z.size, complex)
    cty = np.conj(ty)
    ident = cmap.mode == "identity"
    for lo in range(0, z.size, 512):
        sl = slice(lo, min(lo + 512, z.size))
        tt = t[sl, None]
        dd = dt[sl, None]
        g = -dd * cty[None, :] / (tt * cty[None, :] - 1.0)
        if not ident:
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = dd / (tt - ty[None, :]) - 1.0 / (z[sl, None] - nodes[None, :])
            g = g + np.where(np.isfinite(g1), g1, 0.0)
        acc[sl] = (w[None, :] * g).sum(1)
    acc = acc + f.total_mass * dt / t if f.kind != "blob_sum" else acc + w.sum() * dt / t
    rem = 1j * np.conj(acc) / (2 * np.pi)
    plane = as_complex(biot_savart_plane(f, as_pairs(z)))
    return as_pairs((plane + rem).reshape(shape))


@dataclass(frozen=True)
class SupBoundReport:
    sup_speed: float
    l1: float
    linf: float
    ratio: float


def check_sup_bound(f, n_r=401, n_theta=96):
    """Empirical C in sup|K[f]| <= C ||f||_1^(1/2) ||f||_inf^(1/2)."""
    l1, linf = f.l1_norm, f.linf_norm
    if l1 == 0.0 or linf == 0.0:
        return SupBoundReport(0.0, l1, linf, 0.0)
    r = np.linspace(0.0, 3.0 * f.radius, n_r)
    r = np.union1d(r, [f.radius])
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    z = f.center_c + r[:, None] * np.exp(1j * th)[None, :]
    u = biot_savart_plane(f, as_pairs(z.ravel()))
    sup = float(np.max(np.hypot(u[:, 0], u[:, 1])))
    return SupBoundReport(sup, l1, linf, sup / math.sqrt(l1 * linf))
