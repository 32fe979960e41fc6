"""Hot loops: blob sums, panel influence and per-cell source sums.

Every kernel exists twice, a numba version (``*_nb``) and a numpy version
(``*_np``).  The public names are bound to one of them at import time
according to :data:`porous_euler._jit.USE_NUMBA`.
"""
import math

import numpy as np

from ._jit import USE_NUMBA, njit, numba

TWO_PI = 2.0 * math.pi
_CHUNK = 1024

if numba is not None:
    prange = numba.prange
else:  # pragma: no cover
    prange = range


# --------------------------------------------------------------------------
# regularized point vortices


def blob_velocity_np(tx, ty, sx, sy, gam, delta):
    tx = np.asarray(tx, float)
    ty = np.asarray(ty, float)
    u = np.zeros(tx.shape)
    v = np.zeros(tx.shape)
    if sx.size == 0:
        return u, v
    for lo in range(0, tx.size, _CHUNK):
        hi = min(lo + _CHUNK, tx.size)
        dx = tx[lo:hi, None] - sx[None, :]
        dy = ty[lo:hi, None] - sy[None, :]
        r2 = dx * dx + dy * dy
        with np.errstate(divide="ignore", invalid="ignore"):
            fac = gam[None, :] / (TWO_PI * r2)
            if delta > 0.0:
                fac = fac * -np.expm1(-r2 / (delta * delta))
        fac[r2 == 0.0] = 0.0
        u[lo:hi] = -(dy * fac).sum(axis=1)
        v[lo:hi] = (dx * fac).sum(axis=1)
    return u, v


@njit(parallel=True, fastmath=False)
def blob_velocity_nb(tx, ty, sx, sy, gam, delta):
    n = tx.size
    m = sx.size
    u = np.zeros(n)
    v = np.zeros(n)
    inv_d2 = 1.0 / (delta * delta) if delta > 0.0 else 0.0
    for i in prange(n):
        su = 0.0
        sv = 0.0
        for j in range(m):
            dx = tx[i] - sx[j]
            dy = ty[i] - sy[j]
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                continue
            fac = gam[j] / (TWO_PI * r2)
            if delta > 0.0:
                fac *= -math.expm1(-r2 * inv_d2)
            su -= dy * fac
            sv += dx * fac
        u[i] = su
        v[i] = sv
    return u, v


# --------------------------------------------------------------------------
# constant-strength source panels


def panel_velocity_np(tx, ty, a, b, sigma):
    """Velocity at targets from source panels [a_j, b_j] (complex) of strength sigma_j."""
    z = np.asarray(tx, float) + 1j * np.asarray(ty, float)
    u = np.zeros(z.shape)
    v = np.zeros(z.shape)
    if a.size == 0:
        return u, v
    e = (b - a) / np.abs(b - a)
    coef = sigma / (2.0 * np.pi * e)
    for lo in range(0, z.size, _CHUNK):
        hi = min(lo + _CHUNK, z.size)
        zz = z[lo:hi, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = (coef[None, :] * np.log((zz - a[None, :]) / (zz - b[None, :]))).sum(axis=1)
        u[lo:hi] = w.real
        v[lo:hi] = -w.imag
    return u, v


@njit(parallel=True)
def panel_velocity_nb(tx, ty, a, b, sigma):
    n = tx.size
    m = a.size
    u = np.zeros(n)
    v = np.zeros(n)
    coef = np.empty(m, dtype=np.complex128)
    for j in range(m):
        e = (b[j] - a[j]) / abs(b[j] - a[j])
        coef[j] = sigma[j] / (2.0 * math.pi * e)
    for i in prange(n):
        z = complex(tx[i], ty[i])
        w = 0j
        for j in range(m):
            w += coef[j] * np.log((z - a[j]) / (z - b[j]))
        u[i] = w.real
        v[i] = -w.imag
    return u, v


def panel_normal_matrix_np(mid, normal, a, b, m, self_sub):
    """A[i, j]: normal velocity at mid_i from unit strength on panel j.

    Panel j is the chain of sub-chords ``a[j*m:(j+1)*m] -> b[...]`` sharing
    one strength.  The sub-chord ``self_sub[i]`` carries collocation point
    i at its midpoint and contributes the one-sided limit 1/2.
    """
    n = mid.size
    n_pan = a.size // m
    e = (b - a) / np.abs(b - a)
    A = np.zeros((n, n_pan))
    for lo in range(0, n, 256):
        hi = min(lo + 256, n)
        zz = mid[lo:hi, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.log((zz - a[None, :]) / (zz - b[None, :])) / (2.0 * np.pi * e[None, :])
        un = (np.conj(w) * np.conj(normal[lo:hi, None])).real
        rows = np.arange(hi - lo)
        un[rows, self_sub[lo:hi]] = 0.5
        A[lo:hi] = un.reshape(hi - lo, n_pan, m).sum(axis=2)
    return A


@njit(parallel=True)
def panel_normal_matrix_nb(mid, normal, a, b, m, self_sub):
    n = mid.size
    n_sub = a.size
    n_pan = n_sub // m
    A = np.zeros((n, n_pan))
    coef = np.empty(n_sub, dtype=np.complex128)
    for s in range(n_sub):
        e = (b[s] - a[s]) / abs(b[s] - a[s])
        coef[s] = 1.0 / (2.0 * math.pi * e)
    for i in prange(n):
        z = mid[i]
        nc = normal[i].conjugate()
        for s in range(n_sub):
            if s == self_sub[i]:
                val = 0.5
            else:
                w = coef[s] * np.log((z - a[s]) / (z - b[s]))
                val = (w.conjugate() * nc).real
            A[i, s // m] += val
    return A


# --------------------------------------------------------------------------
# per-cell source sums for the corrected velocity and its decomposition


def cell_sums_np(x, tx, dtx, y, ty, w, logc):
    """Source sums at cell targets.

    Returns ``psi_p, psi_e, w1, w2`` (real) and ``kc, uec, w3c, w4c``
    (complex), all without the 1/(2 pi) factor.  Velocities follow from
    ``i * kc`` (plane), ``i * uec`` (exterior law), ``i * w3c`` and
    ``i * conj(dtx) * w4c``.
    """
    n = x.size
    out_r = np.zeros((4, n))
    out_c = np.zeros((4, n), dtype=complex)
    tys = 1.0 / np.conj(ty)
    for lo in range(0, n, _CHUNK):
        hi = min(lo + _CHUNK, n)
        xx = x[lo:hi, None]
        txx = tx[lo:hi, None]
        dd = dtx[lo:hi, None]
        dxy = xx - y[None, :]
        dt = txx - ty[None, :]
        ds = txx - tys[None, :]
        l_xy = 0.5 * np.log(dxy.real ** 2 + dxy.imag ** 2)
        l_t = 0.5 * np.log(dt.real ** 2 + dt.imag ** 2)
        l_s = 0.5 * np.log(ds.real ** 2 + ds.imag ** 2)
        l_x = 0.5 * np.log(txx.real ** 2 + txx.imag ** 2)
        ww = w[None, :]
        out_r[0, lo:hi] = (ww * l_xy).sum(1)
        out_r[1, lo:hi] = (ww * (logc + l_t + l_x - l_s)).sum(1)
        out_r[2, lo:hi] = (ww * (l_xy - l_t - logc)).sum(1)
        out_r[3, lo:hi] = (ww * (l_s - l_x)).sum(1)
        inv_xy = 1.0 / np.conj(dxy)
        out_c[0, lo:hi] = (ww * inv_xy).sum(1)
        out_c[1, lo:hi] = (ww * np.conj(dd * (1.0 / dt + 1.0 / txx - 1.0 / ds))).sum(1)
        out_c[2, lo:hi] = (ww * (inv_xy - np.conj(dd) / np.conj(dt))).sum(1)
        out_c[3, lo:hi] = (ww * (1.0 / np.conj(ds) - 1.0 / np.conj(txx))).sum(1)
    return out_r[0], out_r[1], out_r[2], out_r[3], out_c[0], out_c[1], out_c[2], out_c[3]


@njit(parallel=True)
def cell_sums_nb(x, tx, dtx, y, ty, w, logc):
    n = x.size
    q = y.size
    psi_p = np.zeros(n)
    psi_e = np.zeros(n)
    w1 = np.zeros(n)
    w2 = np.zeros(n)
    kc = np.zeros(n, dtype=np.complex128)
    uec = np.zeros(n, dtype=np.complex128)
    w3c = np.zeros(n, dtype=np.complex128)
    w4c = np.zeros(n, dtype=np.complex128)
    tys = np.empty(q, dtype=np.complex128)
    for j in range(q):
        tys[j] = 1.0 / ty[j].conjugate()
    for i in prange(n):
        xi = x[i]
        ti = tx[i]
        di = dtx[i]
        l_x = 0.5 * math.log(ti.real * ti.real + ti.imag * ti.imag)
        a0 = 0.0
        a1 = 0.0
        a2 = 0.0
        a3 = 0.0
        c0 = 0j
        c1 = 0j
        c2 = 0j
        c3 = 0j
        for j in range(q):
            dxy = xi - y[j]
            dt = ti - ty[j]
            ds = ti - tys[j]
            l_xy = 0.5 * math.log(dxy.real * dxy.real + dxy.imag * dxy.imag)
            l_t = 0.5 * math.log(dt.real * dt.real + dt.imag * dt.imag)
            l_s = 0.5 * math.log(ds.real * ds.real + ds.imag * ds.imag)
            wj = w[j]
            a0 += wj * l_xy
            a1 += wj * (logc + l_t + l_x - l_s)
            a2 += wj * (l_xy - l_t - logc)
            a3 += wj * (l_s - l_x)
            inv_xy = 1.0 / dxy.conjugate()
            c0 += wj * inv_xy
            c1 += wj * (di * (1.0 / dt + 1.0 / ti - 1.0 / ds)).conjugate()
            c2 += wj * (inv_xy - di.conjugate() / dt.conjugate())
            c3 += wj * (1.0 / ds.conjugate() - 1.0 / ti.conjugate())
        psi_p[i] = a0
        psi_e[i] = a1
        w1[i] = a2
        w2[i] = a3
        kc[i] = c0
        uec[i] = c1
        w3c[i] = c2
        w4c[i] = c3
    return psi_p, psi_e, w1, w2, kc, uec, w3c, w4c


if USE_NUMBA:
    blob_velocity = blob_velocity_nb
    panel_velocity = panel_velocity_nb
    panel_normal_matrix = panel_normal_matrix_nb
    cell_sums = cell_sums_nb
else:
    blob_velocity = blob_velocity_np
    panel_velocity = panel_velocity_np
    panel_normal_matrix = panel_normal_matrix_np
    cell_sums = cell_sums_np

BACKEND = "numba" if USE_NUMBA else "numpy"
