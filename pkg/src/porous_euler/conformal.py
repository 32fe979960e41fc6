"""Exterior conformal maps onto the exterior of the unit disk, and Green functions."""
from dataclasses import dataclass, field
import math

import numpy as np

MODES = ("identity", "ellipse_joukowski", "laurent_fit")


class ConformalFitError(RuntimeError):
    """Raised when a boundary fit misses the requested residual."""

    def __init__(self, residual, tol):
        super().__init__(f"Laurent fit residual {residual:.3e} exceeds tolerance {tol:.1e}"
                         " (increase n_modes or loosen fit_tol)")
        self.residual = residual
        self.tol = tol


def as_complex(x):
    """Accept complex arrays or real arrays with a trailing axis of length 2."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return x.astype(complex)
    x = x.astype(float)
    if x.shape[-1:] != (2,):
        raise ValueError("points must be complex or have a trailing axis of length 2")
    return x[..., 0] + 1j * x[..., 1]


def as_pairs(z):
    z = np.asarray(z, complex)
    return np.stack([z.real, z.imag], axis=-1)


@dataclass(frozen=True)
class ConformalMap:
    """Biholomorphism T: ext(K) -> ext(unit disk) with T(z) = beta z + h(z).

    For ``laurent_fit`` the map is ``z * exp(c0 + sum_k c_k (z/R)^-k)``.
    """

    mode: str
    beta: float
    h_bound: float
    shape: object = field(repr=False, default=None)
    b: float = 1.0
    coeffs: np.ndarray = field(repr=False, default=None)
    radius: float = 1.0
    fit_residual: float = 0.0

    @property
    def n_modes(self):
        return 0 if self.coeffs is None else len(self.coeffs)

    # ---- Laurent helpers -------------------------------------------------
    def _series(self, z):
        """(S, S1) with S = sum c_k u^k and S1 = sum k c_k u^k, u = R / z."""
        u = self.radius / z
        s = np.zeros_like(z)
        s1 = np.zeros_like(z)
        for k in range(self.n_modes, 0, -1):
            c = self.coeffs[k - 1]
            s = (s + c) * u
            s1 = (s1 + k * c) * u
        return s, s1

    def forward(self, z):
        z = np.asarray(z, complex)
        if self.mode == "identity":
            return z.copy()
        if self.mode == "ellipse_joukowski":
            c = math.sqrt(1.0 - self.b ** 2)
            return (z + np.sqrt(z - c) * np.sqrt(z + c)) / (1.0 + self.b)
        s, _ = self._series(z)
        return self.beta * z * np.exp(s)

    def derivative(self, z):
        """Complex derivative T'(z)."""
        z = np.asarray(z, complex)
        if self.mode == "identity":
            return np.ones_like(z)
        if self.mode == "ellipse_joukowski":
            c = math.sqrt(1.0 - self.b ** 2)
            return (1.0 + z / (np.sqrt(z - c) * np.sqrt(z + c))) / (1.0 + self.b)
        s, s1 = self._series(z)
        return self.beta * np.exp(s) * (1.0 - s1)

    def forward_and_derivative(self, z):
        z = np.asarray(z, complex)
        if self.mode != "laurent_fit":
            return self.forward(z), self.derivative(z)
        s, s1 = self._series(z)
        e = self.beta * np.exp(s)
        return z * e, e * (1.0 - s1)

    def inverse(self, w, tol=1e-15, max_iter=60):
        w = np.asarray(w, complex)
        if self.mode == "identity":
            return w.copy()
        if self.mode == "ellipse_joukowski":
            return 0.5 * ((1.0 + self.b) * w + (1.0 - self.b) / w)
        z = w / self.beta
        for _ in range(max_iter):
            t, dt = self.forward_and_derivative(z)
            step = (t - w) / dt
            z = z - step
            if np.all(np.abs(step) <= tol * np.abs(z)):
                break
        return z

    def boundary_residual(self, m=4096):
        """max | |T(z)| - 1 | over m arclength-uniform boundary points."""
        z = self.shape.sample_boundary(m, offset=0.25)
        return float(np.max(np.abs(np.abs(self.forward(z)) - 1.0)))

    def in_exterior(self, z, tol=0.0):
        z = np.asarray(z, complex)
        return self.shape.level(z.real, z.imag) >= -tol


def _h_bound(m):
    z = m.shape.sample_boundary(4096)
    rmax = float(np.max(np.abs(z)))
    th = 2 * np.pi * (np.arange(256) + 0.5) / 256
    shells = np.geomspace(1.01 * rmax, 1e3, 24)[:, None] * np.exp(1j * th)[None, :]
    pts = np.concatenate([z, shells.ravel()])
    h = np.abs(m.forward(pts) - m.beta * pts)
    return float(np.max(h)) * (1.0 + 1e-6) + 1e-14


def _fit_laurent(shape, n_modes, n_samples):
    z = shape.sample_boundary(n_samples)
    radius = float(np.min(np.abs(z)))
    u = radius / z
    cols = [np.ones(n_samples)]
    uk = np.ones_like(u)
    for _ in range(n_modes):
        uk = uk * u
        cols.append(uk.real)
        cols.append(-uk.imag)
    A = np.stack(cols, axis=1)
    rhs = -np.log(np.abs(z))
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    c0 = sol[0]
    coeffs = sol[1::2] + 1j * sol[2::2]
    return math.exp(c0), coeffs, radius


def build_map(shape, n_modes=64, n_samples=None, fit_tol=1e-6):
    """Exterior map for ``shape``.

    Disk: identity.  Ellipse: closed-form Joukowski.  Otherwise a Laurent
    fit on ``n_samples`` (default ``8 * n_modes``, at least 512) arclength
    uniform boundary points; raises :class:`ConformalFitError` when the
    off-sample boundary residual exceeds ``fit_tol``.
    """
    if shape.kind == "disk":
        m = ConformalMap("identity", 1.0, 0.0, shape)
        return m
    if shape.kind == "ellipse":
        m = ConformalMap("ellipse_joukowski", 2.0 / (1.0 + shape.b), 0.0, shape, b=shape.b)
        if shape.b == 1.0:
            return ConformalMap("identity", 1.0, 0.0, shape)
        return ConformalMap(m.mode, m.beta, _h_bound(m), shape, b=shape.b)
    if n_modes < 1:
        raise ValueError("n_modes must be positive")
    n_samples = max(8 * n_modes, 512) if n_samples is None else int(n_samples)
    if n_samples < 4 * n_modes:
        raise ValueError("need at least 4 boundary samples per mode")
    beta, coeffs, radius = _fit_laurent(shape, n_modes, n_samples)
    m = ConformalMap("laurent_fit", beta, 0.0, shape, coeffs=coeffs, radius=radius)
    res = m.boundary_residual()
    if res > fit_tol:
        raise ConformalFitError(res, fit_tol)
    return ConformalMap("laurent_fit", beta, _h_bound(m), shape, coeffs=coeffs,
                        radius=radius, fit_residual=res)


def reflect(y):
    """Inversion y / |y|^2 in the unit circle; points as (..., 2) arrays or complex."""
    cplx = np.iscomplexobj(y)
    z = as_complex(y)
    if np.any(z == 0):
        raise ValueError("cannot reflect the origin")
    r = 1.0 / np.conj(z)
    return r if cplx else as_pairs(r)


def green(cmap, x, y):
    """Dirichlet Green function of ext(K), negative inside, zero on the boundary."""
    zx = as_complex(x)
    zy = as_complex(y)
    if np.any(zx == zy):
        raise ValueError("green function is singular at x = y")
    if not (np.all(cmap.in_exterior(zx, 1e-12)) and np.all(cmap.in_exterior(zy, 1e-12))):
        raise ValueError("green function needs points outside the inclusion")
    a = cmap.forward(zx)
    b = cmap.forward(zy)
    return np.log(np.abs(a - b) / np.abs(a * np.conj(b) - 1.0)) / (2.0 * np.pi)


@dataclass(frozen=True)
class MapEstimates:
    """Empirical constants of the rescaled map T_eps(x) = T(2 (x - z) / eps).

    ``lip_forward`` is eps * Lip(T_eps), ``lip_inverse`` is Lip(T_eps^-1) / eps,
    ``c1``/``c2`` bound eps |T_eps(x)| / r on circles |x - z| = r, and
    ``c3``/``c4`` bound |x - z| / (eps (r + 1)) on preimages of |w| = r + 1.
    """

    eps: float
    lip_forward: float
    lip_inverse: float
    c1: float
    c2: float
    c3: float
    c4: float


def verify_map_estimates(cmap, eps, n_theta=128, seed=0):
    h = 0.5 * eps
    th = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    rings = np.array([1.0, 1.02, 1.1, 1.3, 1.7, 2.5, 5.0, 20.0, 100.0])
    w = rings[:, None] * np.exp(1j * th)[None, :]
    x = h * cmap.inverse(w)
    tw = cmap.forward(x / h)
    # neighbour pairs on each ring and across rings, plus random pairs
    pairs_a = [x[:, :-1].ravel(), x[:-1, :].ravel()]
    pairs_b = [x[:, 1:].ravel(), x[1:, :].ravel()]
    ta = [tw[:, :-1].ravel(), tw[:-1, :].ravel()]
    tb = [tw[:, 1:].ravel(), tw[1:, :].ravel()]
    rng = np.random.default_rng(seed)
    flat_x, flat_t = x.ravel(), tw.ravel()
    i = rng.integers(0, flat_x.size, 4000)
    j = rng.integers(0, flat_x.size, 4000)
    keep = i != j
    pairs_a.append(flat_x[i[keep]])
    pairs_b.append(flat_x[j[keep]])
    ta.append(flat_t[i[keep]])
    tb.append(flat_t[j[keep]])
    xa, xb = np.concatenate(pairs_a), np.concatenate(pairs_b)
    wa, wb = np.concatenate(ta), np.concatenate(tb)
    dx = np.abs(xa - xb)
    dw = np.abs(wa - wb)
    lip_f = float(np.max(dw / dx)) * eps
    lip_i = float(np.max(dx / dw)) / eps

    rmax = float(np.max(np.abs(cmap.shape.sample_boundary(2048))))
    r = h * np.geomspace(rmax * 1.0001, 2e3, 40)
    circ = r[:, None] * np.exp(1j * th)[None, :]
    q1 = eps * np.abs(cmap.forward(circ / h)) / r[:, None]

    rr = np.geomspace(1e-3, 1e3, 40)
    ww = (rr[:, None] + 1.0) * np.exp(1j * th)[None, :]
    xx = h * cmap.inverse(ww)
    q2 = np.abs(xx) / (eps * (rr[:, None] + 1.0))
    return MapEstimates(eps, lip_f, lip_i, float(q1.max()), float(q1.min()),
                        float(q2.max()), float(q2.min()))
