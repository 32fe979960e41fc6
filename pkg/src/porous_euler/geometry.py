"""Inclusion shapes, porous layouts and gap areas."""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate, optimize

SHAPE_KINDS = ("disk", "ellipse", "superdisk", "stadium")
LAYOUT_KINDS = ("segment", "square", "thin_layer")


def smoothstep7(t):
    """7th-order smoothstep on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    return t ** 4 * (35.0 - 84.0 * t + 70.0 * t ** 2 - 20.0 * t ** 3)


def smoothstep7_deriv(t):
    t = np.asarray(t, float)
    inside = (t > 0.0) & (t < 1.0)
    tc = np.clip(t, 0.0, 1.0)
    return np.where(inside, 140.0 * tc ** 3 * (1.0 - tc) ** 3, 0.0)


@dataclass(frozen=True)
class InclusionShape:
    """Template inclusion K inside [-1, 1]^2 with (+-1, 0) on its boundary.

    ``gamma`` is the tangency exponent at the lateral points; ``rho0``,
    ``rho1``, ``rho2`` are the flatness constants fitted on construction.
    """

    kind: str
    gamma: float
    rho0: float
    rho1: float
    rho2: float
    b: float = 1.0
    p: float = 2.0
    height: float = 1.0
    area: float = math.pi
    perimeter: float = 2.0 * math.pi

    # ---- membership -----------------------------------------------------
    def level(self, x, y):
        """Signed level function, negative inside, zero on the boundary."""
        x = np.abs(np.asarray(x, float))
        y = np.abs(np.asarray(y, float))
        if self.kind == "disk":
            return np.hypot(x, y) - 1.0
        if self.kind == "ellipse":
            return np.hypot(x, y / self.b) - 1.0
        if self.kind == "superdisk":
            return (x ** self.p + y ** self.p) ** (1.0 / self.p) - 1.0
        r = 1.0 - self.rho0
        dx = np.maximum(x - self.rho0, 0.0)
        dy = np.maximum(y - self.rho0, 0.0)
        return np.hypot(dx, dy) - r

    def inside(self, x, y):
        """Closed-set membership."""
        return self.level(x, y) <= 0.0

    def half_width(self, s):
        """w(s) with K intersected with the line y=s equal to [-w, w] (0 if empty)."""
        s = np.abs(np.asarray(s, float))
        with np.errstate(invalid="ignore"):
            if self.kind == "disk":
                w = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
            elif self.kind == "ellipse":
                w = np.sqrt(np.clip(1.0 - (s / self.b) ** 2, 0.0, None))
            elif self.kind == "superdisk":
                w = np.clip(1.0 - s ** self.p, 0.0, None) ** (1.0 / self.p)
            else:
                r = 1.0 - self.rho0
                t = np.clip(s - self.rho0, 0.0, None)
                w = np.where(s <= self.rho0, 1.0, self.rho0 + np.sqrt(np.clip(r * r - t * t, 0.0, None)))
        return np.where(s <= self.height, w, 0.0)

    def half_width_numeric(self, s):
        """Half width by root-finding on :meth:`level` (independent of the closed forms)."""
        s = abs(float(s))
        if self.level(0.0, s) > 0.0:
            return 0.0
        return optimize.brentq(lambda x: self.level(x, s), 0.0, 1.5, xtol=1e-15)

    def lateral_gap(self, s):
        """1 - w(s), computed without cancellation for small s."""
        s = np.abs(np.asarray(s, float))
        if self.kind in ("disk", "ellipse", "superdisk"):
            b = self.b if self.kind == "ellipse" else 1.0
            p = self.p
            with np.errstate(invalid="ignore", divide="ignore"):
                g = -np.expm1(np.log1p(-np.minimum(s / b, 1.0) ** p) / p)
            return np.where(s < b, g, 1.0)
        return 1.0 - self.half_width(s)

    # ---- flatness envelope ------------------------------------------------
    def envelope(self, s, rho=None):
        """Lateral envelope e(s) with K within |x| <= 1 - e(s) on the line y = s."""
        rho = self.rho2 if rho is None else rho
        s = np.abs(np.asarray(s, float))
        if math.isinf(self.gamma):
            return rho * smoothstep7((s - self.rho0) / (1.0 - self.rho0))
        return rho * s ** (self.gamma + 1.0)

    def envelope_deriv(self, s, rho=None):
        """d e / d s (odd in s)."""
        rho = self.rho2 if rho is None else rho
        s = np.asarray(s, float)
        a = np.abs(s)
        if math.isinf(self.gamma):
            g = rho * smoothstep7_deriv((a - self.rho0) / (1.0 - self.rho0)) / (1.0 - self.rho0)
        else:
            g = rho * (self.gamma + 1.0) * a ** self.gamma
        return np.sign(s) * g

    # ---- boundary ---------------------------------------------------------
    def boundary(self, theta):
        """Point on the boundary for a parameter in [0, 1), counter-clockwise from (1, 0)."""
        theta = np.asarray(theta, float)
        t = 2.0 * np.pi * theta
        c, s = np.cos(t), np.sin(t)
        if self.kind == "disk":
            return np.stack([c, s], axis=-1)
        if self.kind == "ellipse":
            return np.stack([c, self.b * s], axis=-1)
        if self.kind == "superdisk":
            r = (np.abs(c) ** self.p + np.abs(s) ** self.p) ** (-1.0 / self.p)
            return np.stack([r * c, r * s], axis=-1)
        return self._stadium_point(np.mod(theta, 1.0) * self.perimeter)

    def _stadium_point(self, ell):
        """Arclength parametrization of the rounded square, starting at (1, 0)."""
        q = self.rho0
        r = 1.0 - q
        quarter = 2.0 * q + 0.5 * np.pi * r
        ell = np.mod(np.asarray(ell, float) + q, 4.0 * quarter)
        k = np.minimum(np.floor(ell / quarter), 3.0)
        u = ell - k * quarter
        on_flat = u < 2.0 * q
        a = (u - 2.0 * q) / r
        px = np.where(on_flat, 1.0, q + r * np.cos(a))
        py = np.where(on_flat, u - q, q + r * np.sin(a))
        ang = 0.5 * np.pi * k
        ca, sa = np.cos(ang), np.sin(ang)
        return np.stack([ca * px - sa * py, sa * px + ca * py], axis=-1)

    def sample_boundary(self, m, offset=0.5):
        """``m`` boundary points equally spaced in arclength (complex), CCW."""
        u = (np.arange(m) + offset) / m
        return arclength_points(self, u)

    def _arclength_table(self, n=8192):
        key = ("_arc", n)
        cache = self.__dict__.setdefault("_cache", {})
        if key not in cache:
            th = np.linspace(0.0, 1.0, n + 1)
            pts = self.boundary(th[:-1])
            pts = np.vstack([pts, pts[:1]])
            seg = np.hypot(*np.diff(pts, axis=0).T)
            cache[key] = (th, np.concatenate([[0.0], np.cumsum(seg)]))
        return cache[key]


def arclength_points(shape, u):
    """Boundary points (complex) at arclength fractions ``u`` in [0, 1)."""
    u = np.mod(np.asarray(u, float), 1.0)
    if shape.kind == "disk":
        t = 2.0 * np.pi * u
        return np.cos(t) + 1j * np.sin(t)
    if shape.kind == "stadium":
        p = shape._stadium_point(u * shape.perimeter)
        return p[..., 0] + 1j * p[..., 1]
    th, cum = shape._arclength_table()
    target = u * cum[-1]
    theta = np.interp(target, cum, th)
    # linear inversion of the chord-length table; uniform to about 1e-7
    p = shape.boundary(theta)
    return p[..., 0] + 1j * p[..., 1]


def _fit_rho(shape_kw, gamma, rho0):
    """Fit (rho1, rho2) from dense samples of the half width."""
    tmp = InclusionShape(rho1=1.0, rho2=1.0, gamma=gamma, rho0=rho0, **shape_kw)
    if math.isinf(gamma):
        s = np.linspace(rho0, tmp.height, 20001)[1:]
        env = tmp.envelope(s, rho=1.0)
        gap = tmp.lateral_gap(s)
        ok = env > 0
        rho2 = 0.999 * float(np.min(gap[ok] / env[ok]))
        return 1.0, rho2
    s = np.geomspace(1e-6, 1.0, 20001)
    gap = tmp.lateral_gap(s)
    q = gap / s ** (gamma + 1.0)
    near = s <= rho0
    rho1 = 1.001 * float(np.max(q[near]))
    rho2 = 0.999 * float(np.min(q))
    rho2 = min(rho2, 0.9 * 2.0 ** (-(gamma + 1.0)))
    return rho1, rho2


def make_shape(kind, **params):
    """Build an inclusion shape.

    ``ellipse`` takes ``b`` (0 < b <= 1, a = 1), ``superdisk`` takes
    ``gamma`` > 0 (exponent p = gamma + 1), ``stadium`` takes ``rho0`` in
    (0, 1), the flat half-height.
    """
    if kind not in SHAPE_KINDS:
        raise ValueError(f"unknown shape kind {kind!r}; expected one of {SHAPE_KINDS}")
    if kind == "disk":
        kw = dict(kind="disk", b=1.0, p=2.0, height=1.0, area=math.pi, perimeter=2 * math.pi)
        gamma, rho0 = 1.0, 0.5
    elif kind == "ellipse":
        b = float(params.get("b", 0.5))
        a = float(params.get("a", 1.0))
        if a != 1.0:
            raise ValueError("ellipse needs a = 1 so that (+-1, 0) lies on the boundary")
        if not 0.0 < b <= 1.0:
            raise ValueError(f"ellipse needs 0 < b <= a = 1, got b={b}")
        kw = dict(kind="ellipse", b=b, p=2.0, height=b, area=math.pi * b, perimeter=float("nan"))
        gamma, rho0 = 1.0, 0.5 * b
    elif kind == "superdisk":
        gamma = float(params.get("gamma", 2.0))
        if not (gamma > 0.0 and math.isfinite(gamma)):
            raise ValueError(f"superdisk needs a finite gamma > 0, got {gamma}")
        p = gamma + 1.0
        area = 4.0 * math.gamma(1 + 1 / p) ** 2 / math.gamma(1 + 2 / p)
        kw = dict(kind="superdisk", b=1.0, p=p, height=1.0, area=area, perimeter=float("nan"))
        rho0 = 0.5
    else:
        rho0 = float(params.get("rho0", 0.5))
        if not 0.0 < rho0 < 1.0:
            raise ValueError(f"stadium needs 0 < rho0 < 1, got {rho0}")
        r = 1.0 - rho0
        kw = dict(kind="stadium", b=1.0, p=2.0, height=1.0,
                  area=4.0 - (4.0 - math.pi) * r * r, perimeter=8.0 * rho0 + 2.0 * math.pi * r)
        gamma = math.inf
    extra = set(params) - {"b", "a", "gamma", "rho0"}
    if extra:
        raise ValueError(f"unknown shape parameters {sorted(extra)}")
    rho1, rho2 = _fit_rho(kw, gamma, rho0)
    shape = InclusionShape(gamma=gamma, rho0=rho0, rho1=rho1, rho2=rho2, **kw)
    if not math.isfinite(shape.perimeter):
        th, cum = shape._arclength_table()
        object.__setattr__(shape, "perimeter", float(cum[-1]))
    lat = shape.level(np.array([1.0, -1.0]), np.zeros(2))
    if np.max(np.abs(lat)) > 1e-12:
        raise ValueError("shape has (+-1, 0) off its boundary")
    return shape


def winding_number(shape, point=(0.0, 0.0), m=4096):
    z = shape.sample_boundary(m) - complex(*point)
    dth = np.angle(np.roll(z, -1) / z)
    return float(dth.sum() / (2 * np.pi))


# --------------------------------------------------------------------------
# layouts


@dataclass(frozen=True)
class PorousLayout:
    """Inclusions eps/2 * K translated to lattice centers."""

    shape: InclusionShape
    eps: float
    dist: float
    kind: str
    n_cols: int
    n_rows: int
    centers: np.ndarray = field(repr=False)
    mu: float = 0.0

    @property
    def n_incl(self):
        return len(self.centers)

    @property
    def pitch_x(self):
        return self.eps + self.dist

    @property
    def pitch_y(self):
        if self.kind == "square":
            return self.eps + self.dist
        if self.kind == "thin_layer":
            return 2.0 * self.eps
        return math.inf

    def without_inclusions(self):
        return PorousLayout(self.shape, self.eps, self.dist, self.kind, 0, 0,
                            np.zeros((0, 2)), self.mu)

    def index(self, i, j=0):
        """Flat index of the inclusion in column i and row j (0-based)."""
        if not (0 <= i < self.n_cols and 0 <= j < self.n_rows):
            raise IndexError(f"no inclusion ({i}, {j}) in a {self.n_cols}x{self.n_rows} layout")
        return j * self.n_cols + i

    def locate(self, x, y):
        """Nearest lattice column/row for each point (may be out of range)."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        i = np.rint((x - 0.5 * self.eps) / self.pitch_x).astype(int)
        if self.n_rows > 1:
            j = np.rint(y / self.pitch_y).astype(int)
        else:
            j = np.zeros(np.shape(y), dtype=int)
        return i, j

    def in_fluid(self, x):
        """True where ``x`` (shape (..., 2)) lies outside every closed inclusion."""
        x = np.asarray(x, float)
        px, py = x[..., 0], x[..., 1]
        if self.n_incl == 0:
            return np.ones(px.shape, dtype=bool)
        i, j = self.locate(px, py)
        ok = (i >= 0) & (i < self.n_cols) & (j >= 0) & (j < self.n_rows)
        ic = np.clip(i, 0, self.n_cols - 1)
        jc = np.clip(j, 0, self.n_rows - 1)
        c = self.centers[jc * self.n_cols + ic]
        h = 0.5 * self.eps
        inside = self.shape.inside((px - c[..., 0]) / h, (py - c[..., 1]) / h)
        return ~(ok & inside)

    def boundary_points(self, k, m):
        """``m`` boundary points (complex) of inclusion k, arclength-uniform, CCW."""
        c = complex(*self.centers[k])
        return c + 0.5 * self.eps * self.shape.sample_boundary(m)

    def nearest_center(self, x):
        """Index of and distance to the nearest inclusion center for points (..., 2)."""
        x = np.asarray(x, float)
        i, j = self.locate(x[..., 0], x[..., 1])
        ic = np.clip(i, 0, self.n_cols - 1)
        jc = np.clip(j, 0, self.n_rows - 1)
        k = jc * self.n_cols + ic
        return k, np.hypot(*(x - self.centers[k]).T.reshape(2, *k.shape))


def n_columns(eps, dist):
    return int(math.floor((1.0 + dist) / (eps + dist) + 1e-12))


def make_layout(shape, eps, dist, kind="segment", mu=0.0):
    """Place inclusions on the unit segment, the unit square or a thin layer."""
    if kind not in LAYOUT_KINDS:
        raise ValueError(f"unknown layout kind {kind!r}; expected one of {LAYOUT_KINDS}")
    if not 0.0 < eps <= 0.5:
        raise ValueError(f"need 0 < eps <= 1/2, got {eps}")
    if not dist > 0.0:
        raise ValueError(f"need a positive gap, got {dist}")
    n = n_columns(eps, dist)
    if n < 1:
        raise ValueError("no inclusion fits in the unit segment")
    xs = 0.5 * eps + np.arange(n) * (eps + dist)
    if kind == "segment":
        rows = np.zeros(1)
    elif kind == "square":
        rows = np.arange(n) * (eps + dist)
    else:
        if not 0.0 <= mu < 1.0:
            raise ValueError(f"thin layer needs 0 <= mu < 1, got {mu}")
        n2 = int(math.floor((1.0 / eps) ** mu + 1e-12))
        rows = np.arange(n2) * 2.0 * eps
    cx, cy = np.meshgrid(xs, rows)
    centers = np.stack([cx.ravel(), cy.ravel()], axis=-1)
    return PorousLayout(shape, float(eps), float(dist), kind, n, len(rows), centers, float(mu))


# --------------------------------------------------------------------------
# gap areas


def optimal_strip(gamma, eps, dist, rho0=0.5):
    """Strip half-height s minimizing eps s^(gamma+2) + d s bounds, clamped to (0, rho0]."""
    if math.isinf(gamma):
        return rho0
    s = (dist / (gamma * eps)) ** (1.0 / (gamma + 1.0))
    return min(s, rho0)


def _pair_fluid_length(shape, eps, dist, t):
    """Fluid length between two neighbours on the line x2 = eps t / 2."""
    w = shape.half_width_numeric(t)
    return (eps + dist) - eps * w


def gap_area(shape, eps, dist, s):
    """Fluid area between neighbours inside the strip |x2| <= eps s / 2, summed over pairs.

    Boundary crossings on each horizontal line are found by root-finding on
    the shape's level function; the x2 integral is adaptive.
    """
    if not 0.0 <= s <= shape.rho0 + 1e-15:
        raise ValueError(f"strip parameter must lie in [0, rho0={shape.rho0}], got {s}")
    n = n_columns(eps, dist)
    if n < 2 or s == 0.0:
        return 0.0
    f = lambda t: _pair_fluid_length(shape, eps, dist, t)
    val, _ = integrate.quad(f, 0.0, s, epsabs=0.0, epsrel=1e-11, limit=200)
    # x2 = eps t / 2, symmetric in t
    return (n - 1) * 2.0 * val * 0.5 * eps


def gap_area_mc(shape, eps, dist, s, n_samples=10_000_000, seed=0, chunk=1_000_000):
    """Monte-Carlo estimate of :func:`gap_area`; returns (estimate, standard error)."""
    n = n_columns(eps, dist)
    if n < 2 or s == 0.0:
        return 0.0, 0.0
    layout = make_layout(shape, eps, dist, "segment")
    rng = np.random.default_rng(seed)
    x0 = layout.centers[0, 0]
    x1 = layout.centers[1, 0]
    box = (x1 - x0) * eps * s
    hits = 0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        px = rng.uniform(x0, x1, m)
        py = rng.uniform(-0.5 * eps * s, 0.5 * eps * s, m)
        hits += int(np.count_nonzero(layout.in_fluid(np.stack([px, py], -1))))
        done += m
    p = hits / n_samples
    est = (n - 1) * box * p
    err = (n - 1) * box * math.sqrt(p * (1 - p) / n_samples)
    return est, err
