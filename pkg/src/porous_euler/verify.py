"""Acceptance checks; each returns a :class:`Criterion` and may emit CSV tables."""
from dataclasses import dataclass
import filecmp
import math
import os
import tempfile
import time

import numpy as np

from .conformal import as_complex, as_pairs, build_map, green
from .correction import build_correction, build_cutoff, correction_velocity, cutoff_norms, w_terms
from .fields import biot_savart_exterior, biot_savart_plane, circular_patch
from .geometry import gap_area, make_layout, make_shape, n_columns, optimal_strip
from .harness import (ExperimentConfig, Table, flux_contrast, run_sweep, write_csv)
from .solver import assemble_panels, cell_loop, circulation_loop, make_state, step_adaptive


@dataclass(frozen=True)
class Criterion:
    number: int
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        extra = f" ({self.detail})" if self.detail else ""
        return f"[{tag}] {self.number:2d} {self.name}: {self.value:.6g} vs {self.threshold:.6g}{extra}"


def _rng(seed, number):
    return np.random.default_rng([int(seed), number])


def _spread(x):
    x = np.asarray(x, float)
    return float(x.max() / x.min())


# --------------------------------------------------------------------------


def green_boundary_zero(seed=0, out=None):
    rng = _rng(seed, 1)
    worst = 0.0
    for shape in (make_shape("disk"), make_shape("ellipse", b=0.5)):
        worst = max(worst, _green_on_boundary(build_map(shape), rng))
    fit = build_map(make_shape("superdisk", gamma=3.0), n_modes=128)
    worst_fit = _green_on_boundary(fit, rng)
    ok = worst <= 1e-12 and worst_fit <= 1e-8
    return Criterion(1, "Green function vanishes on the boundary", worst, 1e-12, ok,
                     f"Laurent-fit superdisk gamma=3: {worst_fit:.3g} vs 1e-08")


def _green_on_boundary(cmap, rng):
    bnd = cmap.shape.sample_boundary(512)
    w = rng.uniform(1.1, 4.0, 64) * np.exp(2j * np.pi * rng.random(64))
    src = cmap.inverse(w)
    g = green(cmap, bnd[:, None], src[None, :])
    return float(np.max(np.abs(g)))


def exterior_tangency(seed=0, out=None):
    cmap = build_map(make_shape("disk"))
    f = circular_patch((3.0, 0.0), 0.5)
    th = 2 * np.pi * (np.arange(256) + 0.5) / 256
    z = np.exp(1j * th)
    u = as_complex(biot_savart_exterior(cmap, f, as_pairs(z)))
    un = float(np.max(np.abs((u * np.conj(z)).real)))
    m = 512
    loop = 1.5 * np.exp(2j * np.pi * np.arange(m) / m)
    v = as_complex(biot_savart_exterior(cmap, f, as_pairs(loop)))
    tangent = 1j * loop * (2 * np.pi / m)
    circ = abs(float(np.sum((v * np.conj(tangent)).real)))
    value = max(un, circ)
    return Criterion(2, "exterior law tangency and zero circulation", value, 1e-8, value <= 1e-8,
                     f"max |u.n| {un:.3g}, circulation on |x|=1.5 {circ:.3g}")


def image_equivalence(seed=0, out=None):
    cmap = build_map(make_shape("disk"))
    f = circular_patch((3.0, 0.0), 0.5)
    gx, gy = np.meshgrid(np.linspace(-2.5, 5.5, 20), np.linspace(-3.0, 3.0, 20))
    z = (gx + 1j * gy).ravel()
    z = z[np.abs(z) > 1.0]
    u = as_complex(biot_savart_exterior(cmap, f, as_pairs(z)))
    ref = _image_oracle(f, z)
    err = float(np.max(np.abs(u - ref)) / np.max(np.abs(ref)))
    return Criterion(3, "disk exterior law matches the image system", err, 1e-6, err <= 1e-6,
                     f"{z.size} grid points outside the disk, error relative to max |u|")


def _image_oracle(f, z):
    """Plane patch in closed form plus, per source element, an opposite image
    at the reflected point and a compensating vortex at the centre."""
    c = f.center_c
    p = z - c
    R2 = f.radius ** 2
    inside = np.abs(p) ** 2 <= R2
    plane = np.where(inside, 0.5 * f.amplitude * 1j * p, 0.5 * f.amplitude * R2 * 1j / np.conj(p))
    r, wr = np.polynomial.legendre.leggauss(64)
    r = 0.5 * f.radius * (r + 1)
    wr = 0.5 * f.radius * wr
    th = 2 * np.pi * np.arange(128) / 128
    y = (c + r[:, None] * np.exp(1j * th)[None, :]).ravel()
    w = (f.amplitude * (wr * r)[:, None] * np.full(128, 2 * np.pi / 128)[None, :]).ravel()
    ystar = 1.0 / np.conj(y)
    img = (-w[None, :] * 1j / np.conj(z[:, None] - ystar[None, :])).sum(1)
    img += w.sum() * 1j / np.conj(z)
    return plane + img / (2 * np.pi)


def rankine_patch(seed=0, out=None):
    rng = _rng(seed, 4)
    f = circular_patch((0.2, -0.1), 0.7, 1.3)
    r = np.sqrt(rng.uniform(0.0, 4.0, 100)) * 0.7
    z = f.center_c + r * np.exp(2j * np.pi * rng.random(100))
    u = as_complex(biot_savart_plane(f, as_pairs(z)))
    p = z - f.center_c
    ref = np.where(np.abs(p) <= f.radius, 0.5 * f.amplitude * 1j * p,
                   0.5 * f.amplitude * f.radius ** 2 * 1j / np.conj(p))
    ray = np.array([_ray_quadrature(f, x) for x in z])
    e1 = float(np.max(np.abs(u - ref) / np.abs(ref)))
    e2 = float(np.max(np.abs(ray - ref) / np.abs(ref)))
    value = max(e1, e2)
    n_in = int(np.sum(np.abs(p) <= f.radius))
    return Criterion(4, "Rankine patch against the closed form", value, 1e-3, value <= 1e-3,
                     f"{n_in} interior points; library {e1:.3g}, ray quadrature {e2:.3g}")


def _ray_quadrature(f, x, n=256):
    """(1/2pi) int (x-y)^perp/|x-y|^2 f dy with rays from x (uniform f)."""
    p = x - f.center_c
    D, R = abs(p), f.radius
    if D < R:
        phi = 2 * np.pi * np.arange(n) / n
        wphi = np.full(n, 2 * np.pi / n)
    else:
        t, wt = np.polynomial.legendre.leggauss(n)
        a = math.asin(R / D)
        phi = math.atan2(-p.imag, -p.real) + a * np.sin(0.5 * np.pi * t)
        wphi = wt * a * 0.5 * np.pi * np.cos(0.5 * np.pi * t)
    e = np.exp(1j * phi)
    pe = (np.conj(p) * e).real
    disc = np.sqrt(np.clip(pe * pe - D * D + R * R, 0.0, None))
    length = 2 * disc if D >= R else -pe + disc
    return -(1j * e * f.amplitude * length * wphi).sum() / (2 * np.pi)


def _cell_points(layout, i, n, rng, margin=1e-3):
    h = 0.5 * layout.eps
    hx, hy = 0.5 * layout.pitch_x, layout.eps
    c = complex(*layout.centers[layout.index(i)])
    pts = []
    while len(pts) < n:
        q = c + rng.uniform(-hx, hx) * (1 - margin) + 1j * rng.uniform(-hy, hy) * (1 - margin)
        loc = (q - c) / h
        if layout.shape.level(loc.real, loc.imag) > margin:
            pts.append(q)
    return np.array(pts)


def disk_degeneracy(seed=0, out=None):
    rng = _rng(seed, 5)
    lay = make_layout(make_shape("disk"), 0.05, 0.05 ** 2)
    cf = build_correction(lay, circular_patch((0.5, 0.6), 0.2))
    i = lay.n_cols // 2
    x = _cell_points(lay, i, 100, rng)
    w1, w2, w3, w4 = w_terms(cf, i, 0, as_pairs(x))
    value = float(max(np.max(np.abs(w1)), np.max(np.abs(w3))))
    if out:
        t = Table(["x1", "x2", "w1", "w3_1", "w3_2"],
                  [(float(p.real), float(p.imag), float(a), float(b[0]), float(b[1]))
                   for p, a, b in zip(x, w1, w3)])
        write_csv(t, os.path.join(out, "c05_disk_degeneracy.csv"))
    return Criterion(5, "disk cells have w1 = 0 and w3 = 0", value, 1e-12, value <= 1e-12,
                     f"100 points in cell {i}")


def reconstruction_identity(seed=0, out=None):
    rng = _rng(seed, 6)
    shape = make_shape("ellipse", b=0.5)
    lay = make_layout(shape, 0.05, 0.05 ** 2)
    cf = build_correction(lay, circular_patch((0.5, 0.6), 0.2))
    errs = []
    rows = []
    for i in rng.choice(lay.n_cols, 4, replace=False):
        x = _cell_points(lay, int(i), 25, rng)
        xp = as_pairs(x)
        w1, w2, w3, w4 = w_terms(cf, int(i), 0, xp)
        loc = as_pairs(x - complex(*lay.centers[int(i)]))
        phi = cf.cutoff.value(loc)
        g = as_complex(cf.cutoff.gradient(loc))
        lhs = as_complex(biot_savart_plane(cf.source, xp)) - as_complex(correction_velocity(cf, xp))
        rhs = (1j * g * (w1 + w2) + phi * (as_complex(w3) + as_complex(w4))) / (2 * np.pi)
        errs.append(np.abs(lhs - rhs))
        rows += [(float(p.real), float(p.imag), float(a), float(b)) for p, a, b in zip(x, np.abs(lhs), np.abs(lhs - rhs))]
    value = float(np.max(np.concatenate(errs)))
    if out:
        write_csv(Table(["x1", "x2", "abs_discrepancy", "abs_residual"], rows),
                  os.path.join(out, "c06_reconstruction.csv"))
    return Criterion(6, "w-decomposition reconstructs K[f] - v^eps (ellipse)", value, 1e-5, value <= 1e-5,
                     "100 random points in 4 cells")


def cutoff_hard_bound(seed=0, out=None):
    shape = make_shape("disk")
    rows = []
    for eps in (0.1, 0.05, 0.025):
        for alpha in (1.5, 2.0, 2.5):
            d = eps ** alpha
            l2, _ = cutoff_norms(build_cutoff("segment_case", eps, d, shape))
            bound = math.sqrt(2 * eps * (eps + d))
            rows.append((eps, alpha, d, l2, bound, l2 <= bound))
    if out:
        write_csv(Table(["eps", "alpha", "dist", "phi_l2", "bound", "within"], rows),
                  os.path.join(out, "c07_cutoff_bound.csv"))
    worst = max(r[3] / r[4] for r in rows)
    bad = sum(not r[5] for r in rows)
    return Criterion(7, "segment cutoff L2 norm below sqrt(2 eps (eps + d))", worst, 1.0, bad == 0,
                     f"{bad} violations in 9 grid points, value is the largest norm/bound")


def _sweep(experiment, layout, alpha, eps, name, out, **kw):
    cfg = ExperimentConfig(experiment, shape="disk", layout=layout, eps=eps, alpha=alpha, **kw)
    path = os.path.join(out, name) if out else None
    if path and os.path.exists(path):
        os.remove(path)
    t = run_sweep(cfg, path)
    return t.where(lambda r: r["n_incl"] > 0)


def cutoff_gradient_scaling(seed=0, out=None):
    t = _sweep("cutoff_sweep", "segment", 2.5, (0.1, 0.05, 0.025), "c08_cutoff_gradient.csv", out)
    s = _spread(t.column("ratio"))
    return Criterion(8, "cutoff gradient / (1 + (eps/d)^(1/4)), d = eps^2.5", s, 2.0, s <= 2.0,
                     "max/min over eps in {0.1, 0.05, 0.025}")


def discrepancy_square(seed=0, out=None):
    t = _sweep("discrepancy_sweep", "square", 0.5, (0.08, 0.04, 0.02), "c09_discrepancy_square.csv", out,
               center=(0.5, -0.6), radius=0.3)
    s = _spread(t.column("ratio"))
    return Criterion(9, "square-layout discrepancy / (eps/d), d = eps^0.5", s, 3.0, s <= 3.0,
                     "max/min over eps in {0.08, 0.04, 0.02}")


def discrepancy_segment(seed=0, out=None):
    t = _sweep("discrepancy_sweep", "segment", 2.5, (0.08, 0.04, 0.02), "c10_discrepancy_segment.csv", out,
               center=(0.5, 0.6), radius=0.2)
    s = _spread(t.column("ratio"))
    return Criterion(10, "segment discrepancy / (sqrt(eps) (1 + (eps/d)^(1/4))), d = eps^2.5", s, 3.0,
                     s <= 3.0, "max/min over eps in {0.08, 0.04, 0.02}")


def gap_area_bound(seed=0, out=None):
    t = _sweep("gap_area_sweep", "segment", 3.0, (0.08, 0.04, 0.02), "c11_gap_area.csv", out)
    s = _spread(t.column("ratio"))
    st = make_shape("stadium")
    eps, d = 0.04, 0.04 ** 3
    strip = optimal_strip(st.gamma, eps, d, st.rho0)
    exact = (n_columns(eps, d) - 1) * d * eps * strip
    rel = abs(gap_area(st, eps, d, strip) - exact) / exact
    ok = s <= 2.0 and rel <= 1e-10
    return Criterion(11, "gap area / (d s) for disks, d = eps^3", s, 2.0, ok,
                     f"stadium rectangle match {rel:.3g} vs 1e-10")


KELVIN_PAIR = ((0.3, 0.5, -1.0), (0.7, 0.5, 1.0))


def kelvin(seed=0, out=None):
    lay = make_layout(make_shape("disk"), 0.1, 0.01)
    panels = assemble_panels(lay, 64)
    v = np.array(KELVIN_PAIR)
    state = make_state(v[:, :2], v[:, 2], 0.05)
    loops = [cell_loop(lay, k) for k in range(lay.n_incl)]

    def circ(s):
        return np.array([circulation_loop(s, panels, lp) for lp in loops])

    c0 = circ(state)
    rows = [(0.0,) + tuple(c0)]
    drift = 0.0
    for n in range(1, 101):
        state, _ = step_adaptive(state, panels, 0.005)
        if n % 10 == 0:
            c = circ(state)
            drift = max(drift, float(np.max(np.abs(c - c0))))
            rows.append((state.time,) + tuple(c))
    if out:
        write_csv(Table(["time"] + [f"circ_{k}" for k in range(lay.n_incl)], rows),
                  os.path.join(out, "c12_kelvin.csv"))
    return Criterion(12, "per-obstacle circulation drift over 100 steps", drift, 1e-6, drift <= 1e-6,
                     f"{lay.n_incl} inclusions, vortex pair, wall pushes {state.pushed}")


CONTRAST = dict(eps=(0.02,), vortices=((-0.1, 0.8, -1.0), (1.1, 0.8, 1.0)), delta=0.05, dt=0.01,
                steps=150, panels=64, alphas=(2.0, 4.0))


def regime_contrast(seed=0, out=None):
    cfg = ExperimentConfig("flux_contrast", shape="disk", layout="segment", **CONTRAST)
    res = flux_contrast(cfg)
    if out:
        write_csv(res.table, os.path.join(out, "c13_contrast.csv"))
    r1 = res.imp_over_perm
    r2 = abs(res.perm_over_control - 1.0)
    ok = r1 <= 0.2 and r2 <= 0.25
    return Criterion(13, "impermeable / permeable time-averaged |gate flux|", r1, 0.2, ok,
                     f"permeable/control {res.perm_over_control:.4g}, needs |ratio - 1| <= 0.25")


CHECKS = (green_boundary_zero, exterior_tangency, image_equivalence, rankine_patch, disk_degeneracy,
          reconstruction_identity, cutoff_hard_bound, cutoff_gradient_scaling, discrepancy_square,
          discrepancy_segment, gap_area_bound, kelvin, regime_contrast)


def _run_checks(out, seed, log=None):
    results = []
    for check in CHECKS:
        t0 = time.perf_counter()
        r = check(seed=seed, out=out)
        results.append(r)
        if log:
            log(f"{r.line()}  [{time.perf_counter() - t0:.1f} s]")
    rows = [(r.number, r.name, r.value, r.threshold, "PASS" if r.passed else "FAIL") for r in results]
    write_csv(Table(["criterion", "name", "value", "threshold", "result"], rows),
              os.path.join(out, "verify.csv"))
    return results


def csv_files(d):
    return sorted(f for f in os.listdir(d) if f.endswith(".csv"))


def run_verify(out, seed=0, log=None, determinism=True):
    """All acceptance checks; the last one reruns the others with the same seed
    into a scratch directory and compares every CSV byte for byte."""
    os.makedirs(out, exist_ok=True)
    results = _run_checks(out, seed, log)
    if determinism:
        with tempfile.TemporaryDirectory() as tmp:
            _run_checks(tmp, seed)
            names = csv_files(out)
            same = csv_files(tmp) == names and all(
                filecmp.cmp(os.path.join(out, n), os.path.join(tmp, n), shallow=False) for n in names)
        r = Criterion(14, "rerun with the same seed gives identical CSVs", float(len(names)), float(len(names)),
                      same, "value is the number of CSV files compared")
        results.append(r)
        if log:
            log(r.line())
    return results
