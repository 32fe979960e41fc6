"""Experiment configs, sweeps, flow runs and CSV/summary output."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import logging
import math
import os

import numpy as np

from ._jit import set_threads
from .conformal import build_map
from .correction import build_correction, build_cutoff, cutoff_norms, discrepancy_l2
from .fields import circular_patch, gaussian_bump
from .geometry import gap_area, make_layout, make_shape, optimal_strip
from .solver import (NumericalFailure, assemble_panels, cell_loop, circulation_loop, flux_gates, gate_segments,
                     make_state, step_adaptive)

log = logging.getLogger(__name__)

EXPERIMENTS = ("discrepancy_sweep", "cutoff_sweep", "gap_area_sweep", "flux_contrast", "flow_run",
               "verify_all")
SWEEPS = ("discrepancy_sweep", "cutoff_sweep", "gap_area_sweep")
FLOWS = ("flux_contrast", "flow_run")


class ConfigError(ValueError):
    """Invalid experiment configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# key -> (section, parser)
def _num(v):
    return float(v)


def _int(v):
    f = float(v)
    if not f.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _numlist(v):
    return tuple(float(x) for x in v.split(",") if x.strip())


def _intlist(v):
    return tuple(_int(x) for x in v.split(",") if x.strip())


def _word(v):
    return v.strip()


def _vortices(v):
    out = []
    for item in v.split(";"):
        if item.strip():
            parts = _numlist(item)
            if len(parts) != 3:
                raise ValueError(f"vortex needs x, y, strength; got {item.strip()!r}")
            out.append(parts)
    if not out:
        raise ValueError("no vortices given")
    return tuple(out)


KEYS = {
    "experiment": ("run", _word),
    "seed": ("run", _int),
    "output": ("run", _word),
    "shape": ("geometry", _word),
    "gamma": ("geometry", _num),
    "b": ("geometry", _num),
    "rho0": ("geometry", _num),
    "layout": ("geometry", _word),
    "mu": ("geometry", _num),
    "n_modes": ("geometry", _int),
    "fit_tol": ("geometry", _num),
    "eps": ("sweep", _numlist),
    "alpha": ("sweep", _num),
    "dist": ("sweep", _numlist),
    "order": ("sweep", _int),
    "source": ("source", _word),
    "center": ("source", _numlist),
    "radius": ("source", _num),
    "amplitude": ("source", _num),
    "width": ("source", _num),
    "panels": ("solver", _int),
    "delta": ("solver", _num),
    "dt": ("solver", _num),
    "steps": ("solver", _int),
    "n_quad": ("solver", _int),
    "vortices": ("flow", _vortices),
    "alphas": ("flow", _numlist),
    "gate_y": ("flow", _num),
    "circulation": ("flow", _intlist),
}
SECTIONS = sorted({s for s, _ in KEYS.values()})


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    shape: str = "disk"
    shape_params: dict = field(default_factory=dict)
    layout: str = "segment"
    mu: float = 0.0
    n_modes: int = 64
    fit_tol: float = 1e-6
    eps: tuple = ()
    alpha: float = None
    dist: tuple = None
    order: int = 8
    source: str = "circular_patch"
    center: tuple = None
    radius: float = None
    amplitude: float = 1.0
    width: float = 0.05
    panels: int = 64
    delta: float = 0.05
    dt: float = 0.01
    steps: int = 100
    n_quad: int = 8
    vortices: tuple = ()
    alphas: tuple = (2.0, 4.0)
    gate_y: float = 0.0
    circulation: tuple = None
    seed: int = 0
    output: str = None

    def dists(self):
        if self.dist is not None:
            return tuple(self.dist)
        return tuple(e ** self.alpha for e in self.eps)

    def make_shape(self):
        return make_shape(self.shape, **self.shape_params)


def parse_config(text):
    """Parse ``key = value`` lines with optional ``[section]`` headers.

    Keys may also appear before any header.  Comments start with ``#``.
    """
    values = {}
    where = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SECTIONS:
                raise ConfigError(f"unknown section [{section}]; expected one of {SECTIONS}", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno)
        home, parse = KEYS[key]
        if section is not None and section != home:
            raise ConfigError(f"key {key!r} belongs in section [{home}], not [{section}]", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {where[key]})", lineno)
        try:
            values[key] = parse(val)
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {exc}", lineno) from None
        where[key] = lineno
    return _build_config(values, where)


def _build_config(values, where):
    def fail(msg, key=None):
        raise ConfigError(msg, where.get(key))

    if "experiment" not in values:
        fail("missing required key 'experiment'")
    exp = values["experiment"]
    if exp not in EXPERIMENTS:
        fail(f"unknown experiment {exp!r}; expected one of {EXPERIMENTS}", "experiment")
    shape_params = {k: values.pop(k) for k in ("gamma", "b", "rho0") if k in values}
    cfg = ExperimentConfig(shape_params=shape_params, **values)
    if exp == "verify_all":
        return cfg

    required = {"discrepancy_sweep": ("shape", "layout", "eps"),
                "cutoff_sweep": ("shape", "layout", "eps"),
                "gap_area_sweep": ("shape", "eps"),
                "flux_contrast": ("eps", "vortices", "dt", "steps"),
                "flow_run": ("eps", "vortices", "dt", "steps")}[exp]
    for key in required:
        if key not in values:
            fail(f"missing required key {key!r} for {exp}")
    if exp != "flux_contrast" and "alpha" not in values and "dist" not in values:
        fail(f"missing required key 'alpha' (or an explicit 'dist' list) for {exp}")
    if "alpha" in values and "dist" in values:
        fail("give either 'alpha' or 'dist', not both", "dist")
    if "alpha" in values and not cfg.alpha > 0:
        fail(f"alpha must be positive, got {cfg.alpha}", "alpha")
    if not cfg.eps:
        fail("eps grid is empty", "eps")
    if any(not 0 < e <= 0.5 for e in cfg.eps):
        fail("every eps must lie in (0, 1/2]", "eps")
    if any(a <= b for a, b in zip(cfg.eps, cfg.eps[1:])):
        fail("eps grid must be strictly decreasing", "eps")
    if cfg.dist is not None:
        if len(cfg.dist) != len(cfg.eps):
            fail("dist list needs one entry per eps", "dist")
        if any(d <= 0 for d in cfg.dist):
            fail("every dist must be positive", "dist")
    if exp in FLOWS and len(cfg.eps) != 1:
        fail(f"{exp} takes a single eps", "eps")
    if cfg.layout not in ("segment", "square", "thin_layer"):
        fail(f"unknown layout {cfg.layout!r}", "layout")
    if exp == "discrepancy_sweep" and cfg.layout == "thin_layer":
        fail("discrepancy_sweep has no predicted rate for thin_layer; use segment or square", "layout")
    if exp == "gap_area_sweep" and cfg.layout != "segment":
        fail("gap_area_sweep is defined for the segment layout", "layout")
    if cfg.source not in ("circular_patch", "gaussian_bump"):
        fail(f"unknown source {cfg.source!r}", "source")
    for key in ("order", "panels", "steps", "n_quad", "n_modes"):
        if getattr(cfg, key) < 1:
            fail(f"{key} must be positive", key)
    for key in ("dt", "delta", "fit_tol", "amplitude", "width"):
        if not getattr(cfg, key) > 0:
            fail(f"{key} must be positive", key)
    if exp == "flux_contrast" and (len(cfg.alphas) != 2 or min(cfg.alphas) <= 0):
        fail("alphas needs two positive exponents (permeable, impermeable)", "alphas")
    try:
        cfg.make_shape()
    except ValueError as exc:
        fail(str(exc), "shape")
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


# --------------------------------------------------------------------------
# tables and CSV


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)

    def column(self, name):
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], float)

    def where(self, pred):
        return Table(list(self.columns), [r for r in self.rows if pred(dict(zip(self.columns, r)))])


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    s = str(v)
    if any(c in s for c in ',"\r\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def format_row(row):
    return ",".join(format_value(v) for v in row) + "\n"


def write_csv(table, path):
    """RFC 4180 style: header row, '.' decimals, 17 significant digits."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(table.columns) + "\n")
        for row in table.rows:
            fh.write(format_row(row))


def fit_slope(table, x_col, y_col):
    """Least squares on (ln x, ln y): (slope, intercept, r^2)."""
    x = table.column(x_col)
    y = table.column(y_col)
    if len(x) < 3:
        raise ValueError("fit_slope needs at least 3 rows")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("fit_slope needs positive finite data")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - (slope * lx + icpt)
    tot = ly - ly.mean()
    ss = float(tot @ tot)
    r2 = 1.0 - float(res @ res) / ss if ss > 0 else 1.0
    return float(slope), float(icpt), r2


# --------------------------------------------------------------------------
# sweeps


def rate_exponent(gamma):
    """gamma / (2 (gamma + 1)), with the gamma = inf limit 1/2."""
    return 0.5 if math.isinf(gamma) else gamma / (2.0 * (gamma + 1.0))


def predicted_rate(experiment, layout, gamma, eps, dist):
    if experiment == "gap_area_sweep":
        raise ValueError("gap-area rate needs the strip width")
    q = (eps / dist) ** rate_exponent(gamma)
    if experiment == "discrepancy_sweep":
        return eps / dist if layout == "square" else math.sqrt(eps) * (1.0 + q)
    if layout == "square" and dist >= eps:
        return 1.0
    return 1.0 + q


COLUMNS = {
    "discrepancy_sweep": ["eps", "dist", "n_incl", "discrepancy", "predicted_rate", "ratio"],
    "cutoff_sweep": ["eps", "dist", "n_incl", "phi_l2", "phi_bound", "grad_l2", "predicted_rate", "ratio"],
    "gap_area_sweep": ["eps", "dist", "n_incl", "strip", "gap_area", "predicted_rate", "ratio"],
}
MEASURED = {"discrepancy_sweep": "discrepancy", "cutoff_sweep": "grad_l2", "gap_area_sweep": "gap_area"}


def make_source(cfg):
    if cfg.source == "gaussian_bump":
        center = cfg.center or (0.5, 0.6)
        return gaussian_bump(center, cfg.width, cfg.amplitude, cfg.radius)
    if cfg.center is None:
        center = (0.5, -0.6) if cfg.layout == "square" else (0.5, 0.6)
    else:
        center = cfg.center
    if len(center) != 2:
        raise ConfigError("center needs two coordinates")
    radius = cfg.radius if cfg.radius is not None else (0.3 if cfg.layout == "square" else 0.2)
    return circular_patch(center, radius, cfg.amplitude)


def _cutoff_kind(layout, eps, dist):
    return "square_case" if layout == "square" and dist >= eps else "segment_case"


def _sweep_row(cfg, shape, cmap, source, eps, dist):
    exp = cfg.experiment
    lay = make_layout(shape, eps, dist, cfg.layout, cfg.mu)
    n = lay.n_incl
    if exp == "discrepancy_sweep":
        cf = build_correction(lay, source, cmap)
        disc = discrepancy_l2(cf, n=cfg.order)
        rate = predicted_rate(exp, cfg.layout, shape.gamma, eps, dist)
        return (eps, dist, n, disc, rate, disc / rate)
    if exp == "cutoff_sweep":
        kind = _cutoff_kind(cfg.layout, eps, dist)
        cf = build_cutoff(kind, eps, dist, shape)
        l2, g2 = cutoff_norms(cf, n=cfg.order)
        hx, hy = cf.half_box
        bound = 2.0 * math.sqrt(hx * hy)
        rate = predicted_rate(exp, cfg.layout, shape.gamma, eps, dist)
        return (eps, dist, n, l2, bound, g2, rate, g2 / rate)
    s = optimal_strip(shape.gamma, eps, dist, shape.rho0)
    area = gap_area(shape, eps, dist, s)
    return (eps, dist, n, s, area, dist * s, area / (dist * s))


def _control_row(cfg, shape, eps, dist):
    exp = cfg.experiment
    if exp == "discrepancy_sweep":
        rate = predicted_rate(exp, cfg.layout, shape.gamma, eps, dist)
        return (eps, dist, 0, 0.0, rate, 0.0)
    if exp == "cutoff_sweep":
        rate = predicted_rate(exp, cfg.layout, shape.gamma, eps, dist)
        return (eps, dist, 0, 0.0, 0.0, 0.0, rate, 0.0)
    s = optimal_strip(shape.gamma, eps, dist, shape.rho0)
    return (eps, dist, 0, s, 0.0, dist * s, 0.0)


def _resume_prefix(path, header, keys):
    """Raw lines of completed rows already in ``path`` that follow the grid order.

    ``keys`` holds (eps, dist, is_control) per expected row in order.
    """
    if not os.path.exists(path):
        return []
    with open(path, encoding="utf-8") as fh:
        lines = fh.readlines()
    if not lines:
        return []
    if lines[0] != header:
        raise ConfigError(f"{path} exists with a different header; remove it or choose another --out")
    done = []
    for line, (e, d, control) in zip(lines[1:], keys):
        cells = line.rstrip("\n").split(",")
        if not line.endswith("\n") or cells[:2] != [e, d] or (cells[2] == "0") != control:
            break
        done.append(line)
    return done


def run_sweep(cfg, out_path=None, threads=1):
    """One row per (eps, dist) plus a leading zero-inclusion control row.

    With ``out_path`` each row is appended and flushed as soon as it and
    all earlier rows are done; an interrupted sweep resumes from the rows
    already on disk.
    """
    if cfg.experiment not in SWEEPS:
        raise ConfigError(f"{cfg.experiment} is not a sweep")
    shape = cfg.make_shape()
    cmap = build_map(shape, cfg.n_modes, fit_tol=cfg.fit_tol) if cfg.experiment == "discrepancy_sweep" else None
    source = make_source(cfg) if cfg.experiment == "discrepancy_sweep" else None
    grid = list(zip(cfg.eps, cfg.dists()))
    cols = COLUMNS[cfg.experiment]
    table = Table(list(cols))
    jobs = [None] + grid
    keys = [(format_value(e), format_value(d), j is None) for j, (e, d) in zip(jobs, [grid[0]] + grid)]
    done = []
    fh = None
    if out_path is not None:
        header = ",".join(cols) + "\n"
        done = _resume_prefix(out_path, header, keys)
        fh = open(out_path, "w", encoding="utf-8", newline="")
        fh.write(header)
        for line in done:
            fh.write(line)
            table.rows.append(tuple(_parse_cell(v) for v in line.rstrip("\n").split(",")))
        fh.flush()

    def work(job):
        if job is None:
            return _control_row(cfg, shape, *grid[0])
        return _sweep_row(cfg, shape, cmap, source, *job)

    pending = jobs[len(done):]
    try:
        with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
            for row in pool.map(work, pending):
                table.rows.append(row)
                if fh is not None:
                    fh.write(format_row(row))
                    fh.flush()
                log.info("%s row eps=%g dist=%g done", cfg.experiment, row[0], row[1])
    finally:
        if fh is not None:
            fh.close()
    return table


def _parse_cell(v):
    try:
        return int(v)
    except ValueError:
        return float(v)


def sweep_summary(cfg, table, spread_limit=None):
    """Summary lines: fitted slopes and the ratio spread of the inclusion rows."""
    rows = table.where(lambda r: r["n_incl"] > 0)
    measured = MEASURED[cfg.experiment]
    lines = [f"experiment = {cfg.experiment}", f"shape = {cfg.shape}", f"layout = {cfg.layout}"]
    ratio = rows.column("ratio")
    spread = float(ratio.max() / ratio.min()) if len(ratio) and ratio.min() > 0 else math.nan
    if len(rows.rows) >= 3:
        for y in (measured, "ratio"):
            try:
                s, c, r2 = fit_slope(rows, "eps", y)
                lines.append(f"slope {y} vs eps = {s:.6g} (intercept {c:.6g}, r2 {r2:.6g})")
            except ValueError as exc:
                lines.append(f"slope {y} vs eps = n/a ({exc})")
    else:
        lines.append("slopes need at least 3 eps values")
    lines.append(f"ratio max/min = {spread:.6g}")
    control = table.where(lambda r: r["n_incl"] == 0).column(measured)
    lines.append(f"check control row is zero: {'PASS' if np.all(control == 0) else 'FAIL'}")
    if spread_limit is not None:
        ok = spread <= spread_limit
        lines.append(f"check ratio max/min <= {spread_limit:g}: {'PASS' if ok else 'FAIL'}")
    return lines


DEFAULT_SPREAD = {"discrepancy_sweep": 3.0, "cutoff_sweep": 2.0, "gap_area_sweep": 2.0}


# --------------------------------------------------------------------------
# flows


@dataclass
class FlowResult:
    table: Table
    mean_abs_flux: float
    n_substeps: int
    final_state: object


def flow_case(cfg, dist, with_inclusions=True, circulation=None, record=True):
    """Run the vortex pair (or any blob set) against one row and record the gate flux.

    With ``with_inclusions=False`` the same gate span is used with no obstacles.
    """
    shape = cfg.make_shape()
    eps = cfg.eps[0]
    lay = make_layout(shape, eps, dist, cfg.layout, cfg.mu)
    if with_inclusions:
        gates = gate_segments(lay, cfg.gate_y)
        if not gates:
            raise ConfigError("the gate row holds fewer than two inclusions")
    else:
        x0 = lay.centers[0, 0] - 0.5 * eps
        x1 = lay.centers[lay.n_cols - 1, 0] + 0.5 * eps
        gates = [((x0, cfg.gate_y), (x1, cfg.gate_y))]
        lay = lay.without_inclusions()
    panels = assemble_panels(lay, cfg.panels)
    v = np.array(cfg.vortices, float)
    state = make_state(v[:, :2], v[:, 2], cfg.delta)
    if lay.n_incl and not np.all(lay.in_fluid(state.positions)):
        raise ConfigError("a vortex starts inside an inclusion")
    if circulation is None:
        circulation = () if lay.n_incl == 0 else (lay.n_incl // 2,)
    circulation = tuple(k for k in circulation if k < lay.n_incl)
    loops = [cell_loop(lay, k) for k in circulation]
    nq = cfg.n_quad if lay.n_incl else max(cfg.n_quad, 64)
    cols = ["time", "flux"] + [f"circ_{k}" for k in circulation] + ["centroid_x", "centroid_y"]
    table = Table(cols)
    fluxes = []
    n_sub = 0
    for n in range(cfg.steps):
        state, k = step_adaptive(state, panels, cfg.dt)
        n_sub += k
        f = float(flux_gates(state, panels, gates, n_quad=nq).sum())
        if not math.isfinite(f):
            raise NumericalFailure(f"non-finite gate flux at step {n + 1}")
        fluxes.append(f)
        if record:
            circ = [circulation_loop(state, panels, lp) for lp in loops]
            cx, cy = state.centroid()
            table.rows.append(tuple([state.time, f] + circ + [float(cx), float(cy)]))
    if state.n_blobs and state.pushed > 0.01 * state.n_blobs * cfg.steps:
        raise NumericalFailure(f"run invalid: {state.pushed} wall pushes exceed 1% of blob-steps")
    return FlowResult(table, float(np.mean(np.abs(fluxes))), n_sub, state)


def run_flow(cfg):
    dist = cfg.dists()[0]
    return flow_case(cfg, dist, circulation=cfg.circulation)


def flow_summary(cfg, res):
    return [f"experiment = {cfg.experiment}", f"eps = {cfg.eps[0]:.17g}", f"dist = {cfg.dists()[0]:.17g}",
            f"steps = {cfg.steps} (rk4 substeps {res.n_substeps})",
            f"time-averaged |flux| = {res.mean_abs_flux:.17g}",
            f"wall pushes = {res.final_state.pushed}"]


@dataclass
class ContrastResult:
    table: Table
    control: float
    permeable: float
    impermeable: float

    @property
    def imp_over_perm(self):
        return self.impermeable / self.permeable

    @property
    def perm_over_control(self):
        return self.permeable / self.control


def flux_contrast(cfg, threads=1):
    """Control (no obstacles), permeable (d = eps^alphas[0]) and impermeable runs."""
    eps = cfg.eps[0]
    a_perm, a_imp = cfg.alphas
    jobs = [(eps ** a_perm, False), (eps ** a_perm, True), (eps ** a_imp, True)]
    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        res = list(pool.map(lambda j: flow_case(cfg, j[0], j[1], circulation=(), record=True), jobs))
    t = Table(["time", "flux_control", "flux_permeable", "flux_impermeable"])
    cols = [r.table.column("flux") for r in res]
    for i, time in enumerate(res[0].table.column("time")):
        t.rows.append((float(time), float(cols[0][i]), float(cols[1][i]), float(cols[2][i])))
    return ContrastResult(t, res[0].mean_abs_flux, res[1].mean_abs_flux, res[2].mean_abs_flux)


def contrast_summary(cfg, res, imp_limit=0.2, perm_tol=0.25):
    ok1 = res.imp_over_perm <= imp_limit
    ok2 = abs(res.perm_over_control - 1.0) <= perm_tol
    return [f"experiment = {cfg.experiment}", f"eps = {cfg.eps[0]:.17g}",
            f"alphas = {cfg.alphas[0]:g}, {cfg.alphas[1]:g}",
            f"time-averaged |flux| control = {res.control:.17g}",
            f"time-averaged |flux| permeable = {res.permeable:.17g}",
            f"time-averaged |flux| impermeable = {res.impermeable:.17g}",
            f"check impermeable/permeable = {res.imp_over_perm:.6g} <= {imp_limit:g}: {'PASS' if ok1 else 'FAIL'}",
            f"check |permeable/control - 1| = {abs(res.perm_over_control - 1):.6g} <= {perm_tol:g}: "
            f"{'PASS' if ok2 else 'FAIL'}"]


def configure_threads(n):
    if n:
        set_threads(n)
