import json
import os
import subprocess
import sys

import numpy as np
import pytest

from porous_euler import _jit, _kernels

needs_numba = pytest.mark.skipif(not _jit.HAVE_NUMBA, reason="numba not installed")


def _panels(n_obs=3, per=16, m=1):
    th = 2 * np.pi * (np.arange(per * m + 1) + 0.5) / (per * m)
    ring = np.exp(1j * th)
    nodes = 0.3 * np.arange(n_obs)[:, None] + 0.1 * ring[None, :]
    a = nodes[:, :-1].ravel()
    b = nodes[:, 1:].ravel()
    mid = 0.5 * (a + b)
    nrm = -1j * (b - a) / np.abs(b - a)
    if m == 1:
        return a, b, mid, nrm, np.arange(a.size)
    # collocate at the central sub-chord of every panel
    c = np.arange(0, a.size, m) + m // 2
    return a, b, mid[c], nrm[c], c


@needs_numba
def test_blob_velocity_agrees():
    rng = np.random.default_rng(0)
    tx, ty = rng.uniform(-1, 1, (2, 300))
    sx, sy = rng.uniform(-1, 1, (2, 40))
    g = rng.normal(size=40)
    for delta in (0.0, 0.05):
        u1, v1 = _kernels.blob_velocity_np(tx, ty, sx, sy, g, delta)
        u2, v2 = _kernels.blob_velocity_nb(tx, ty, sx, sy, g, delta)
        np.testing.assert_allclose(u2, u1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(v2, v1, rtol=1e-12, atol=1e-14)


@needs_numba
def test_panel_velocity_agrees():
    rng = np.random.default_rng(1)
    a, b, _, _, _ = _panels()
    tx, ty = rng.uniform(-0.5, 1.2, (2, 200))
    sigma = rng.normal(size=a.size)
    u1, v1 = _kernels.panel_velocity_np(tx, ty, a, b, sigma)
    u2, v2 = _kernels.panel_velocity_nb(tx, ty, a, b, sigma)
    np.testing.assert_allclose(u2, u1, rtol=1e-11, atol=1e-13)
    np.testing.assert_allclose(v2, v1, rtol=1e-11, atol=1e-13)


@needs_numba
@pytest.mark.parametrize("m", [1, 3])
def test_panel_normal_matrix_agrees(m):
    a, b, mid, nrm, self_sub = _panels(m=m)
    A1 = _kernels.panel_normal_matrix_np(mid, nrm, a, b, m, self_sub)
    A2 = _kernels.panel_normal_matrix_nb(mid, nrm, a, b, m, self_sub)
    np.testing.assert_allclose(A2, A1, rtol=1e-11, atol=1e-13)


@needs_numba
def test_cell_sums_agree():
    rng = np.random.default_rng(3)
    x = 2.0 + rng.uniform(-1, 1, 150) + 1j * rng.uniform(-1, 1, 150)
    tx = 1.5 * x
    dtx = 1.5 + 0.1j * rng.normal(size=150)
    y = rng.uniform(-0.2, 0.2, 60) + 1j * rng.uniform(5, 6, 60)
    ty = 1.5 * y
    w = rng.uniform(0, 1, 60)
    r1 = _kernels.cell_sums_np(x, tx, dtx, y, ty, w, np.log(1.5))
    r2 = _kernels.cell_sums_nb(x, tx, dtx, y, ty, w, np.log(1.5))
    for p, q in zip(r1, r2):
        np.testing.assert_allclose(q, p, rtol=1e-11, atol=1e-12)


_PROBE = """
import json
import numpy as np
from porous_euler import _kernels
from porous_euler.geometry import make_layout, make_shape
from porous_euler.solver import assemble_panels, make_state, velocity_total
panels = assemble_panels(make_layout(make_shape("ellipse", b=0.5), 0.1, 0.02), 32)
st = make_state([[0.3, 0.2], [0.6, -0.1]], [1.0, -0.5], 0.02)
u = velocity_total(st, panels, np.array([[0.25, 0.05], [0.5, 0.3], [0.81, -0.04]]))
print(json.dumps({"kernel": _kernels.blob_velocity.__name__, "u": u.ravel().tolist()}))
"""


def _probe(disable):
    env = dict(os.environ)
    env.pop(_jit.ENV_FLAG, None)
    if disable:
        env[_jit.ENV_FLAG] = "1"
    r = subprocess.run([sys.executable, "-c", _PROBE], capture_output=True, text=True, env=env, check=True)
    return json.loads(r.stdout.strip().splitlines()[-1])


def test_env_flag_selects_numpy_path():
    off = _probe(True)
    assert off["kernel"] == "blob_velocity_np"
    if _jit.HAVE_NUMBA:
        on = _probe(False)
        assert on["kernel"] == "blob_velocity_nb"
        np.testing.assert_allclose(on["u"], off["u"], rtol=1e-10, atol=1e-13)


def test_flag_parsing(monkeypatch):
    for v, want in (("1", False), ("true", False), ("0", True), ("", True)):
        monkeypatch.setenv(_jit.ENV_FLAG, v)
        assert _jit.numba_requested() is want
