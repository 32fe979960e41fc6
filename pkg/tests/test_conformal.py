import math

import numpy as np
import pytest

from porous_euler.conformal import ConformalFitError, build_map, green, reflect, verify_map_estimates
from porous_euler.geometry import make_shape


@pytest.fixture(scope="module")
def maps():
    return {
        "disk": build_map(make_shape("disk")),
        "ellipse": build_map(make_shape("ellipse", b=0.5)),
        "superdisk2": build_map(make_shape("superdisk", gamma=2.0), n_modes=64),
        "superdisk3": build_map(make_shape("superdisk", gamma=3.0), n_modes=128),
    }


def _exterior_points(cmap, n=400, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.uniform(1.0, 30.0, n) * np.exp(2j * np.pi * rng.random(n))
    return cmap.inverse(w)


def test_disk_is_identity(maps):
    m = maps["disk"]
    assert m.beta == 1.0
    z = np.array([2.0 + 1j, -3.0j, 1.0])
    np.testing.assert_array_equal(m.forward(z), z)


def test_round_ellipse_is_identity():
    m = build_map(make_shape("ellipse", b=1.0))
    assert m.mode == "identity" and m.beta == 1.0


def test_superdisk_fit_residual(maps):
    assert maps["superdisk2"].boundary_residual() <= 1e-6
    assert maps["superdisk3"].boundary_residual() <= 1e-8


def test_fit_failure_is_reported():
    with pytest.raises(ConformalFitError):
        build_map(make_shape("stadium"), n_modes=64, fit_tol=1e-6)


@pytest.mark.parametrize("name", ["ellipse", "superdisk2", "superdisk3"])
def test_map_invariants(maps, name):
    m = maps[name]
    tol = 1e-6 if name == "superdisk2" else 1e-8
    bnd = m.shape.sample_boundary(777, offset=0.123)
    assert np.max(np.abs(np.abs(m.forward(bnd)) - 1.0)) <= tol
    z = _exterior_points(m)
    assert np.all(np.abs(m.forward(z)) >= 1.0 - tol)
    back = m.inverse(m.forward(z))
    assert np.max(np.abs(back - z) / np.abs(z)) <= 1e-8
    far = 1e3 * np.exp(2j * np.pi * np.arange(64) / 64)
    assert np.max(np.abs(m.forward(far) - m.beta * far)) <= m.h_bound * (1 + 1e-9)
    assert m.beta > 0


@pytest.mark.parametrize("name", ["ellipse", "superdisk2"])
def test_far_field_and_univalence(maps, name):
    m = maps[name]
    x = 100.0 * np.exp(2j * np.pi * np.arange(50) / 50) * np.linspace(1, 5, 50)
    assert np.all(np.abs(m.forward(x) / x - m.beta) <= m.h_bound / np.abs(x) * (1 + 1e-9))
    # polar grid of preimages: the image winds once around each ring, no fold-overs
    w = np.linspace(1.01, 4.0, 30)[:, None] * np.exp(2j * np.pi * np.arange(256) / 256)[None, :]
    z = m.inverse(w)
    dth = np.angle(np.roll(z, -1, axis=1) / z).sum(1) / (2 * np.pi)
    np.testing.assert_allclose(dth, 1.0, atol=1e-12)
    assert np.all(np.diff(np.abs(z).min(1)) > 0)


def test_derivative_matches_finite_differences(maps):
    m = maps["superdisk2"]
    z = _exterior_points(m, 20, seed=1)
    h = 1e-6
    fd = (m.forward(z + h) - m.forward(z - h)) / (2 * h)
    np.testing.assert_allclose(m.derivative(z), fd, rtol=1e-7)


def test_reflect_examples():
    np.testing.assert_allclose(reflect(np.array([2.0, 0.0])), [0.5, 0.0])
    np.testing.assert_allclose(reflect(np.array([0.0, 1.0])), [0.0, 1.0])
    np.testing.assert_allclose(reflect(np.array([3.0, 4.0])), [0.12, 0.16])
    with pytest.raises(ValueError):
        reflect(np.array([0.0, 0.0]))


def test_green_disk_example(maps):
    g = green(maps["disk"], np.array([2.0, 0.0]), np.array([3.0, 0.0]))
    assert g == pytest.approx(math.log(1 / 5) / (2 * math.pi), rel=1e-15)


def test_green_image_charge_oracle(maps):
    rng = np.random.default_rng(7)
    x = rng.uniform(1.05, 5, 200) * np.exp(2j * np.pi * rng.random(200))
    y = rng.uniform(1.05, 5, 200) * np.exp(2j * np.pi * rng.random(200))
    # unit charge at y, image charge at y* = y / |y|^2 scaled by |y|
    ystar = y / np.abs(y) ** 2
    ref = (np.log(np.abs(x - y)) - np.log(np.abs(y) * np.abs(x - ystar))) / (2 * np.pi)
    np.testing.assert_allclose(green(maps["disk"], x, y), ref, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name,tol", [("disk", 1e-12), ("ellipse", 1e-12), ("superdisk3", 1e-8)])
def test_green_vanishes_on_boundary(maps, name, tol):
    m = maps[name]
    bnd = m.shape.sample_boundary(512)
    y = _exterior_points(m, 64, seed=2)
    y = y[np.abs(m.forward(y)) > 1.1]
    assert np.max(np.abs(green(m, bnd[:, None], y[None, :]))) <= tol


@pytest.mark.parametrize("name", ["ellipse", "superdisk2"])
def test_green_symmetric_and_negative(maps, name):
    m = maps[name]
    x = _exterior_points(m, 1000, seed=3)
    y = _exterior_points(m, 1000, seed=4)
    g1 = green(m, x, y)
    g2 = green(m, y, x)
    assert np.max(np.abs(g1 - g2)) <= 1e-10
    assert np.all(g1 < 0)


def test_green_rejections(maps):
    with pytest.raises(ValueError):
        green(maps["disk"], np.array([2.0, 0.0]), np.array([2.0, 0.0]))
    with pytest.raises(ValueError):
        green(maps["disk"], np.array([0.2, 0.0]), np.array([2.0, 0.0]))


def test_map_estimates_disk(maps):
    e = verify_map_estimates(maps["disk"], 0.1)
    np.testing.assert_allclose([e.lip_forward, e.lip_inverse, e.c1, e.c2, e.c3, e.c4],
                               [2.0, 0.5, 2.0, 2.0, 0.5, 0.5], rtol=1e-9)


def test_map_estimates_stable(maps):
    for name in ("ellipse", "superdisk2"):
        a = verify_map_estimates(maps[name], 0.1)
        b = verify_map_estimates(maps[name], 0.05)
        c = verify_map_estimates(maps[name], 0.025)
        for field in ("lip_forward", "lip_inverse", "c1", "c2", "c3", "c4"):
            vals = np.array([getattr(a, field), getattr(b, field), getattr(c, field)])
            assert np.all(np.isfinite(vals)) and np.all(vals > 0)
            assert vals.max() / vals.min() <= 2.0
