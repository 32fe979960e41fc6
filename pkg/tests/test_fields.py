import math

import numpy as np
import pytest

from porous_euler.conformal import as_complex, as_pairs, build_map
from porous_euler.fields import (biot_savart_exterior, biot_savart_plane, blob_sum, check_sup_bound,
                                 circular_patch, gaussian_bump)
from porous_euler.geometry import make_shape


def speed(u):
    return np.hypot(u[..., 0], u[..., 1])


def test_patch_closed_form_examples():
    f = circular_patch((0.0, 0.0), 1.0, 1.0)
    u = biot_savart_plane(f, np.array([[2.0, 0.0], [0.0, 0.0], [0.5, 0.0]]))
    np.testing.assert_allclose(u, [[0.0, 0.25], [0.0, 0.0], [0.0, 0.25]], atol=1e-15)


def test_gaussian_radial_profile():
    # axisymmetric vorticity: u = m(r) / (2 pi r) e_theta with m(r) the enclosed mass
    f = gaussian_bump((0.3, -0.2), width=0.2, amplitude=2.0, truncation=0.8)
    r = np.array([0.05, 0.2, 0.45, 0.79, 0.9, 1.25, 2.0])
    x = np.stack([0.3 + r * np.cos(1.0), -0.2 + r * np.sin(1.0)], -1)
    u = biot_savart_plane(f, x)
    rc = np.minimum(r, 0.8)
    m = 2.0 * math.pi * 0.04 * -np.expm1(-rc ** 2 / 0.04)
    np.testing.assert_allclose(speed(u), m / (2 * math.pi * r), rtol=1e-8)
    # direction is counter-clockwise for positive vorticity
    e_theta = np.stack([-np.sin(1.0) * np.ones_like(r), np.cos(1.0) * np.ones_like(r)], -1)
    assert np.all((u * e_theta).sum(-1) > 0)


def test_blob_sum_is_lamb_oseen():
    f = blob_sum([[0.0, 0.0]], [1.0], 0.1)
    x = np.array([[0.3, 0.0], [0.0, 2.0]])
    u = biot_savart_plane(f, x)
    r = np.array([0.3, 2.0])
    np.testing.assert_allclose(speed(u), -np.expm1(-r ** 2 / 0.01) / (2 * math.pi * r), rtol=1e-13)


def test_quadrature_mass():
    for f in (circular_patch((1, 2), 0.3, 1.5), gaussian_bump((0, 0), 0.1, 3.0)):
        _, w = f.quadrature(32, 64)
        assert abs(w.sum() - f.total_mass) <= 1e-8 * abs(f.total_mass)


def test_discrete_curl_and_divergence():
    f = gaussian_bump((0.0, 0.0), width=0.3, amplitude=1.0, truncation=1.2)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-0.5, 0.5, (12, 2))
    h = 1e-4
    ex, ey = np.array([h, 0.0]), np.array([0.0, h])
    up = biot_savart_plane(f, pts + ex)
    um = biot_savart_plane(f, pts - ex)
    vp = biot_savart_plane(f, pts + ey)
    vm = biot_savart_plane(f, pts - ey)
    curl = (up[:, 1] - um[:, 1] - vp[:, 0] + vm[:, 0]) / (2 * h)
    div = (up[:, 0] - um[:, 0] + vp[:, 1] - vm[:, 1]) / (2 * h)
    dens = f.density(pts)
    np.testing.assert_allclose(curl, dens, rtol=1e-3)
    assert np.all(np.abs(div) <= 1e-6 * speed(biot_savart_plane(f, pts)) + 1e-9)


def test_sup_bound_ratio_scale_invariant():
    r1 = check_sup_bound(circular_patch((0, 0), 1.0, 1.0))
    r4 = check_sup_bound(circular_patch((0, 0), 1.0, 4.0))
    assert r1.sup_speed == pytest.approx(0.5, rel=1e-12)
    assert r1.ratio == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-12)
    # sup |u| and ||f||_1^(1/2) ||f||_inf^(1/2) both scale linearly with the amplitude
    assert r4.ratio == pytest.approx(r1.ratio, rel=1e-12)
    assert check_sup_bound(circular_patch((0, 0), 1.0, 0.0)).ratio == 0.0


# --------------------------------------------------------------------------
# exterior law


@pytest.fixture(scope="module")
def disk_map():
    return build_map(make_shape("disk"))


def test_exterior_tangency_and_circulation(disk_map):
    f = circular_patch((3.0, 0.0), 0.5)
    z = np.exp(2j * np.pi * (np.arange(256) + 0.5) / 256)
    u = as_complex(biot_savart_exterior(disk_map, f, as_pairs(z)))
    assert np.max(np.abs((u * np.conj(z)).real)) <= 1e-8
    loop = 1.5 * np.exp(2j * np.pi * np.arange(512) / 512)
    v = as_complex(biot_savart_exterior(disk_map, f, as_pairs(loop)))
    circ = np.sum((v * np.conj(1j * loop)).real) * 2 * np.pi / 512
    assert abs(circ) <= 1e-8


def test_exterior_matches_image_system(disk_map):
    f = circular_patch((3.0, 0.0), 0.5)
    gx, gy = np.meshgrid(np.linspace(-2.5, 5.5, 12), np.linspace(-3, 3, 12))
    z = (gx + 1j * gy).ravel()
    z = z[np.abs(z) > 1]
    u = as_complex(biot_savart_exterior(disk_map, f, as_pairs(z)))
    # sources by fine polar quadrature, images -w at 1/conj(y), +w at 0
    r, wr = np.polynomial.legendre.leggauss(48)
    r, wr = 0.25 * (r + 1), 0.25 * wr
    th = 2 * np.pi * np.arange(96) / 96
    y = (3.0 + r[:, None] * np.exp(1j * th)).ravel()
    w = ((wr * r)[:, None] * np.full(96, 2 * np.pi / 96)).ravel()
    img = (-w * 1j / np.conj(z[:, None] - 1 / np.conj(y))).sum(1) + w.sum() * 1j / np.conj(z)
    ref = as_complex(biot_savart_plane(f, as_pairs(z))) + img / (2 * np.pi)
    assert np.max(np.abs(u - ref)) <= 1e-6 * np.max(np.abs(ref))


@pytest.mark.parametrize("kind,kw", [("ellipse", {"b": 0.5}), ("superdisk", {"gamma": 3.0})])
def test_exterior_tangency_general_shapes(kind, kw):
    cmap = build_map(make_shape(kind, **kw), n_modes=128)
    f = gaussian_bump((2.5, 0.5), 0.2, 1.0)
    bnd = cmap.shape.sample_boundary(256)
    z = bnd * (1 + 1e-9)
    u = as_complex(biot_savart_exterior(cmap, f, as_pairs(z)))
    tang = np.roll(bnd, -1) - np.roll(bnd, 1)
    n = -1j * tang / np.abs(tang)
    assert np.max(np.abs((u * np.conj(n)).real)) <= 1e-3 * np.max(np.abs(u))


def test_exterior_tends_to_plane_law_as_obstacle_shrinks(disk_map):
    # obstacle eps K, source fixed: scale to template units and back
    f = circular_patch((2.0, 0.5), 0.5)
    x = 0.8 * np.exp(2j * np.pi * np.arange(16) / 16)
    plane = as_complex(biot_savart_plane(f, as_pairs(x)))
    errs = []
    for eps in (0.2, 0.1, 0.05):
        g = circular_patch((2.0 / eps, 0.5 / eps), 0.5 / eps)
        u = eps * as_complex(biot_savart_exterior(disk_map, g, as_pairs(x / eps)))
        errs.append(np.max(np.abs(u - plane)))
    assert errs[0] > errs[1] > errs[2]


def test_exterior_rejections(disk_map):
    with pytest.raises(ValueError):
        biot_savart_exterior(disk_map, circular_patch((3, 0), 0.5), np.array([[0.5, 0.0]]))
    with pytest.raises(ValueError):
        biot_savart_exterior(disk_map, circular_patch((1.2, 0), 0.5), np.array([[3.0, 0.0]]))
