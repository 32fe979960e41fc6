import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from porous_euler.geometry import (gap_area, gap_area_mc, make_layout, make_shape, n_columns,
                                   optimal_strip, smoothstep7, smoothstep7_deriv, winding_number)

SHAPES = [("disk", {}), ("ellipse", {"b": 0.5}), ("superdisk", {"gamma": 2.0}),
          ("superdisk", {"gamma": 3.0}), ("stadium", {"rho0": 0.5})]


@pytest.fixture(params=SHAPES, ids=lambda p: f"{p[0]}{p[1] or ''}")
def shape(request):
    kind, kw = request.param
    return make_shape(kind, **kw)


def test_disk_boundary_is_unit_circle():
    d = make_shape("disk")
    assert d.gamma == 1.0
    th = np.linspace(0, 1, 17)[:-1]
    p = d.boundary(th)
    np.testing.assert_allclose(p[:, 0], np.cos(2 * np.pi * th), atol=1e-15)
    np.testing.assert_allclose(p[:, 1], np.sin(2 * np.pi * th), atol=1e-15)


def test_stadium_has_flat_sides():
    s = make_shape("stadium", rho0=0.5)
    assert math.isinf(s.gamma)
    y = np.linspace(-0.5, 0.5, 11)
    np.testing.assert_array_equal(s.half_width(y), 1.0)
    assert np.all(s.level(np.ones(11), y) == 0.0)
    assert s.half_width(0.75) < 1.0


def test_superdisk_lateral_law():
    # x = 1 - |y|^3 / 3 + O(|y|^6) near the lateral point for p = 3
    s = make_shape("superdisk", gamma=2.0)
    y = np.array([1e-3, 1e-2, 5e-2])
    np.testing.assert_allclose(s.lateral_gap(y) / y ** 3, 1.0 / 3.0, rtol=1e-4)


def test_lateral_points_on_boundary(shape):
    assert np.max(np.abs(shape.level(np.array([1.0, -1.0]), np.zeros(2)))) <= 1e-12
    assert abs(winding_number(shape) - 1.0) < 1e-12


def test_flatness_envelopes(shape):
    s = np.linspace(-shape.rho0, shape.rho0, 2001)
    if math.isinf(shape.gamma):
        inner = np.ones_like(s)
    else:
        inner = 1.0 - shape.rho1 * np.abs(s) ** (1 + shape.gamma)
    # the segment [-inner, inner] x {s} lies in K
    assert np.all(shape.inside(inner, s))
    t = np.linspace(-1, 1, 4001)
    outer = 1.0 - shape.envelope(t)
    w = shape.half_width(t)
    assert np.all(w <= outer + 1e-14)


def test_half_width_closed_form_matches_root_finding(shape):
    for s in (0.0, 0.1, 0.3, 0.6, 0.9):
        if s <= shape.height:
            assert abs(shape.half_width(s) - shape.half_width_numeric(s)) < 1e-12


def test_boundary_samples_on_level_set(shape):
    z = shape.sample_boundary(512)
    assert np.max(np.abs(shape.level(z.real, z.imag))) < 1e-12
    chords = np.abs(np.diff(np.append(z, z[0])))
    # chords differ from equal arcs by kappa^2 h^2 / 24 at most
    assert chords.max() / chords.min() < 1 + 2e-4


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        make_shape("triangle")
    with pytest.raises(ValueError):
        make_shape("ellipse", b=1.5)
    with pytest.raises(ValueError):
        make_shape("ellipse", a=2.0, b=0.5)
    with pytest.raises(ValueError):
        make_shape("superdisk", gamma=-1.0)
    with pytest.raises(ValueError):
        make_shape("stadium", rho0=1.0)
    with pytest.raises(ValueError):
        make_shape("disk", radius=2.0)


def test_smoothstep():
    t = np.linspace(-0.5, 1.5, 201)
    v = smoothstep7(t)
    assert v[0] == 0.0 and v[-1] == 1.0
    assert np.all(np.diff(v) >= 0)
    x = np.linspace(0.01, 0.99, 50)
    fd = (smoothstep7(x + 1e-6) - smoothstep7(x - 1e-6)) / 2e-6
    np.testing.assert_allclose(smoothstep7_deriv(x), fd, atol=1e-7)


# --------------------------------------------------------------------------
# layouts


def test_segment_layout_counts():
    d = make_shape("disk")
    lay = make_layout(d, 0.1, 0.01)
    assert lay.n_incl == 9 and n_columns(0.1, 0.01) == 9
    np.testing.assert_allclose(lay.centers[0], [0.05, 0.0])
    assert make_layout(d, 0.1, 0.9).n_incl == 1


def test_square_and_thin_layouts():
    d = make_shape("disk")
    sq = make_layout(d, 0.1, 0.01, "square")
    assert sq.n_incl == 81
    diffs = np.unique(np.round(np.diff(np.unique(sq.centers[:, 1])), 14))
    np.testing.assert_allclose(diffs, [0.11])
    thin = make_layout(d, 0.05, 0.01, "thin_layer", mu=0.5)
    assert thin.n_rows == math.floor(20 ** 0.5)
    np.testing.assert_allclose(np.diff(np.unique(thin.centers[:, 1])), 0.1, rtol=1e-14)


def test_layout_rejections():
    d = make_shape("disk")
    with pytest.raises(ValueError):
        make_layout(d, 0.6, 0.01)
    with pytest.raises(ValueError):
        make_layout(d, 0.1, 0.0)
    with pytest.raises(ValueError):
        make_layout(d, 0.1, 0.01, "hexagonal")
    with pytest.raises(ValueError):
        make_layout(d, 0.1, 0.01, "thin_layer", mu=1.0)


def test_in_fluid_points():
    lay = make_layout(make_shape("disk"), 0.1, 0.01)
    mid = 0.5 * (lay.centers[0] + lay.centers[1])
    res = lay.in_fluid(np.array([[0.05, 0.0], [0.5, 10.0], mid]))
    assert res.tolist() == [False, True, True]


def test_neighbour_boundary_distance(shape):
    eps, d = 0.1, 0.003
    lay = make_layout(shape, eps, d)
    z = shape.sample_boundary(4096, offset=0.0)
    a = lay.centers[0, 0] + 0.5 * eps * z
    b = lay.centers[1, 0] + 0.5 * eps * z
    near_a = a[a.real > lay.centers[0, 0] + 0.4 * eps]
    near_b = b[b.real < lay.centers[1, 0] - 0.4 * eps]
    dmin = np.min(np.abs(near_a[:, None] - near_b[None, :]))
    assert abs(dmin - d) <= 1e-10 * eps


# --------------------------------------------------------------------------
# gap areas


def test_optimal_strip_examples():
    assert optimal_strip(1.0, 0.1, 1e-3) == pytest.approx(0.1, rel=1e-14)
    assert optimal_strip(math.inf, 0.1, 1e-3, rho0=0.5) == 0.5
    assert optimal_strip(1.0, 0.1, 0.1, rho0=0.5) == 0.5


def test_gap_area_degenerate_strip(shape):
    assert gap_area(shape, 0.1, 0.01, 0.0) == 0.0


@pytest.mark.parametrize("s", [0.1, 0.3, 0.5])
def test_stadium_gaps_are_rectangles(s):
    st_ = make_shape("stadium", rho0=0.5)
    eps, d = 0.05, 1e-3
    exact = (n_columns(eps, d) - 1) * d * eps * s
    assert gap_area(st_, eps, d, s) == pytest.approx(exact, rel=1e-12)


def test_gap_area_against_monte_carlo():
    # frozen oracle: gap_area_mc(disk, 0.2, 0.002, 0.1, 10^7 samples, seed 0)
    mc, sigma = 0.00013968057600000002, 4.0907431082974507e-07
    val = gap_area(make_shape("disk"), 0.2, 0.002, 0.1)
    assert abs(val - mc) <= 3 * sigma


def test_gap_area_mc_live_small():
    d = make_shape("disk")
    mc, sigma = gap_area_mc(d, 0.2, 0.002, 0.1, n_samples=400_000, seed=3)
    assert abs(gap_area(d, 0.2, 0.002, 0.1) - mc) <= 4 * sigma


def test_gap_area_monotone(shape):
    s = np.linspace(0, shape.rho0, 8)
    a = [gap_area(shape, 0.05, 1e-3, x) for x in s]
    assert np.all(np.diff(a) >= 0)


def test_gap_area_rejects_wide_strip():
    with pytest.raises(ValueError):
        gap_area(make_shape("disk"), 0.1, 0.01, 0.9)


@settings(max_examples=25, deadline=None)
@given(eps=st.floats(0.02, 0.5), dist=st.floats(1e-6, 0.5))
def test_column_count_property(eps, dist):
    n = n_columns(eps, dist)
    # all n inclusions fit in [0, 1] with the prescribed gaps, n + 1 do not
    assert n * eps + (n - 1) * dist <= 1 + 1e-9
    assert (n + 1) * eps + n * dist > 1 - 1e-9
