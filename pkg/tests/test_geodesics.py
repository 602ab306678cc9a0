import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from berger.core import (
    BergerParams,
    GeometryError,
    check_isometry,
    frame_coords,
    hopf_project,
    left_matrix,
    left_translation,
    metric_eval,
    normalize,
    xi_field,
)
from berger.geodesics import (
    HorizontalGeodesic,
    VerticalGeodesic,
    are_linked,
    build_polygon,
    connecting_vertical_segment,
    horizontal_field,
    horizontal_geodesic,
    link_status,
    normal_form_isometry,
    reflection_across_gamma3,
    vertical_geodesic,
)

P = BergerParams(3.0, 1.0)
RNG = np.random.default_rng(99)
LAM_MAX = np.pi / (2 * np.sqrt(3.0))


def fd(f, t, h=1e-4):
    return (f(t + h) - f(t - h)) / (2 * h)


def covariant_acceleration(params, curve, t, h=1e-4):
    """Frame components of D_t c' from finite differences and the connection table."""
    G = params.connection_table()

    def comps(s):
        return frame_coords(params, curve(s), fd(curve, s, h))

    a = comps(t)
    da = (comps(t + h) - comps(t - h)) / (2 * h)
    return da + np.einsum("i,j,ijk->k", a, a, G)


@pytest.mark.parametrize("params", [P, BergerParams(1.0, -0.5), BergerParams(4.0, 1.0)])
def test_vertical_geodesic(params):
    p = normalize(RNG.normal(size=4))
    assert np.allclose(vertical_geodesic(params, p, 0.0), p)
    assert np.linalg.norm(vertical_geodesic(params, p, params.vertical_length) - p) < 1e-10
    for s in np.linspace(0, 5, 7):
        v = lambda t: vertical_geodesic(params, p, t)
        assert np.allclose(fd(v, s), xi_field(params, v(s)), atol=1e-6)
        d = fd(v, s)
        assert abs(metric_eval(params, d, d, base=v(s)) - 1) < 1e-8
        assert np.linalg.norm(covariant_acceleration(params, v, s)) < 1e-5


@pytest.mark.parametrize("params", [P, BergerParams(1.0, -0.5), BergerParams(4.0, 1.0)])
def test_horizontal_geodesic(params):
    p = normalize(RNG.normal(size=4))
    phi = 0.77
    h = lambda t: horizontal_geodesic(params, p, phi, t)
    assert np.allclose(h(0.0), p)
    assert np.linalg.norm(h(params.horizontal_length) - p) < 1e-10
    assert np.allclose(fd(h, 0.0), horizontal_field(params, p, phi), atol=1e-7)
    for s in np.linspace(0, 5, 7):
        d = fd(h, s)
        assert abs(metric_eval(params, d, d, base=h(s)) - 1) < 1e-8
        # tangent stays equal to F_phi
        assert np.allclose(d, horizontal_field(params, h(s), phi), atol=1e-7)
        assert np.linalg.norm(covariant_acceleration(params, h, s)) < 1e-5


def test_h1_closed_form():
    t = np.linspace(0, 3, 11)
    a = np.sqrt(3) * t / 2
    expected = np.stack([np.cos(a), 0 * a, np.sin(a), 0 * a], axis=-1)
    assert np.allclose(horizontal_geodesic(P, [1.0, 0, 0, 0], 0.0, t), expected, atol=1e-15)


def brute_min_distance(h1, h2, n=2000):
    _, a = h1.samples(n)
    _, b = h2.samples(n)
    d2 = np.sum(a**2, 1)[:, None] + np.sum(b**2, 1)[None, :] - 2 * a @ b.T
    return np.sqrt(max(d2.min(), 0.0))


def test_linkedness_examples():
    poly = build_polygon(P, np.pi / (4 * np.sqrt(3)))
    h1, h2 = poly.h1_geodesic(), poly.h2_geodesic()
    assert not are_linked(h1, h1)
    assert are_linked(h1, h2)
    rep = link_status(h1, h2)
    assert rep.min_distance == pytest.approx(brute_min_distance(h1, h2), abs=1e-5)
    p0 = build_polygon(P, 0.0)
    assert link_status(p0.h1_geodesic(), p0.h2_geodesic()).status == "intersecting"
    with pytest.raises(GeometryError):
        link_status(h1, h2, samples=10)


def test_linkedness_symmetric_and_isometry_invariant():
    for _ in range(5):
        a = HorizontalGeodesic(P, normalize(RNG.normal(size=4)), RNG.uniform(0, 6))
        b = HorizontalGeodesic(P, normalize(RNG.normal(size=4)), RNG.uniform(0, 6))
        iso = left_translation(P, normalize(RNG.normal(size=4))).compose(
            check_isometry(P, np.diag([1.0, -1.0, -1.0, 1.0]))
        )
        r1 = link_status(a, b)
        assert link_status(b, a).status == r1.status
        assert link_status(a.mapped(iso), b.mapped(iso)).status == r1.status
        assert link_status(a.mapped(iso), b.mapped(iso)).min_distance == pytest.approx(r1.min_distance, abs=1e-9)


def test_intersecting_geodesics_rejected():
    a = HorizontalGeodesic(P, [1.0, 0, 0, 0], 0.0)
    b = HorizontalGeodesic(P, [1.0, 0, 0, 0], 1.0)
    with pytest.raises(GeometryError):
        connecting_vertical_segment(P, a, b)


def test_identical_curves_give_zero_pitch():
    a = HorizontalGeodesic(P, normalize(RNG.normal(size=4)), 0.3)
    assert connecting_vertical_segment(P, a, a).ell == 0.0
    shifted = HorizontalGeodesic(P, a(0.4), 0.3)
    assert connecting_vertical_segment(P, a, shifted).ell == 0.0


@pytest.mark.parametrize("lam", np.linspace(0.05, 1.0, 6) * LAM_MAX)
def test_polygon_pair_pitch(lam):
    poly = build_polygon(P, lam)
    seg = connecting_vertical_segment(P, poly.h1_geodesic(), poly.h2_geodesic())
    assert seg.ell == pytest.approx(4 * P.tau * lam / np.sqrt(P.kappa), abs=1e-10)
    assert seg.phi == pytest.approx(np.pi, abs=1e-12)


@pytest.mark.parametrize("c,alpha", [(1.0, 0.4), (0.5, 1.1), (0.25, 2.0)])
def test_fc_boundary_pair_pitch(c, alpha):
    # f^c(., 0) and f^c(., alpha): the vertical rotation on z is e^{-i c kappa alpha / 4 tau}
    r = P.kappa / (4 * P.tau)
    h1 = HorizontalGeodesic(P, [1.0, 0, 0, 0], 0.0)
    h2 = HorizontalGeodesic(P, [np.cos(c * r * alpha), -np.sin(c * r * alpha), 0, 0], (c + 1) * r * alpha)
    seg = connecting_vertical_segment(P, h1, h2)
    assert seg.ell == pytest.approx(c * alpha, abs=1e-10)
    assert seg.sign == -1
    # normal form: h2 sent through v(sign * ell) with field angle phi
    iso = normal_form_isometry(P, h1, seg)
    m2 = h2.mapped(iso)
    target = vertical_geodesic(P, [1.0, 0, 0, 0], seg.sign * seg.ell)
    assert np.min(np.linalg.norm(m2.samples(4000)[1] - target, axis=1)) < 5e-3
    assert seg.phi == pytest.approx(np.mod((c + 1) * r * alpha, 2 * np.pi), abs=1e-12)


@given(
    st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1),
    st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1),
    st.floats(0, 6.2),
    st.floats(0, 6.2),
)
@settings(max_examples=25, deadline=None)
def test_segment_is_bounded_and_joins_the_curves(p, q, a, b):
    h1 = HorizontalGeodesic(P, normalize(p), a)
    h2 = HorizontalGeodesic(P, normalize(q), b)
    try:
        seg = connecting_vertical_segment(P, h1, h2)
    except GeometryError:
        return
    assert 0 <= seg.ell <= 2 * P.tau * np.pi / P.kappa + 1e-12
    end = vertical_geodesic(P, h1(seg.t1), seg.sign * seg.ell)
    assert np.allclose(end, h2(seg.t2), atol=1e-8)


def test_polygon_range():
    with pytest.raises(GeometryError):
        build_polygon(P, -0.1)
    with pytest.raises(GeometryError):
        build_polygon(P, LAM_MAX * 1.01)
    poly = build_polygon(P, LAM_MAX)
    assert poly.domains["gamma2"][1] == pytest.approx(np.pi / (2 * np.sqrt(P.kappa)))


LAMS = np.linspace(0.0, LAM_MAX, 50)


@pytest.mark.parametrize("params", [P, BergerParams(2.0, 0.4)])
def test_polygon_identities_on_grid(params):
    lmax = np.pi / (2 * np.sqrt(params.kappa))
    for lam in np.linspace(0, lmax, 50):
        poly = build_polygon(params, lam)
        chain = poly.chain(8)
        for (_, _, a), (_, _, b) in zip(chain, chain[1:] + chain[:1]):
            assert np.linalg.norm(a[-1] - b[0]) < 1e-12
        rho = reflection_across_gamma3(params, lam)
        t = np.linspace(0, params.horizontal_length, 100)
        assert np.max(np.abs(rho(poly.h1(t)) - poly.h2(t))) < 1e-10
        assert np.allclose(rho.matrix @ rho.matrix, np.eye(4), atol=1e-14)
        s = np.linspace(*poly.domains["gamma3"], 100)
        g3 = poly.gamma3(s)
        assert np.max(np.abs(rho(g3) - g3)) < 1e-12
        L = left_matrix(poly.gamma2(lam))
        v0 = vertical_geodesic(params, [1.0, 0, 0, 0], s)
        assert np.max(np.abs(v0 @ L.T - g3)) < 1e-10


def test_polygon_segment_types():
    poly = build_polygon(P, 0.3)
    for name in ("gamma1", "gamma2", "gamma4"):
        a, b = poly.domains[name]
        t = 0.5 * (a + b)
        c = poly.segment(name)
        d = fd(c, t)
        assert abs(frame_coords(P, c(t), d)[2]) < 1e-9
    t = 0.5
    d = fd(poly.gamma3, t)
    assert np.allclose(d, xi_field(P, poly.gamma3(t)), atol=1e-7)


@pytest.mark.parametrize("lam", [0.2, 0.5, LAM_MAX])
def test_polygon_projects_to_convex_sector(lam):
    poly = build_polygon(P, lam)
    chain = poly.chain(40)
    pts = hopf_project(P, np.concatenate([p for _, _, p in chain]))
    for name, _, seg in chain:
        if name == "gamma3":
            continue
        proj = hopf_project(P, seg)
        n = np.cross(proj[0], proj[-1])
        n /= np.linalg.norm(n)
        side = pts @ n
        assert np.all(side >= -1e-12) or np.all(side <= 1e-12)


def test_side_reflections_fix_their_sides():
    poly = build_polygon(P, 0.35)
    for name, iso in (("gamma2", poly.gamma2_reflection()), ("gamma4", poly.gamma4_reflection())):
        t = np.linspace(*poly.domains[name], 20)
        pts = poly.segment(name)(t)
        assert np.max(np.abs(iso(pts) - pts)) < 1e-14
        assert iso.vcommute == -1


def test_vertical_geodesic_class():
    v = VerticalGeodesic(P, np.array([1.0, 0, 0, 0]))
    assert v.length == pytest.approx(8 * np.pi / 3)
    assert np.allclose(v(v.length), [1, 0, 0, 0])
