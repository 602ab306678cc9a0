import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from berger.core import BergerParams, GeometryError
from berger.geodesics import GeodesicPolygon
from berger.h2r import H2RIsometry, VerticalPlane, boost_matrix, geodesic_curvature_h2, lift, product_distance
from berger.mesh import ruled_disk
from berger.plateau import SolveConfig, minimize_area
from berger.surfaces import FcSpec, HelicoidSpec, fc_point, helicoid_point, fc_shape_operator, half_period, neck_curvature
from berger.daniel import (
    DEFAULT_ROTATION_SIGN,
    SurfaceData,
    classify_slope,
    fit_period,
    h1_status,
    hypotheses_and_axis,
    mirror_curve_report,
    quarter_mirrors,
    reconstruct_sister,
    return_length,
    rotation_matrix,
    sister_data,
    sister_pipeline,
    surface_data,
    unfold_quarter,
)

ROUND = BergerParams(4.0, 1.0)
LAM = np.pi / (4 * np.sqrt(3))


def fc_patch(c, n=17, half_width=0.8, y_max=None, ny=None, H=1.0):
    spec = FcSpec(H, c)
    ax = spec.axis_x
    xs = np.linspace(ax - half_width, ax + half_width, n)
    ys = np.linspace(0.0, half_period(H, c) if y_max is None else y_max, ny or 2 * n - 1)
    return spec, xs, ys, surface_data(spec.params, lambda x, y: fc_point(spec, x, y), xs, ys)


def boost(d=0.7, shift=0.3, flip=1):
    p = lift(0.2, -0.1)
    u = np.array([0.0, 1.0, 0.0])
    u = u + (u @ np.diag([-1.0, 1.0, 1.0]) @ p) * p
    u = u / np.sqrt(u @ np.diag([-1.0, 1.0, 1.0]) @ u)
    return H2RIsometry(boost_matrix(p, u, d), shift, flip)


# ------------------------------------------------------------- extraction


@pytest.mark.parametrize("c", [1.0, 0.5, 0.0])
def test_fc_axis_data(c):
    spec, xs, ys, d = fc_patch(c)
    i = len(xs) // 2
    assert xs[i] == pytest.approx(spec.axis_x)
    # the axis is a horizontal geodesic only in the sense of its normal: nu vanishes there
    assert np.max(np.abs(d.nu[i])) < 1e-10
    assert np.max(np.abs(d.shape[i] - fc_shape_operator(spec))) < 1e-5


@given(st.floats(0.0, 1.0), st.floats(-1.0, 1.0), st.floats(0.0, 3.0))
@settings(max_examples=20, deadline=None)
def test_tangent_part_and_nu_are_unit(c, dx, y0):
    spec = FcSpec(1.0, c)
    xs = spec.axis_x + dx + 0.05 * np.arange(-2, 3)
    ys = y0 + 0.05 * np.arange(-2, 3)
    d = surface_data(spec.params, lambda x, y: fc_point(spec, x, y), xs, ys)
    assert np.max(np.abs(d.tangent_norm2() + d.nu**2 - 1.0)) < 1e-8
    assert np.max(np.abs(d.mean_curvature())) < 1e-6


def test_umbrella_is_ruled_by_its_radii():
    P = BergerParams(3.0, 1.0)
    f = lambda a, t: np.stack([np.cos(a), 0 * a, np.sin(a) * np.cos(t), np.sin(a) * np.sin(t)], -1)
    n = 32
    ts = 2 * np.pi * np.arange(n) / n
    as_ = np.linspace(0.2, 1.2, 9)
    d = surface_data(P, f, as_, ts)
    b = d.metric_matrix() @ d.shape  # second fundamental form
    assert np.max(np.abs(b[..., 0, 0])) < 1e-7  # radial lines are geodesics
    assert np.max(np.abs(d.mean_curvature())) < 1e-7
    # Cartesian chart around the centre, where the tangent plane is horizontal
    g = lambda u, v: np.stack([np.ones_like(u), 0 * u, u, v], -1) / np.sqrt(1 + u * u + v * v)[..., None]
    d0 = surface_data(P, g, np.linspace(-0.2, 0.2, 5), np.linspace(-0.2, 0.2, 5))
    assert abs(d0.nu[2, 2]) == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(d0.shape[2, 2])) < 1e-8


@pytest.mark.parametrize("kappa, tau", [(3.0, 1.0), (2.0, 0.8), (5.0, 0.6)])
def test_umbrella_axis_shape_operator(kappa, tau):
    P = BergerParams(kappa, tau)
    spec = HelicoidSpec(P, 0.0)
    ax = np.pi / np.sqrt(kappa)
    xs = ax + 0.02 * np.arange(-3, 4)
    d = surface_data(P, lambda x, y: helicoid_point(spec, x, y), xs, np.linspace(0.1, 0.9, 9))
    # shape operator in the orthonormal frame of the (orthogonal) coordinate lines
    scale = np.sqrt(d.metric[3][:, [0, 2]])
    S = scale[:, :, None] * d.shape[3] / scale[:, None, :]
    m = tau - kappa / (4 * tau)  # neck parameter zero in the m-formula
    assert np.max(np.abs(d.metric[3][:, 1])) < 1e-10
    assert np.max(np.abs(S - np.array([[0.0, m], [m, 0.0]]))) < 1e-4


@pytest.mark.parametrize("psi", [0.4, 1.0, 1.3])
def test_distance_sphere_shape_operator_is_umbilic(psi):
    f = lambda th, ph: np.stack(
        [np.full_like(th, np.cos(psi)), np.sin(psi) * np.sin(th) * np.cos(ph), np.sin(psi) * np.sin(th) * np.sin(ph), np.sin(psi) * np.cos(th)],
        -1,
    )
    d = surface_data(ROUND, f, np.linspace(0.5, 2.5, 7), np.linspace(0.0, 2.0, 7))
    S = d.shape
    k = np.cos(psi) / np.sin(psi)
    assert np.max(np.abs(np.abs(S[..., 0, 0]) - k)) < 1e-6
    assert np.max(np.abs(S[..., 0, 0] - S[..., 1, 1])) < 1e-8
    assert np.max(np.abs(S[..., 0, 1])) + np.max(np.abs(S[..., 1, 0])) < 1e-8


def test_grid_and_analytic_extraction_agree():
    spec = FcSpec(1.0, 0.5)
    xs = np.linspace(1.2, 2.4, 65)
    ys = np.linspace(0.0, 1.5, 65)
    f = lambda x, y: fc_point(spec, x, y)
    a = surface_data(spec.params, f, xs, ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    b = surface_data(spec.params, f(X, Y), xs, ys)
    assert np.max(np.abs(a.metric - b.metric)) < 1e-6
    assert np.max(np.abs(a.shape - b.shape)) < 1e-4
    assert np.max(np.abs(a.christoffel - b.christoffel)) < 1e-4


def test_degenerate_metric_is_rejected():
    pts = np.zeros((6, 6, 4))
    pts[..., 0] = 1.0
    with pytest.raises(GeometryError, match="degenerate metric"):
        surface_data(ROUND, pts, np.arange(6.0), np.arange(6.0))


# ------------------------------------------------------------- sister map


def random_data(rng, n=4):
    A = rng.normal(size=(n, n, 2, 2))
    I = A @ np.swapaxes(A, -1, -2) + 0.5 * np.eye(2)
    Bs = rng.normal(size=(n, n, 2, 2))
    b = Bs + np.swapaxes(Bs, -1, -2)
    Iinv = np.linalg.inv(I)
    b = b - 0.5 * np.trace(Iinv @ b, axis1=-2, axis2=-1)[..., None, None] * I  # traceless
    metric = np.stack([I[..., 0, 0], I[..., 0, 1], I[..., 1, 1]], -1)
    return SurfaceData(
        BergerParams.from_mean_curvature(1.0),
        np.arange(n, dtype=float),
        np.arange(n, dtype=float),
        metric,
        Iinv @ b,
        rng.uniform(-1, 1, size=(n, n)),
        rng.normal(size=(n, n, 2)),
        np.zeros((n, n, 2, 2, 2)),
    )


@given(st.integers(0, 2**32 - 1), st.floats(0.6, 3.0))
@settings(max_examples=30, deadline=None)
def test_sister_map_algebra(seed, H):
    d = random_data(np.random.default_rng(seed))
    d.params = BergerParams.from_mean_curvature(H)
    I = d.metric_matrix()
    J = rotation_matrix(d)
    # J is a metric-preserving quarter turn
    assert np.allclose(J @ J, -np.eye(2), atol=1e-9)
    assert np.allclose(np.swapaxes(J, -1, -2) @ I @ J, I, atol=1e-8)
    sd = sister_data(H, d)
    assert np.allclose(0.5 * np.trace(sd.shape, axis1=-2, axis2=-1), H, atol=1e-9)
    b = I @ sd.shape
    assert np.allclose(b, np.swapaxes(b, -1, -2), atol=1e-8)  # self-adjoint
    assert np.array_equal(sd.nu, d.nu)
    assert np.allclose(sd.tangent_norm2(), d.tangent_norm2(), atol=1e-9)
    # shape operator fixes its traceless part up to the quarter turn
    assert np.allclose(J @ (sd.shape - H * np.eye(2)), -d.shape, atol=1e-8)


def test_sister_map_rejects_wrong_ambient():
    _, _, _, d = fc_patch(1.0, n=9)
    with pytest.raises(GeometryError):
        sister_data(2.0, d)
    with pytest.raises(GeometryError):
        sister_data(1.0, d, rotation_sign=0)


# --------------------------------------------------------- reconstruction


@pytest.mark.parametrize("c", [1.0, 0.5, 0.0])
def test_axis_maps_to_a_horizontal_circle_of_known_curvature(c):
    spec, xs, ys, d = fc_patch(c, n=33)
    i = len(xs) // 2
    s = reconstruct_sister(sister_data(1.0, d), (i, 0))
    axis = s.points[i]
    k = geodesic_curvature_h2(axis[:, :3], ys[1] - ys[0])
    assert np.max(np.abs(k[2:-2] - neck_curvature(1.0, c))) < 1e-3
    assert np.ptp(axis[:, 3]) < 1e-9
    assert s.gram_error() < 1e-8
    assert s.vertical_defect() < 1e-5


def test_neck_closes_with_the_circle_length():
    k = float(neck_curvature(1.0, 0.0))
    length = 2 * np.pi * np.sinh(np.arctanh(1.0 / k))
    spec, xs, ys, d = fc_patch(0.0, n=17, y_max=length * 1.2, ny=257)
    i = len(xs) // 2
    s = reconstruct_sister(sister_data(1.0, d), (i, 0))
    assert return_length(s.points[i], ys[1] - ys[0]) == pytest.approx(length, abs=1e-3)


def test_path_residual_is_fourth_order():
    res = []
    for n in (9, 17, 33):
        _, _, _, d = fc_patch(0.0, n=n, y_max=3.0)
        res.append(reconstruct_sister(sister_data(1.0, d), (n // 2, 0)).path_residual)
    ratios = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(ratios > 3.5)


def test_other_rotation_sign_breaks_the_vertical_field():
    _, xs, _, d = fc_patch(0.5)
    i = len(xs) // 2
    good = reconstruct_sister(sister_data(1.0, d, DEFAULT_ROTATION_SIGN), (i, 0))
    bad = reconstruct_sister(sister_data(1.0, d, -DEFAULT_ROTATION_SIGN), (i, 0))
    assert good.vertical_defect() < 1e-5
    assert bad.vertical_defect() > 0.1
    # both are mirror images as far as curvature goes
    assert bad.path_residual == pytest.approx(good.path_residual, rel=1e-3, abs=1e-12)


def test_large_path_residual_is_flagged(caplog):
    _, xs, _, d = fc_patch(0.0, n=5, half_width=0.8, y_max=3.0)
    s = reconstruct_sister(sister_data(1.0, d), (2, 0), threshold=1e-12)
    assert s.flagged
    assert "path residual" in caplog.text


@pytest.mark.parametrize("c", [1.0, 0.5, 0.0])
def test_boundary_geodesics_become_mirror_curves(c):
    _, xs, _, d = fc_patch(c, n=33)
    s = reconstruct_sister(sister_data(1.0, d), (len(xs) // 2, 0))
    for row in (0, -1):
        rep = mirror_curve_report(s, row)
        assert rep.plane_deviation < 1e-4
        assert rep.conormal_defect < 1e-4


def full_period(c, n=32, extra=0):
    spec = FcSpec(1.0, c)
    L = 4 * np.pi / np.sqrt(spec.kappa)
    xs = np.arange(n + extra) * L / n
    ys = np.linspace(0.0, half_period(1.0, c), n // 2 + 1)
    f = lambda x, y: fc_point(spec, x, y)
    if extra:
        return xs, sister_pipeline(spec.params, f, xs, ys, 1.0, seed_node=(n // 4, 0))
    return xs, sister_pipeline(spec.params, f, xs, ys, 1.0, periodic_x=True, seed_node=(n // 4, 0))


def test_periodicity_transfers_to_the_sister():
    n, extra = 64, 17
    _, s = full_period(0.5, n, extra)
    fit = fit_period(s, (0, n))
    for k in range(extra):
        moved = fit.isometry(s.points[k])
        assert np.max(product_distance(moved, s.points[n + k])) < 1e-4


@pytest.mark.parametrize("c", [1.0, 0.5])
def test_full_period_of_fc_has_a_vertical_axis(c):
    _, s = full_period(c)
    diag = hypotheses_and_axis(s)
    assert diag.slope < 0.05
    assert diag.axis == "vertical"
    assert not diag.h2_holds
    assert diag.branch == "vertical unduloid branch"
    assert diag.h1.holds and diag.h1.case == "A"
    assert diag.intersections.none


def test_slope_is_invariant_under_isometries():
    _, s = full_period(0.5)
    base = fit_period(s)
    for iso in (boost(), boost(-1.1, -2.0, -1)):
        fit = fit_period(s.mapped(iso))
        assert fit.slope == pytest.approx(base.slope, abs=1e-9)
        assert fit.distance == pytest.approx(base.distance, abs=1e-9)
        assert abs(fit.shift) == pytest.approx(abs(base.shift), abs=1e-9)


# --------------------------------------------------------------- hypotheses


def test_classify_slope_bands():
    assert classify_slope(0.0) == "vertical"
    assert classify_slope(0.049) == "vertical"
    assert classify_slope(np.pi / 2) == "horizontal"
    assert classify_slope(np.pi / 2 - 0.049) == "horizontal"
    assert classify_slope(0.8) == "tilted"


def plane_loop(normal, centre_s, r, h=0.0, n=50):
    """Closed loop in a vertical plane through the origin: a circle in (arclength, height)."""
    t = 2 * np.pi * np.arange(n + 1) / n
    normal = VerticalPlane(normal).normal
    u = np.cross([1.0, 0.0, 0.0], normal)  # unit direction of the plane at the origin
    s = centre_s + r * np.cos(t)
    x = np.cosh(s)[:, None] * lift(0.0, 0.0) + np.sinh(s)[:, None] * u
    return np.concatenate([x, (h + r * np.sin(t))[:, None]], axis=1)


def test_h1_case_b_with_coincident_planes_fails():
    c1 = plane_loop([0.0, 1.0, 0.0], 0.0, 0.5)
    c2 = plane_loop([0.0, 1.0, 0.0], 1.0, 0.3, h=3.0)
    st_ = h1_status(c1, c2)
    assert st_.case == "B"
    assert st_.closed == (True, True)
    assert st_.planes_disjoint is False
    assert not st_.holds


def test_h1_case_b_with_crossing_planes_fails_and_disjoint_planes_hold():
    c1 = plane_loop([0.0, 1.0, 0.0], 0.0, 0.5)
    c2 = plane_loop([0.0, 0.0, 1.0], 0.0, 0.5)
    assert not h1_status(c1, c2).holds
    # a boost across the plane of c1 gives an ultraparallel plane
    far = H2RIsometry(boost_matrix(lift(0.0, 0.0), np.array([0.0, 1.0, 0.0]), 3.0))
    st_ = h1_status(c1, far(c1))
    assert st_.case == "B"
    assert st_.planes_disjoint and st_.holds


def test_h1_case_a_when_a_boundary_curve_is_open():
    c1 = plane_loop([0.0, 1.0, 0.0], 0.0, 0.5)
    c2 = c1.copy()
    c2[:, 3] += np.linspace(0.0, 1.0, len(c2))
    st_ = h1_status(c1, c2)
    assert st_.case == "A" and st_.holds
    assert st_.displaced[1] == pytest.approx(1.0, abs=1e-12)


# ------------------------------------------------------------- polygon disk


@pytest.fixture(scope="module")
def polygon_sister():
    P = BergerParams.from_mean_curvature(1.0)
    n = 17
    m, rep = minimize_area(P, ruled_disk(GeodesicPolygon(P, LAM), n, n), SolveConfig(tol=1e-6))
    assert rep.converged
    us = np.linspace(0.0, 1.0, n)
    quarter = reconstruct_sister(sister_data(1.0, surface_data(P, m.grid(), us, us)), (0, 0), threshold=1e-2)
    return quarter


def test_polygon_sister_sides_are_mirrors(polygon_sister):
    m = quarter_mirrors(polygon_sister)
    assert m.deviations["bottom"] < 1e-4
    assert max(m.deviations["left"], m.deviations["right"]) < 1e-3
    assert m.deviations["top"] < 5e-3


def test_polygon_sister_unfolds_to_a_horizontal_period(polygon_sister):
    full = unfold_quarter(polygon_sister)
    nq = polygon_sister.points.shape[0]
    assert full.points.shape[:2] == (4 * (nq - 1) + 1, 2 * polygon_sister.points.shape[1] - 1)
    # the quarter sits unchanged in the second quarter of the lattice
    assert np.array_equal(full.points[nq - 1 : 2 * nq - 1, : polygon_sister.points.shape[1]], polygon_sister.points)
    diag = hypotheses_and_axis(full)
    assert abs(diag.slope - np.pi / 2) < 0.05
    assert diag.axis == "horizontal"
    assert diag.h2_holds
    assert diag.h1.case == "A" and diag.h1.holds
    assert diag.intersections.none
    assert diag.mirrors[0].plane_deviation < 5e-3
