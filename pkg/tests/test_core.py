import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from berger.core import (
    V_MATRIX,
    BergerParams,
    GeometryError,
    IsometryRejected,
    as_point,
    check_isometry,
    christoffel_fd,
    fibre_rotation,
    frame_at,
    frame_vectors,
    from_complex,
    hopf_project,
    left_matrix,
    left_translation,
    metric_eval,
    normalize,
    quat_inv,
    quat_mul,
    to_complex,
    xi_field,
)

RNG = np.random.default_rng(20240611)
PARAMS = [BergerParams(3.0, 1.0), BergerParams(4.0, 1.0), BergerParams(1.0, -0.7), BergerParams(8.0, 2.5)]


def random_points(n, rng=RNG):
    return normalize(rng.normal(size=(n, 4)))


def random_tangents(p, rng=RNG):
    v = rng.normal(size=p.shape)
    return v - np.sum(v * p, axis=-1, keepdims=True) * p


unit_quat = st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(lambda v: np.linalg.norm(v) > 0.1).map(normalize)
param_st = st.builds(
    BergerParams,
    st.floats(0.2, 10.0),
    st.one_of(st.floats(-3.0, -0.1), st.floats(0.1, 3.0)),
)


def test_params_validation():
    with pytest.raises(GeometryError):
        BergerParams(0.0, 1.0)
    with pytest.raises(GeometryError):
        BergerParams(1.0, 0.0)
    P = BergerParams(3.0, 1.0)
    assert P.eta == 4.0 / 3.0
    assert BergerParams.from_mean_curvature(1.0) == P


def test_quaternion_relations():
    i, j, k = np.eye(4)[1:]
    assert np.allclose(quat_mul(i, j), k)
    assert np.allclose(quat_mul(quat_mul(i, j), k), [-1, 0, 0, 0])
    p = random_points(1)[0]
    assert np.allclose(quat_mul(np.array([1.0, 0, 0, 0]), p), p)


@given(unit_quat, unit_quat)
def test_quat_mul_matches_complex_pair_formula(p, q):
    z1, w1 = to_complex(p)
    z2, w2 = to_complex(q)
    expected = from_complex(z1 * z2 - w1 * np.conj(w2), z1 * w2 + w1 * np.conj(z2))
    assert np.allclose(quat_mul(p, q), expected, atol=1e-12)


@given(unit_quat)
def test_inverse_is_conjugate_pair(p):
    z, w = to_complex(p)
    inv = from_complex(np.conj(z), -w)
    assert np.allclose(quat_inv(p), inv)
    assert np.allclose(quat_mul(p, inv), [1, 0, 0, 0], atol=1e-12)


def test_as_point_rejects_off_sphere():
    with pytest.raises(GeometryError):
        as_point([1.0, 1.0, 0.0, 0.0])


def test_round_metric_is_scaled_euclidean():
    P = BergerParams(4.0 * 0.8**2, 0.8)
    p = random_points(50)
    x, y = random_tangents(p), random_tangents(p)
    assert np.allclose(metric_eval(P, x, y, base=p), 4.0 / P.kappa * np.sum(x * y, axis=-1), atol=1e-13)


def test_metric_on_vertical_direction():
    P = BergerParams(3.0, 1.0)
    p = random_points(1)[0]
    v = V_MATRIX @ p
    assert metric_eval(P, (p, v), (p, v)) == pytest.approx(16.0 / 9.0, abs=1e-14)


def test_metric_rejects_mismatched_bases():
    P = BergerParams(3.0, 1.0)
    p, q = random_points(2)
    with pytest.raises(GeometryError):
        metric_eval(P, (p, random_tangents(p)), (q, random_tangents(q)))


@pytest.mark.parametrize("P", PARAMS)
def test_xi_has_unit_length(P):
    p = random_points(200)
    xi = xi_field(P, p)
    assert np.allclose(metric_eval(P, xi, xi, base=p), 1.0, atol=1e-13)


@pytest.mark.parametrize("P", PARAMS)
def test_frame_gram_is_identity(P):
    p = random_points(500)
    E = frame_vectors(P, p)
    gram = metric_eval(P, E[:, :, None, :], E[:, None, :, :], base=p[:, None, None, :])
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12


def test_frame_at_identity():
    P = BergerParams(3.0, 1.0)
    F = frame_at(P, [1.0, 0, 0, 0])
    assert np.allclose(F.e1, [0, 0, np.sqrt(3) / 2, 0])
    assert np.allclose(F.xi, [0, 3.0 / 4.0, 0, 0])
    z, w = 0.6 + 0.0j, 0.8j
    F = frame_at(P, from_complex(z, w))
    rk = np.sqrt(3) / 2
    assert np.allclose(F.e1, from_complex(-rk * w, rk * z))
    assert np.allclose(F.e2, from_complex(rk * 1j * w, rk * 1j * z))
    assert np.allclose(F.xi, from_complex(0.75 * 1j * z, -0.75 * 1j * w))


@given(param_st, st.lists(st.floats(-2, 2), min_size=12, max_size=12), st.floats(-3, 3))
@settings(max_examples=60)
def test_metric_symmetric_bilinear(P, raw, a):
    raw = np.asarray(raw).reshape(3, 4)
    if np.linalg.norm(raw[0]) < 1e-3:
        return
    p = normalize(raw[0])
    x = raw[1] - (raw[1] @ p) * p
    y = raw[2] - (raw[2] @ p) * p
    z = np.roll(x, 1)
    z = z - (z @ p) * p
    assert metric_eval(P, x, y, base=p) == pytest.approx(metric_eval(P, y, x, base=p), abs=1e-12)
    lhs = metric_eval(P, a * x + z, y, base=p)
    rhs = a * metric_eval(P, x, y, base=p) + metric_eval(P, z, y, base=p)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1 + abs(lhs)))


def test_hopf_image_radius_and_base_point():
    P = BergerParams(3.0, 1.0)
    assert np.allclose(hopf_project(P, [1.0, 0, 0, 0]), [0, 0, 1 / np.sqrt(3)])
    p = random_points(10_000)
    assert np.allclose(np.linalg.norm(hopf_project(P, p), axis=-1), 1 / np.sqrt(3), atol=1e-14)


@pytest.mark.parametrize("P", PARAMS)
def test_hopf_is_riemannian_submersion(P):
    h = 1e-6
    for p in random_points(30):
        E = frame_vectors(P, p)
        d = [(hopf_project(P, normalize(p + h * e)) - hopf_project(P, normalize(p - h * e))) / (2 * h) for e in E]
        assert abs(d[0] @ d[0] - 1) < 1e-6
        assert abs(d[1] @ d[1] - 1) < 1e-6
        assert abs(d[0] @ d[1]) < 1e-6
        assert np.linalg.norm(d[2]) < 1e-6


def test_check_isometry_examples():
    P = BergerParams(3.0, 1.0)
    p = random_points(1)[0]
    assert left_translation(P, p).vcommute == 1
    assert check_isometry(P, np.diag([1.0, 1.0, -1.0, -1.0])).vcommute == 1
    c, s = np.cos(np.pi / 7), np.sin(np.pi / 7)
    R = np.eye(4)
    R[0, 0], R[0, 2], R[2, 0], R[2, 2] = c, -s, s, c
    with pytest.raises(IsometryRejected) as err:
        check_isometry(P, R)
    assert "round" in err.value.reason
    # accepted when the metric is round
    assert check_isometry(BergerParams(4.0, 1.0), R).matrix.shape == (4, 4)
    with pytest.raises(IsometryRejected, match="orthogonal"):
        check_isometry(P, 2 * np.eye(4))


@pytest.mark.parametrize("P", PARAMS)
def test_accepted_isometries_preserve_metric(P):
    isos = [left_translation(P, q) for q in random_points(5)]
    isos.append(check_isometry(P, np.diag([1.0, -1.0, -1.0, 1.0])))
    isos.append(fibre_rotation(P, 0.7))
    p = random_points(40)
    x, y = random_tangents(p), random_tangents(p)
    for A in isos:
        Ap, Ax, Ay = A(p), A(x), A(y)
        assert np.allclose(metric_eval(P, Ax, Ay, base=Ap), metric_eval(P, x, y, base=p), atol=1e-10)


def test_left_matrix_is_left_multiplication():
    p, q = random_points(2)
    assert np.allclose(left_matrix(p) @ q, quat_mul(p, q))


def test_fibre_rotation_turns_e1():
    P = BergerParams(3.0, 1.0)
    one = np.array([1.0, 0, 0, 0])
    R = fibre_rotation(P, 0.9)
    E = frame_vectors(P, one)
    assert np.allclose(R(one), one)
    assert np.allclose(R(E[0]), np.cos(0.9) * E[0] + np.sin(0.9) * E[1], atol=1e-14)


@pytest.mark.parametrize("P", PARAMS)
def test_christoffel_matches_connection_table(P):
    G = P.connection_table()
    rng = np.random.default_rng(7)
    worst = 0.0
    for p in random_points(100, rng):
        worst = max(worst, np.max(np.abs(christoffel_fd(P, p) - G)))
    assert worst < 1e-6


def test_christoffel_step_range():
    with pytest.raises(GeometryError):
        christoffel_fd(BergerParams(3.0, 1.0), [1.0, 0, 0, 0], step=1.0)
