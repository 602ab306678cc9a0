"""First-order data of minimal surfaces in S^3(4H^2-1, H), the sister map and
the reconstruction of the sister MC-H surface in H^2 x R.

Surfaces are sampled on a parameter lattice ``(x_i, y_j)``.  Tangent data are
stored in the coordinate frame ``(d/dx, d/dy)``:

* ``metric``     (nx, ny, 3)        E, F, G
* ``shape``      (nx, ny, 2, 2)     S with ``S d_i = shape[..., k, i] d_k``
* ``nu``         (nx, ny)           g(xi, N)
* ``tvec``       (nx, ny, 2)        coordinates of T = xi - nu N
* ``christoffel`` (nx, ny, 2, 2, 2) ``[k, i, j]`` = Gamma^k_ij

The sister is integrated from the Gauss-Weingarten equations of H^2 x R in
the hyperboloid model with a fourth-order Runge-Kutta scheme along lattice
lines, after which the frame is projected back onto the constraint set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.linalg import sqrtm

from .core import BergerParams, GeometryError, frame_coords
from .h2r import (
    LORENTZ,
    H2RIsometry,
    VerticalPlane,
    fit_vertical_plane,
    h2_distance,
    lorentz,
    lorentz_cross,
    product_distance,
    project_hyperboloid,
    unit_tangent,
)
from .mesh import grid_triangles
from .plateau import IntersectionReport, flat_self_intersections

log = logging.getLogger(__name__)

ORIGIN = np.array([1.0, 0.0, 0.0, 0.0])


# --------------------------------------------------------------------------
# finite differences


def _grid_diff(A: np.ndarray, h: float, axis: int, periodic: bool) -> np.ndarray:
    """Fourth-order first derivative along ``axis`` (one-sided stencils at open ends)."""
    A = np.moveaxis(np.asarray(A, dtype=float), axis, 0)
    n = len(A)
    if periodic:
        f = lambda k: np.roll(A, -k, axis=0)
        D = (f(-2) - 8 * f(-1) + 8 * f(1) - f(2)) / (12 * h)
        return np.moveaxis(D, 0, axis)
    if n < 5:
        raise GeometryError("need at least 5 samples along each open lattice direction")
    D = np.empty_like(A)
    D[2:-2] = (A[:-4] - 8 * A[1:-3] + 8 * A[3:-1] - A[4:]) / (12 * h)
    D[0] = (-25 * A[0] + 48 * A[1] - 36 * A[2] + 16 * A[3] - 3 * A[4]) / (12 * h)
    D[1] = (-3 * A[0] - 10 * A[1] + 18 * A[2] - 6 * A[3] + A[4]) / (12 * h)
    D[-1] = (25 * A[-1] - 48 * A[-2] + 36 * A[-3] - 16 * A[-4] + 3 * A[-5]) / (12 * h)
    D[-2] = (3 * A[-1] + 10 * A[-2] - 18 * A[-3] + 6 * A[-4] - A[-5]) / (12 * h)
    return np.moveaxis(D, 0, axis)


def _fn_diff(fun: Callable, x, y, h: float, axis: int) -> np.ndarray:
    """Fourth-order central difference of ``fun(x, y)`` with step ``h``."""
    if axis == 0:
        g = lambda s: fun(x + s, y)
    else:
        g = lambda s: fun(x, y + s)
    return (g(-2 * h) - 8 * g(-h) + 8 * g(h) - g(2 * h)) / (12 * h)


def _midpoints(A: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """Cubic interpolation to interval midpoints along ``axis``."""
    A = np.moveaxis(A, axis, 0)
    n = len(A)
    if periodic:
        f = lambda k: np.roll(A, -k, axis=0)
        M = (-f(-1) + 9 * A + 9 * f(1) - f(2)) / 16
        return np.moveaxis(M, 0, axis)
    if n < 4:
        raise GeometryError("need at least 4 samples for midpoint interpolation")
    M = np.empty((n - 1,) + A.shape[1:])
    M[1:-1] = (-A[:-3] + 9 * A[1:-2] + 9 * A[2:-1] - A[3:]) / 16
    M[0] = (5 * A[0] + 15 * A[1] - 5 * A[2] + A[3]) / 16
    M[-1] = (A[-4] - 5 * A[-3] + 15 * A[-2] + 5 * A[-1]) / 16
    return np.moveaxis(M, 0, axis)


# --------------------------------------------------------------------------
# extraction


@dataclass
class SurfaceData:
    params: BergerParams
    xs: np.ndarray
    ys: np.ndarray
    metric: np.ndarray
    shape: np.ndarray
    nu: np.ndarray
    tvec: np.ndarray
    christoffel: np.ndarray
    periodic_x: bool = False
    points: np.ndarray | None = None

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.metric.shape[:2]

    def metric_matrix(self) -> np.ndarray:
        E, F, G = np.moveaxis(self.metric, -1, 0)
        return np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)

    def tangent_norm2(self) -> np.ndarray:
        return np.einsum("...i,...ij,...j->...", self.tvec, self.metric_matrix(), self.tvec)

    def mean_curvature(self) -> np.ndarray:
        return 0.5 * np.trace(self.shape, axis1=-2, axis2=-1)

    def unwrapped(self) -> "SurfaceData":
        """Periodic lattice with its first column repeated at the end (one full period)."""
        if not self.periodic_x:
            return self
        period = (self.xs[1] - self.xs[0]) * len(self.xs)
        cat = lambda a: None if a is None else np.concatenate([a, a[:1]], axis=0)
        return replace(
            self,
            xs=np.append(self.xs, self.xs[0] + period),
            metric=cat(self.metric),
            shape=cat(self.shape),
            nu=cat(self.nu),
            tvec=cat(self.tvec),
            christoffel=cat(self.christoffel),
            points=cat(self.points),
            periodic_x=False,
        )


def _first_order(params: BergerParams, p, fx, fy) -> np.ndarray:
    """Per-node E, F, G, unit normal and both tangents in frame coordinates (12 numbers)."""
    ax = frame_coords(params, p, fx)
    ay = frame_coords(params, p, fy)
    E = np.einsum("...i,...i->...", ax, ax)
    F = np.einsum("...i,...i->...", ax, ay)
    G = np.einsum("...i,...i->...", ay, ay)
    n = np.cross(ax, ay)
    nn = np.linalg.norm(n, axis=-1, keepdims=True)
    n = n / np.where(nn > 0, nn, 1.0)
    return np.concatenate([E[..., None], F[..., None], G[..., None], n, ax, ay], axis=-1)


def _assemble(params, xs, ys, q, dqx, dqy, periodic_x, points, min_det) -> SurfaceData:
    E, F, G = q[..., 0], q[..., 1], q[..., 2]
    D = E * G - F * F
    bad = D <= min_det * np.maximum(E * G, 1e-300)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        raise GeometryError(f"degenerate metric at node ({i}, {j}), x={xs[i]:.6g}, y={ys[j]:.6g}")
    n = q[..., 3:6]
    a = np.stack([q[..., 6:9], q[..., 9:12]], axis=-2)  # (..., 2, 3) tangents
    dn = np.stack([dqx[..., 3:6], dqy[..., 3:6]], axis=-2)
    conn = params.connection_table()
    # nabla_{d_i} N in frame coordinates
    nabla_n = dn + np.einsum("...ic,...b,cba->...ia", a, n, conn)
    b = -np.einsum("...ia,...ja->...ij", nabla_n, a)
    b = 0.5 * (b + np.swapaxes(b, -1, -2))
    I = np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)
    Iinv = np.linalg.inv(I)
    shape = Iinv @ b
    nu = n[..., 2]
    tvec = np.einsum("...kl,...l->...k", Iinv, a[..., :, 2])
    # Christoffel symbols from metric derivatives
    dg = np.stack([dqx[..., :3], dqy[..., :3]], axis=-2)  # (..., m, [E,F,G])
    dgm = np.stack(
        [np.stack([dg[..., 0], dg[..., 1]], -1), np.stack([dg[..., 1], dg[..., 2]], -1)], -2
    )  # (..., m, 2, 2) = d_m g_ij
    first = 0.5 * (
        np.einsum("...ijl->...lij", dgm)  # d_i g_jl
        + np.einsum("...jil->...lij", dgm)  # d_j g_il
        - dgm  # d_l g_ij, indexed [l, i, j]
    )
    chris = np.einsum("...kl,...lij->...kij", Iinv, first)
    return SurfaceData(params, xs, ys, q[..., :3].copy(), shape, nu, tvec, chris, periodic_x, points)


def surface_data(
    params: BergerParams,
    surface,
    xs,
    ys,
    *,
    periodic_x: bool = False,
    step: float = 1e-3,
    min_det: float = 1e-10,
) -> SurfaceData:
    """First-order data of a surface in S^3(kappa, tau) on the lattice ``xs x ys``.

    ``surface`` is either a callable ``(x, y) -> (..., 4)`` (derivatives by
    central differences with spacing ``step``) or an array ``(nx, ny, 4)`` of
    lattice samples (derivatives by fourth-order lattice stencils, periodic in
    x when ``periodic_x``).  Lattices must be uniform.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    if callable(surface):

        def q(x, y):
            p = surface(x, y)
            fx = _fn_diff(surface, x, y, step, 0)
            fy = _fn_diff(surface, x, y, step, 1)
            return _first_order(params, p, fx, fy)

        points = surface(X, Y)
        q0 = q(X, Y)
        dqx = _fn_diff(q, X, Y, step, 0)
        dqy = _fn_diff(q, X, Y, step, 1)
    else:
        points = np.asarray(surface, dtype=float)
        if points.shape != (len(xs), len(ys), 4):
            raise GeometryError(f"lattice has shape {points.shape}, expected {(len(xs), len(ys), 4)}")
        dx, dy = xs[1] - xs[0], ys[1] - ys[0]
        if periodic_x:
            # the period closes the lattice, so nodes are one spacing apart across the seam
            pass
        fx = _grid_diff(points, dx, 0, periodic_x)
        fy = _grid_diff(points, dy, 1, False)
        q0 = _first_order(params, points, fx, fy)
        dqx = _grid_diff(q0, dx, 0, periodic_x)
        dqy = _grid_diff(q0, dy, 1, False)
    return _assemble(params, xs, ys, q0, dqx, dqy, periodic_x, points, min_det)


# --------------------------------------------------------------------------
# sister data


def rotation_matrix(data: SurfaceData) -> np.ndarray:
    """The quarter turn J of each tangent plane in coordinates (J d_x has positive d_y part)."""
    E, F, G = np.moveaxis(data.metric, -1, 0)
    r = np.sqrt(E * G - F * F)
    return np.stack([np.stack([-F, -G], -1), np.stack([E, F], -1)], -2) / r[..., None, None]


@dataclass
class SisterData(SurfaceData):
    H: float = 1.0
    rotation_sign: int = 1


# Calibrated on the rotational sister of f^c.  Both signs give the same
# path residual and |k| on the axis (the two results are mirror images),
# but only s = -1 keeps xi~ = T~ + nu N~ along the whole reconstruction.
DEFAULT_ROTATION_SIGN = -1


def sister_data(H: float, data: SurfaceData, rotation_sign: int = DEFAULT_ROTATION_SIGN, rtol: float = 1e-12) -> SisterData:
    """Shape operator J S + H id, same metric and nu, tangent part t~ with t = s J t~."""
    P = data.params
    if abs(P.kappa - (4 * H * H - 1)) > rtol * max(1.0, P.kappa) or abs(P.tau - H) > rtol * max(1.0, abs(H)):
        raise GeometryError(
            f"data live in S^3({P.kappa}, {P.tau}), sister map needs S^3({4 * H * H - 1}, {H})"
        )
    if rotation_sign not in (1, -1):
        raise GeometryError("rotation_sign must be +1 or -1")
    J = rotation_matrix(data)
    shape = J @ data.shape + H * np.eye(2)
    tvec = -rotation_sign * np.einsum("...ij,...j->...i", J, data.tvec)
    return SisterData(
        data.params,
        data.xs,
        data.ys,
        data.metric,
        shape,
        data.nu.copy(),
        tvec,
        data.christoffel,
        data.periodic_x,
        data.points,
        H=H,
        rotation_sign=rotation_sign,
    )


# --------------------------------------------------------------------------
# reconstruction

# state layout: X (3), h (1), F_x (4), F_y (4), N (4)
_X, _H, _FX, _FY, _N = slice(0, 3), 3, slice(4, 8), slice(8, 12), slice(12, 16)


def _coefficients(sd: SisterData) -> np.ndarray:
    """Per-node coefficients used by the structure equations: metric (3), S~ (4), Gamma (8)."""
    nx, ny = sd.grid_shape
    return np.concatenate(
        [sd.metric, sd.shape.reshape(nx, ny, 4), sd.christoffel.reshape(nx, ny, 8)], axis=-1
    )


def _rhs(state: np.ndarray, coef: np.ndarray, direction: int) -> np.ndarray:
    """Derivative of the frame state along d_direction (batched over leading axes)."""
    X = state[..., _X]
    Fs = np.stack([state[..., _FX], state[..., _FY]], axis=-2)  # (..., 2, 4)
    N = state[..., _N]
    E, F, G = coef[..., 0], coef[..., 1], coef[..., 2]
    S = coef[..., 3:7].reshape(coef.shape[:-1] + (2, 2))
    Gam = coef[..., 7:15].reshape(coef.shape[:-1] + (2, 2, 2))
    I = np.stack([np.stack([E, F], -1), np.stack([F, G], -1)], -2)
    i = direction
    Fi = Fs[..., i, :]
    Xpad = np.concatenate([X, np.zeros_like(X[..., :1])], axis=-1)
    # second fundamental form b~_ij = g(S~ d_i, d_j)
    b = np.einsum("...ki,...kj->...ij", S, I)
    out = np.empty_like(state)
    out[..., _X] = Fi[..., :3]
    out[..., _H] = Fi[..., 3]
    for j, sl in ((0, _FX), (1, _FY)):
        hor = lorentz(Fi[..., :3], Fs[..., j, :3])
        out[..., sl] = (
            np.einsum("...k,...kc->...c", Gam[..., :, i, j], Fs)
            + b[..., i, j, None] * N
            + hor[..., None] * Xpad
        )
    out[..., _N] = -np.einsum("...k,...kc->...c", S[..., :, i], Fs) + lorentz(Fi[..., :3], N[..., :3])[..., None] * Xpad
    return out


def _project(state: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Put X back on the hyperboloid, the frame into its tangent space, and restore the Gram matrix."""
    s = state.copy()
    X = project_hyperboloid(s[..., _X])
    s[..., _X] = X
    M = np.stack([s[..., _FX], s[..., _FY], s[..., _N]], axis=-1)  # (..., 4, 3)
    hor = M[..., :3, :]
    hor = hor + lorentz(np.swapaxes(hor, -1, -2), X[..., None, :])[..., None, :] * X[..., :, None]
    M[..., :3, :] = hor
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    Gram = np.einsum("...ai,ab,...bj->...ij", M, eta, M)
    E, F, G = coef[..., 0], coef[..., 1], coef[..., 2]
    G0 = np.zeros(Gram.shape)
    G0[..., 0, 0], G0[..., 0, 1], G0[..., 1, 0], G0[..., 1, 1], G0[..., 2, 2] = E, F, F, G, 1.0
    M = M @ _gram_correction(Gram, G0)
    s[..., _FX], s[..., _FY], s[..., _N] = M[..., 0], M[..., 1], M[..., 2]
    return s


def _sym_pow(A: np.ndarray, p: float) -> np.ndarray:
    w, V = np.linalg.eigh(A)
    return (V * w[..., None, :] ** p) @ np.swapaxes(V, -1, -2)


def _gram_correction(Gram: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Symmetric C with C Gram C = target, close to the identity when Gram is close to target."""
    Gh = _sym_pow(Gram, 0.5)
    Gmh = _sym_pow(Gram, -0.5)
    return Gmh @ _sym_pow(Gh @ target @ Gh, 0.5) @ Gmh


def _rk4_line(state0: np.ndarray, coef: np.ndarray, mids: np.ndarray, h: float, direction: int) -> np.ndarray:
    """Integrate along ``direction`` over all nodes of ``coef`` (axis 0 is the line).

    ``state0`` is the state at node 0; ``mids[m]`` holds coefficients at the
    midpoint of nodes m and m + 1.  Negative ``h`` integrates backwards
    (then ``coef`` and ``mids`` must be given in the traversal order).
    """
    n = len(coef)
    out = np.empty((n,) + state0.shape)
    s = state0
    out[0] = s
    for m in range(n - 1):
        c0, cm, c1 = coef[m], mids[m], coef[m + 1]
        k1 = _rhs(s, c0, direction)
        k2 = _rhs(s + 0.5 * h * k1, cm, direction)
        k3 = _rhs(s + 0.5 * h * k2, cm, direction)
        k4 = _rhs(s + h * k3, c1, direction)
        s = _project(s + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4), c1)
        out[m + 1] = s
    return out


def _integrate_from(state: np.ndarray, coef: np.ndarray, mids: np.ndarray, start: int, h: float, direction: int) -> np.ndarray:
    """States at every node of a line (axis 0) given the state at node ``start``."""
    n = len(coef)
    fwd = _rk4_line(state, coef[start:], mids[start:], h, direction)
    out = np.empty((n,) + state.shape)
    out[start:] = fwd
    if start > 0:
        bwd = _rk4_line(state, coef[start::-1], mids[start - 1 :: -1] if start > 0 else mids[:0], -h, direction)
        out[: start + 1] = bwd[::-1]
    return out


def seed_frame(
    sd: SisterData,
    node: tuple[int, int],
    point=ORIGIN,
    angle: float = 0.0,
) -> np.ndarray:
    """Initial state at ``node``: position ``point``, frame fixed by the data up to a turn ``angle`` about the vertical."""
    i, j = node
    point = np.asarray(point, dtype=float)
    X0 = point[:3]
    e_a = unit_tangent(X0, np.array([0.0, 1.0, 0.0]) if abs(X0[2]) < 0.9 * X0[0] else np.array([0.0, 0.0, 1.0]))
    e_b = lorentz_cross(X0, e_a)
    e_b = e_b / np.sqrt(lorentz(e_b, e_b))
    basis = np.zeros((3, 4))
    basis[0, :3], basis[1, :3], basis[2, 3] = e_a, e_b, 1.0
    E, F, G = sd.metric[i, j]
    r = np.sqrt(E * G - F * F)
    I = np.array([[E, F], [F, G]])
    u1 = np.array([1.0, 0.0]) / np.sqrt(E)
    u2 = np.array([-F, E]) / (r * np.sqrt(E))
    Tt = I @ sd.tvec[i, j]
    w = np.array([Tt @ u1, Tt @ u2, sd.nu[i, j]])
    w = w / np.linalg.norm(w)
    Q = _rotation_to_e3(w)
    c, s = np.cos(angle), np.sin(angle)
    Q = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]) @ Q
    U = Q.T @ basis  # rows: U1, U2, U3 in ambient coordinates
    state = np.zeros(16)
    state[_X] = X0
    state[_H] = point[3]
    state[_FX] = np.sqrt(E) * U[0]
    state[_FY] = (F / np.sqrt(E)) * U[0] + (r / np.sqrt(E)) * U[1]
    state[_N] = U[2]
    return state


def _rotation_to_e3(w: np.ndarray) -> np.ndarray:
    """Proper rotation taking the unit vector ``w`` to (0, 0, 1)."""
    e3 = np.array([0.0, 0.0, 1.0])
    v = np.cross(w, e3)
    c = float(w @ e3)
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    K = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + K + K @ K / (1.0 + c)


@dataclass
class SisterSurface:
    """Sister samples on a lattice: positions, images of d_x and d_y, normals.

    ``data`` is the sister data the samples were integrated from; lattices
    assembled by reflection carry ``None`` there.
    """

    xs: np.ndarray
    ys: np.ndarray
    points: np.ndarray  # (nx, ny, 4)
    frames: np.ndarray  # (nx, ny, 2, 4)
    normals: np.ndarray  # (nx, ny, 4)
    path_residual: float
    seed_node: tuple[int, int] = (0, 0)
    flagged: bool = False
    threshold: float = 1e-3
    data: SisterData | None = None

    def gram_error(self) -> float:
        """Largest deviation of the frame Gram matrices from the data metric."""
        eta = np.diag([-1.0, 1.0, 1.0, 1.0])
        Gr = np.einsum("...ia,ab,...jb->...ij", self.frames, eta, self.frames)
        return float(np.max(np.abs(Gr - self.data.metric_matrix())))

    def vertical_defect(self) -> float:
        """Largest deviation of the vertical field from T~ + nu N~ built from the frame."""
        xi = np.einsum("...k,...kc->...c", self.data.tvec, self.frames) + self.data.nu[..., None] * self.normals
        return float(np.max(np.abs(xi - np.array([0.0, 0.0, 0.0, 1.0]))))

    def mapped(self, iso: H2RIsometry) -> "SisterSurface":
        return replace(
            self,
            points=iso(self.points),
            frames=iso.push(self.frames),
            normals=iso.push(self.normals),
        )

    def reversed_copy(self, iso: H2RIsometry, axis: int) -> "SisterSurface":
        """Image under ``iso`` with lattice ``axis`` traversed backwards (d_axis flips sign)."""
        flip = [slice(None), slice(None)]
        flip[axis] = slice(None, None, -1)
        flip = tuple(flip)
        frames = iso.push(self.frames[flip]).copy()
        frames[..., axis, :] *= -1.0
        return replace(
            self,
            points=iso(self.points[flip]),
            frames=frames,
            normals=iso.push(self.normals[flip]),
            data=None,
        )


def _join(a: SisterSurface, b: SisterSurface, axis: int, xs, ys, keep_first: bool = True) -> SisterSurface:
    """Concatenate two lattices sharing the last line of ``a`` and the first of ``b``.

    The shared line is taken from ``a`` when ``keep_first`` is set, else from ``b``.
    """
    drop = [slice(None), slice(None)]
    drop[axis] = slice(1, None) if keep_first else slice(None, -1)
    drop = tuple(drop)
    if keep_first:
        cat = lambda u, v: np.concatenate([u, v[drop]], axis=axis)
    else:
        cat = lambda u, v: np.concatenate([u[drop], v], axis=axis)
    return SisterSurface(
        np.asarray(xs), np.asarray(ys),
        cat(a.points, b.points), cat(a.frames, b.frames), cat(a.normals, b.normals),
        max(a.path_residual, b.path_residual), a.seed_node, a.flagged or b.flagged, a.threshold, None,
    )


@dataclass
class QuarterMirrors:
    """Mirror planes of the sister of a polygon disk and how well its sides fit them."""

    bottom: VerticalPlane
    left: VerticalPlane
    right: VerticalPlane
    top_height: float
    deviations: dict[str, float]


def quarter_mirrors(quarter: SisterSurface) -> QuarterMirrors:
    """Vertical planes of the bottom, left and right sides and the height of the top side."""
    P = quarter.points
    bottom, db = fit_vertical_plane(P[:, 0])
    left, dl = fit_vertical_plane(P[0])
    right, dr = fit_vertical_plane(P[-1])
    top = float(np.mean(P[:, -1, 3]))
    dt = float(np.max(np.abs(P[:, -1, 3] - top)))
    return QuarterMirrors(bottom, left, right, top, {"bottom": db, "left": dl, "right": dr, "top": dt})


def unfold_quarter(quarter: SisterSurface, mirrors: QuarterMirrors | None = None) -> SisterSurface:
    """Sister of the annulus unfolded from a polygon disk, over one turn of the boundary.

    Mirrors the lattice order used on the minimal side: the horizontal plane
    of the top side doubles the rows, the vertical planes of the left and
    right sides unfold four quarters along x.
    """
    m = mirrors or quarter_mirrors(quarter)
    sig_top = H2RIsometry(np.eye(3), 2.0 * m.top_height, -1)
    sig_left = m.left.reflection()
    sig_right = m.right.reflection()
    nu, nv = quarter.points.shape[:2]
    du = quarter.xs[1] - quarter.xs[0]
    dv = quarter.ys[1] - quarter.ys[0]
    ys = quarter.ys[0] + dv * np.arange(2 * nv - 1)
    strip = _join(quarter, quarter.reversed_copy(sig_top, 1), 1, quarter.xs, ys)
    xs_half = quarter.xs[0] + du * np.arange(-(nu - 1), nu)
    half = _join(strip.reversed_copy(sig_left, 0), strip, 0, xs_half, ys, keep_first=False)
    xs_full = quarter.xs[0] + du * np.arange(-(nu - 1), 3 * (nu - 1) + 1)
    return _join(half, half.reversed_copy(sig_right, 0), 0, xs_full, ys)


def default_seed_node(data: SurfaceData, axis_x: float | None = None) -> tuple[int, int]:
    """Node nearest ``axis_x`` on the middle row when an axis is given, else the lattice corner."""
    if axis_x is None:
        return (0, 0)
    i = int(np.argmin(np.abs(data.xs - axis_x)))
    return (i, len(data.ys) // 2)


def reconstruct_sister(
    sd: SisterData,
    seed_node: tuple[int, int] | None = None,
    seed_point=ORIGIN,
    seed_angle: float = 0.0,
    threshold: float = 1e-3,
) -> SisterSurface:
    """Integrate the sister immersion over the lattice of ``sd``.

    Samples come from the x-first scheme (spine along the seed row, then
    every column); the y-first scheme is run as well and the largest
    product-metric distance between the two is the path residual.
    Periodic data are unwrapped to one full period first.
    """
    sd = sd.unwrapped() if sd.periodic_x else sd
    nx, ny = sd.grid_shape
    if nx < 4 or ny < 4:
        raise GeometryError("need at least 4 x 4 lattice nodes")
    dx, dy = sd.xs[1] - sd.xs[0], sd.ys[1] - sd.ys[0]
    i0, j0 = seed_node if seed_node is not None else (0, 0)
    coef = _coefficients(sd)
    mid_x = _midpoints(coef, 0, False)  # (nx - 1, ny, 15)
    mid_y = _midpoints(coef, 1, False)  # (nx, ny - 1, 15)
    s0 = _project(seed_frame(sd, (i0, j0), seed_point, seed_angle), coef[i0, j0])

    # x first: spine along row j0, then all columns
    spine = _integrate_from(s0, coef[:, j0], mid_x[:, j0], i0, dx, 0)  # (nx, 16)
    cols = _integrate_from(spine, np.swapaxes(coef, 0, 1), np.swapaxes(mid_y, 0, 1), j0, dy, 1)
    A = np.swapaxes(cols, 0, 1)  # (nx, ny, 16)
    # y first
    spine = _integrate_from(s0, coef[i0], mid_y[i0], j0, dy, 1)  # (ny, 16)
    B = _integrate_from(spine, coef, mid_x, i0, dx, 0)  # (nx, ny, 16)

    res = float(np.max(product_distance(A[..., :4], B[..., :4])))
    flagged = res > threshold
    if flagged:
        log.warning("sister reconstruction: path residual %.3e exceeds %.1e", res, threshold)
    frames = np.stack([A[..., _FX], A[..., _FY]], axis=-2)
    return SisterSurface(sd.xs, sd.ys, A[..., :4].copy(), frames, A[..., _N].copy(), res, (i0, j0), flagged, threshold, sd)


def sister_pipeline(
    params: BergerParams,
    surface,
    xs,
    ys,
    H: float,
    *,
    periodic_x: bool = False,
    seed_node: tuple[int, int] | None = None,
    rotation_sign: int = DEFAULT_ROTATION_SIGN,
    threshold: float = 1e-3,
) -> SisterSurface:
    """Extract, map and reconstruct in one call."""
    data = surface_data(params, surface, xs, ys, periodic_x=periodic_x)
    sd = sister_data(H, data, rotation_sign)
    return reconstruct_sister(sd, seed_node, threshold=threshold)


# --------------------------------------------------------------------------
# curve diagnostics


@dataclass
class MirrorReport:
    plane: VerticalPlane
    plane_deviation: float
    conormal_defect: float  # 1 - |<conormal, plane normal>|, maximised over the curve


def mirror_curve_report(sister: SisterSurface, row: int, point_tol: float = 1e-8) -> MirrorReport:
    """Test whether the image of lattice row ``row`` is a vertical mirror curve.

    A row whose H^2 part collapses to a point (a vertical fibre) lies in
    every vertical plane through that point; the plane is then the one
    normal to the mean conormal.
    """
    pts = sister.points[:, row]
    Fx = sister.frames[:, row, 0]
    Fy = sister.frames[:, row, 1]
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    ip = lambda a, b: np.einsum("...i,ij,...j->...", a, eta, b)
    con = Fy - (ip(Fy, Fx) / ip(Fx, Fx))[:, None] * Fx
    con = con / np.sqrt(ip(con, con))[:, None]
    if np.max(h2_distance(pts[:, :3], pts[:1, :3])) < point_tol:
        p = pts[0, :3]
        horiz = con[:, :3] + lorentz(con[:, :3], p)[:, None] * p
        plane = VerticalPlane(np.mean(horiz, axis=0))
        dev = float(np.max(plane.deviation(pts)))
    else:
        plane, dev = fit_vertical_plane(pts)
    align = np.abs(lorentz(con[:, :3], plane.normal))
    return MirrorReport(plane, dev, float(np.max(1.0 - align)))


def return_length(points, dt: float, skip: float = 0.25) -> float:
    """First return parameter of a sampled closed curve to its starting point.

    Squared distances to the start are fitted by a parabola around the
    first minimum after the fraction ``skip`` of the samples.
    """
    P = np.asarray(points, dtype=float)
    d2 = product_distance(P, P[0]) ** 2
    k0 = max(2, int(skip * len(P)))
    k = k0 + int(np.argmin(d2[k0:]))
    if k >= len(P) - 1:
        raise GeometryError("curve does not return within the sampled range")
    y0, y1, y2 = d2[k - 1], d2[k], d2[k + 1]
    den = y0 - 2 * y1 + y2
    off = 0.5 * (y0 - y2) / den if den > 0 else 0.0
    return float((k + off) * dt)


# --------------------------------------------------------------------------
# hypotheses and axis


@dataclass
class PeriodFit:
    isometry: H2RIsometry
    distance: float  # hyperbolic translation length
    rotation: float  # rotation angle for elliptic fits
    shift: float  # vertical translation
    slope: float  # alpha in [0, pi/2]
    axis_plane: VerticalPlane | None
    residual: float


def _lorentz_projection(B: np.ndarray) -> np.ndarray:
    """Nearest-looking Lorentz matrix: B (eta B^T eta B)^(-1/2)."""
    M = LORENTZ @ B.T @ LORENTZ @ B
    R = np.real(sqrtm(np.linalg.inv(M)))
    return B @ R


def fit_period(src: SisterSurface, dst_columns: tuple[int, int] | None = None) -> PeriodFit:
    """Fit the isometry taking the first lattice column onto the last.

    Positions and frame vectors of every node in the two columns enter a
    linear least-squares fit of the Lorentz part; the height shift is the
    mean height difference.
    """
    a, b = dst_columns if dst_columns is not None else (0, src.points.shape[0] - 1)
    P, Q = src.points[a], src.points[b]
    Fa = np.concatenate([src.frames[a], src.normals[a][:, None]], axis=1)
    Fb = np.concatenate([src.frames[b], src.normals[b][:, None]], axis=1)
    Xa = np.concatenate([P[:, :3], Fa[..., :3].reshape(-1, 3)])
    Xb = np.concatenate([Q[:, :3], Fb[..., :3].reshape(-1, 3)])
    Bt, *_ = np.linalg.lstsq(Xa, Xb, rcond=None)
    B = _lorentz_projection(Bt.T)
    shift = float(np.mean(Q[:, 3] - P[:, 3]))
    iso = H2RIsometry(B, shift, 1)
    resid = float(np.max(product_distance(iso(P), Q)))
    tr = float(np.trace(B))
    c = 0.5 * (tr - 1.0)
    if c >= 1.0:
        dist, rot = float(np.arccosh(c)), 0.0
    else:
        dist, rot = 0.0, float(np.arccos(max(-1.0, c)))
    slope = float(np.arctan2(dist, abs(shift)))
    plane = None
    if dist > 1e-9:
        w, V = np.linalg.eig(B)
        k = np.argsort(np.abs(w))
        lo, hi = np.real(V[:, k[0]]), np.real(V[:, k[-1]])
        n = lorentz_cross(lo, hi)
        if lorentz(n, n) > 0:
            plane = VerticalPlane(n)
    return PeriodFit(iso, dist, rot, shift, slope, plane, resid)


def classify_slope(alpha: float, band: float = 0.05) -> str:
    if alpha < band:
        return "vertical"
    if abs(alpha - np.pi / 2) < band:
        return "horizontal"
    return "tilted"


@dataclass
class H1Status:
    displaced: tuple[float, float]
    closed: tuple[bool, bool]
    case: str  # "A" or "B"
    planes_disjoint: bool | None
    holds: bool


def h1_status(curve1, curve2, closed_tol: float = 1e-4) -> H1Status:
    """Hypothesis (H1) from the two boundary sister curves sampled over one period."""
    c1 = np.asarray(curve1, dtype=float)
    c2 = np.asarray(curve2, dtype=float)
    d = (float(product_distance(c1[0], c1[-1])), float(product_distance(c2[0], c2[-1])))
    closed = (d[0] < closed_tol, d[1] < closed_tol)
    if not all(closed):
        return H1Status(d, closed, "A", None, True)
    p1, _ = fit_vertical_plane(c1)
    p2, _ = fit_vertical_plane(c2)
    disjoint = not p1.intersects(p2)
    return H1Status(d, closed, "B", disjoint, disjoint)


@dataclass
class SisterDiagnostics:
    h1: H1Status
    mirrors: tuple[MirrorReport, MirrorReport]
    period: PeriodFit
    axis: str
    h2_holds: bool
    intersections: IntersectionReport
    path_residual: float

    @property
    def slope(self) -> float:
        return self.period.slope

    @property
    def branch(self) -> str:
        if self.axis == "vertical":
            return "vertical unduloid branch"
        if self.axis == "horizontal":
            return "horizontal unduloid branch"
        return "tilted candidate"


def disk_chart(points) -> np.ndarray:
    """Poincare disk coordinates of the H^2 part together with the height."""
    p = np.asarray(points, dtype=float)
    d = p[..., 1:3] / (1.0 + p[..., :1])
    return np.concatenate([d, p[..., 3:4]], axis=-1)


def sister_mesh(sister: SisterSurface) -> tuple[np.ndarray, np.ndarray]:
    """Lattice triangles and positions of the sister (one period, not closed up)."""
    nx, ny = sister.points.shape[:2]
    return sister.points.reshape(-1, 4), grid_triangles(nx, ny, False)


def reflected_intersections(sister: SisterSurface, plane: VerticalPlane, weld_tol: float = 1e-2) -> IntersectionReport:
    """Self-intersections of the sister together with its mirror image in ``plane``.

    Boundary rows within ``weld_tol`` of the plane are seams: their vertices
    are snapped onto it and shared by both copies.  Positions are drawn in
    the Poincare disk chart times the height, a global diffeomorphism of
    H^2 x R onto an open cylinder of R^3.
    """
    nx, ny = sister.points.shape[:2]
    P = sister.points.copy()
    n = plane.normal
    fixed = np.zeros((nx, ny), dtype=bool)
    for row in (0, ny - 1):
        if np.max(plane.deviation(P[:, row])) < weld_tol:
            x = P[:, row, :3] - lorentz(P[:, row, :3], n)[:, None] * n
            P[:, row, :3] = x / np.sqrt(-lorentz(x, x))[:, None]
            fixed[:, row] = True
    V = P.reshape(-1, 4)
    T = grid_triangles(nx, ny, False)
    W = plane.reflect(V)
    fixed = fixed.reshape(-1)
    nv = len(V)
    remap = np.empty(nv, dtype=np.int64)
    remap[fixed] = np.flatnonzero(fixed)
    free = np.flatnonzero(~fixed)
    remap[free] = nv + np.arange(len(free))
    verts = np.concatenate([V, W[free]])
    tris = np.concatenate([T, remap[T][:, ::-1]])
    return flat_self_intersections(disk_chart(verts), tris)


def hypotheses_and_axis(
    sister: SisterSurface,
    closed_tol: float = 1e-4,
    band: float = 0.05,
    check_embedding: bool = True,
) -> SisterDiagnostics:
    """(H1), (H2) and the (H3) surrogate for a sister sampled over one period in x.

    Rows 0 and -1 are the sisters of the boundary horizontal geodesics;
    columns 0 and -1 are one period apart.
    """
    h1c, h2c = sister.points[:, 0], sister.points[:, -1]
    h1 = h1_status(h1c, h2c, closed_tol)
    mirrors = (mirror_curve_report(sister, 0), mirror_curve_report(sister, -1))
    period = fit_period(sister)
    axis = classify_slope(period.slope, band)
    inter = (
        reflected_intersections(sister, mirrors[0].plane)
        if check_embedding
        else IntersectionReport(np.zeros((0, 2), dtype=np.int64))
    )
    return SisterDiagnostics(h1, mirrors, period, axis, axis != "vertical", inter, sister.path_residual)
