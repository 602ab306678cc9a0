"""Quaternionic model of the Berger spheres S^3(kappa, tau).

Points of S^3 are stored as real 4-vectors ``(a, b, c, d)`` identified with
the quaternion ``a + b i + c j + d k`` and with the complex pair
``(z, w) = (a + i b, c + i d)``.  Every function here broadcasts over leading
axes, so ``p`` may be a single point of shape ``(4,)`` or a batch ``(..., 4)``.

Sign conventions (checked in ``tests/test_core.py``): with the frame

    E1 = sqrt(kappa)/2 * p j,   E2 = sqrt(kappa)/2 * p k,   xi = kappa/(4 tau) * p i

the Hopf map ``(z, w) -> (-2 i z w, |z|^2 - |w|^2) / sqrt(kappa)`` is a
Riemannian submersion onto the sphere of radius ``1/sqrt(kappa)``: its
differential sends {E1, E2} to an orthonormal pair and kills xi.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-9
ISOMETRY_TOL = 1e-10

# V(a, b, c, d) = (-b, a, d, -c); equals right multiplication by i.
V_MATRIX = np.array(
    [[0.0, -1.0, 0.0, 0.0],
     [1.0, 0.0, 0.0, 0.0],
     [0.0, 0.0, 0.0, 1.0],
     [0.0, 0.0, -1.0, 0.0]]
)

ONE = np.array([1.0, 0.0, 0.0, 0.0])
QI = np.array([0.0, 1.0, 0.0, 0.0])
QJ = np.array([0.0, 0.0, 1.0, 0.0])
QK = np.array([0.0, 0.0, 0.0, 1.0])


class GeometryError(ValueError):
    """Raised when an input violates a geometric precondition."""


@dataclass(frozen=True)
class BergerParams:
    """Base curvature ``kappa > 0`` and bundle curvature ``tau != 0``."""

    kappa: float
    tau: float
    eta: float = field(init=False)

    def __post_init__(self):
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise GeometryError(f"kappa must be positive, got {self.kappa!r}")
        if not np.isfinite(self.tau) or self.tau == 0:
            raise GeometryError(f"tau must be nonzero, got {self.tau!r}")
        object.__setattr__(self, "eta", 4.0 * self.tau**2 / self.kappa)

    @classmethod
    def from_mean_curvature(cls, H: float) -> "BergerParams":
        """The sister ambient space of MC-H surfaces in H^2 x R: (4H^2 - 1, H)."""
        if H <= 0.5:
            raise GeometryError(f"need H > 1/2, got {H!r}")
        return cls(4.0 * H * H - 1.0, H)

    @property
    def is_round(self) -> bool:
        return abs(self.kappa - 4.0 * self.tau**2) <= 1e-14 * max(1.0, self.kappa)

    @property
    def vertical_length(self) -> float:
        return 8.0 * abs(self.tau) * np.pi / self.kappa

    @property
    def horizontal_length(self) -> float:
        return 4.0 * np.pi / np.sqrt(self.kappa)

    def connection_table(self) -> np.ndarray:
        """``G[i, j, k]`` = k-th frame component of nabla_{e_i} e_j, frame (E1, E2, xi)."""
        t = self.tau
        s = self.kappa / (2.0 * t) - t
        G = np.zeros((3, 3, 3))
        G[0, 1, 2] = t       # nabla_E1 E2 = tau xi
        G[0, 2, 1] = -t      # nabla_E1 xi = -tau E2
        G[1, 0, 2] = -t      # nabla_E2 E1 = -tau xi
        G[1, 2, 0] = t       # nabla_E2 xi = tau E1
        G[2, 0, 1] = s       # nabla_xi E1 = (kappa/2tau - tau) E2
        G[2, 1, 0] = -s      # nabla_xi E2 = -(kappa/2tau - tau) E1
        return G


def as_point(p, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate unit length (within ``tol``) and return a float array."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 4:
        raise GeometryError(f"expected 4-vectors, got shape {p.shape}")
    err = np.abs(np.einsum("...i,...i->...", p, p) - 1.0)
    if np.any(err > tol):
        raise GeometryError(f"point off the unit sphere by {np.max(err):.3e}")
    return p


def normalize(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return p / np.linalg.norm(p, axis=-1, keepdims=True)


def to_complex(p):
    """``(z, w)`` view of a point or batch of points."""
    p = np.asarray(p, dtype=float)
    return p[..., 0] + 1j * p[..., 1], p[..., 2] + 1j * p[..., 3]


def from_complex(z, w) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    z, w = np.broadcast_arrays(z, w)
    return np.stack([z.real, z.imag, w.real, w.imag], axis=-1)


def qmul_raw(p, q) -> np.ndarray:
    """Hamilton product without normalization (works on any 4-vectors)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    a1, b1, c1, d1 = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        ],
        axis=-1,
    )


def quat_mul(p, q) -> np.ndarray:
    """Product of unit quaternions, renormalized onto S^3."""
    return normalize(qmul_raw(as_point(p), as_point(q)))


def quat_inv(p) -> np.ndarray:
    """Inverse of a unit quaternion, (z, w)^{-1} = (conj z, -w)."""
    p = np.asarray(p, dtype=float)
    return p * np.array([1.0, -1.0, -1.0, -1.0])


def left_matrix(p) -> np.ndarray:
    """4x4 matrix of q -> p q."""
    p = np.asarray(p, dtype=float)
    return np.stack([qmul_raw(p, e) for e in np.eye(4)], axis=-1)


def right_matrix(q) -> np.ndarray:
    """4x4 matrix of p -> p q."""
    q = np.asarray(q, dtype=float)
    return np.stack([qmul_raw(e, q) for e in np.eye(4)], axis=-1)


_RJ = right_matrix(QJ)
_RK = right_matrix(QK)
_RI = right_matrix(QI)
assert np.array_equal(_RI, V_MATRIX)


def frame_matrices(params: BergerParams) -> np.ndarray:
    """Constant matrices ``M`` with ``E_i(p) = M[i] @ p`` (shape (3, 4, 4))."""
    rk = np.sqrt(params.kappa) / 2.0
    return np.stack([rk * _RJ, rk * _RK, params.kappa / (4.0 * params.tau) * _RI])


def metric_matrix(params: BergerParams, p) -> np.ndarray:
    """Symmetric 4x4 matrix G(p) with g(X, Y) = X^T G(p) Y on T_p S^3."""
    p = np.asarray(p, dtype=float)
    u = p @ V_MATRIX.T
    return (4.0 / params.kappa) * (
        np.eye(4) + (params.eta - 1.0) * u[..., :, None] * u[..., None, :]
    )


def metric_eval(params: BergerParams, x, y, base=None) -> np.ndarray:
    """g_{kappa,tau}(x, y) for tangent vectors at ``base``.

    ``x`` and ``y`` are either bare 4-vectors (then ``base`` is required) or
    ``(base, vec)`` pairs; pairs must share their base point.
    """
    if isinstance(x, tuple):
        bx, x = x
        by, y = y
        bx = np.asarray(bx, dtype=float)
        by = np.asarray(by, dtype=float)
        if not np.allclose(bx, by, atol=1e-12, rtol=0):
            raise GeometryError("tangent vectors live at different base points")
        base = bx
    if base is None:
        raise GeometryError("base point required")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.asarray(base, dtype=float) @ V_MATRIX.T
    xu = np.einsum("...i,...i->...", x, u)
    yu = np.einsum("...i,...i->...", y, u)
    xy = np.einsum("...i,...i->...", x, y)
    return (4.0 / params.kappa) * (xy + (params.eta - 1.0) * xu * yu)


@dataclass(frozen=True)
class Frame:
    """Orthonormal frame (E1, E2, xi) at ``base``; rows of ``vectors``."""

    base: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    xi: np.ndarray

    @property
    def vectors(self) -> np.ndarray:
        return np.stack([self.e1, self.e2, self.xi], axis=-2)


def frame_at(params: BergerParams, p) -> Frame:
    p = as_point(p)
    M = frame_matrices(params)
    e = np.einsum("kij,...j->...ki", M, p)
    return Frame(p, e[..., 0, :], e[..., 1, :], e[..., 2, :])


def frame_vectors(params: BergerParams, p) -> np.ndarray:
    """Frame at ``p`` as an array of shape ``(..., 3, 4)``; no validation."""
    return np.einsum("kij,...j->...ki", frame_matrices(params), np.asarray(p, dtype=float))


def frame_coords(params: BergerParams, p, v) -> np.ndarray:
    """Components of the tangent vector ``v`` at ``p`` against (E1, E2, xi)."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    E = frame_vectors(params, p)
    return metric_eval(params, v[..., None, :], E, base=p[..., None, :])


def xi_field(params: BergerParams, p) -> np.ndarray:
    return (params.kappa / (4.0 * params.tau)) * (np.asarray(p, dtype=float) @ V_MATRIX.T)


def hopf_project(params: BergerParams, p) -> np.ndarray:
    """Hopf map onto the sphere of radius 1/sqrt(kappa) in R^3."""
    z, w = to_complex(p)
    q = -2j * z * w
    h = np.abs(z) ** 2 - np.abs(w) ** 2
    return np.stack([q.real, q.imag, h], axis=-1) / np.sqrt(params.kappa)


@dataclass(frozen=True)
class AmbientIsometry:
    """Orthogonal 4x4 map preserving g; ``vcommute`` is the sign in A V = +-V A."""

    matrix: np.ndarray
    vcommute: int

    def __call__(self, p) -> np.ndarray:
        return np.asarray(p, dtype=float) @ self.matrix.T

    def compose(self, other: "AmbientIsometry") -> "AmbientIsometry":
        """``self o other``."""
        return AmbientIsometry(self.matrix @ other.matrix, self.vcommute * other.vcommute)

    def inverse(self) -> "AmbientIsometry":
        return AmbientIsometry(self.matrix.T.copy(), self.vcommute)


class IsometryRejected(GeometryError):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def check_isometry(params: BergerParams, A, tol: float = ISOMETRY_TOL) -> AmbientIsometry:
    """Gate for ambient isometries; raises :class:`IsometryRejected` with the failed condition."""
    A = np.asarray(A, dtype=float)
    if A.shape != (4, 4):
        raise IsometryRejected(f"shape {A.shape} is not 4x4")
    if np.max(np.abs(A.T @ A - np.eye(4))) > tol:
        raise IsometryRejected("not orthogonal")
    AV = A @ V_MATRIX
    VA = V_MATRIX @ A
    if np.max(np.abs(AV - VA)) <= tol:
        return AmbientIsometry(A.copy(), +1)
    if np.max(np.abs(AV + VA)) <= tol:
        return AmbientIsometry(A.copy(), -1)
    if params.is_round:
        return AmbientIsometry(A.copy(), 0)
    raise IsometryRejected("A V != +-V A and the metric is not round")


def left_translation(params: BergerParams, p) -> AmbientIsometry:
    return check_isometry(params, left_matrix(as_point(p)))


def fibre_rotation(params: BergerParams, angle: float) -> AmbientIsometry:
    """Rotation about the vertical geodesic through 1 turning E1 into F_angle there.

    Realized as conjugation ``p -> q^{-1} p q`` with ``q = exp(-i angle/2)``,
    which fixes the fibre through 1 pointwise.
    """
    q = np.array([np.cos(angle / 2.0), -np.sin(angle / 2.0), 0.0, 0.0])
    A = left_matrix(quat_inv(q)) @ right_matrix(q)
    return check_isometry(params, A)


def christoffel_fd(params: BergerParams, p, step: float = 1e-4) -> np.ndarray:
    """Connection coefficients ``C[i, j, k]`` = g(nabla_{E_i} E_j, E_k), from metric derivatives.

    A chart ``u -> normalize(p + sum u_a t_a)`` around ``p`` is used; the
    metric coefficients in that chart are differentiated by central
    differences to give Christoffel symbols, which are then contracted with
    the frame fields (whose chart components are also differenced).
    """
    if not (1e-7 <= step <= 1e-2):
        raise GeometryError(f"finite-difference step {step!r} outside [1e-7, 1e-2]")
    p = as_point(p)
    T = np.stack([qmul_raw(p, QI), qmul_raw(p, QJ), qmul_raw(p, QK)])  # R^4-orthonormal basis of T_p

    def chart(u):
        q = p + u @ T
        n = np.linalg.norm(q)
        x = q / n
        D = (T - np.outer(T @ x, x)) / n  # rows: d x / d u_a
        return x, D

    def chart_metric(u):
        x, D = chart(u)
        return D @ metric_matrix(params, x) @ D.T

    def frame_in_chart(u):
        x, D = chart(u)
        E = frame_vectors(params, x)
        # solve D^T c = E_j in the least-squares sense (exact: E_j is tangent)
        c, *_ = np.linalg.lstsq(D.T, E.T, rcond=None)
        return c  # column j holds chart components of E_j

    h = step
    eye = np.eye(3)
    dG = np.stack([(chart_metric(h * eye[a]) - chart_metric(-h * eye[a])) / (2 * h) for a in range(3)])
    dF = np.stack([(frame_in_chart(h * eye[a]) - frame_in_chart(-h * eye[a])) / (2 * h) for a in range(3)])
    G0 = chart_metric(np.zeros(3))
    Ginv = np.linalg.inv(G0)
    # Gamma^k_{ab} = 1/2 g^{kl} (d_a g_{lb} + d_b g_{la} - d_l g_{ab})
    low = 0.5 * (np.einsum("alb->lab", dG) + np.einsum("bla->lab", dG) - dG)
    Gamma = np.einsum("kl,lab->kab", Ginv, low)
    F0 = frame_in_chart(np.zeros(3))  # (a, j)
    # (nabla_{E_i} E_j)^k = E_i^a d_a E_j^k + Gamma^k_{ab} E_i^a E_j^b
    nab = np.einsum("ai,akj->ijk", F0, dF) + np.einsum("kab,ai,bj->ijk", Gamma, F0, F0)
    # lower with the chart metric and pair with E_k
    return np.einsum("ija,ab,bk->ijk", nab, G0, F0)
