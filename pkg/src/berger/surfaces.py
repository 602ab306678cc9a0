"""Spherical helicoids, the neck-size family f^c, the Lawson helicoid f^n and their scalar invariants."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BergerParams, GeometryError, check_isometry, from_complex, AmbientIsometry


@dataclass(frozen=True)
class HelicoidSpec:
    """Spherical helicoid with pitch ``ell`` and angle ``phi``; ``sign`` picks the +- branch."""

    params: BergerParams
    ell: float
    phi: float = np.pi
    sign: int = 1

    def __post_init__(self):
        vl = self.params.vertical_length
        if not (0.0 <= self.ell < vl):
            raise GeometryError(f"pitch must lie in [0, {vl}), got {self.ell!r}")
        if self.sign not in (1, -1):
            raise GeometryError("sign must be +1 or -1")
        if self.ell == 0.0:
            # umbrella convention
            object.__setattr__(self, "phi", np.pi)
        elif not (0.0 <= self.phi < 2 * np.pi):
            object.__setattr__(self, "phi", float(np.mod(self.phi, 2 * np.pi)))


def _check_regular(params: BergerParams, x, what: str):
    s = np.sin(np.sqrt(params.kappa) / 2.0 * np.asarray(x, dtype=float))
    if np.any(np.abs(s) < 1e-12):
        raise GeometryError(f"{what} is singular where sin(sqrt(kappa) x / 2) = 0")


def helicoid_point(spec: HelicoidSpec, x, y) -> np.ndarray:
    """Point f(x, y) of the spherical helicoid; broadcasts over x and y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any((y < -1e-12) | (y > 1 + 1e-12)):
        raise GeometryError("helicoid parameter y must lie in [0, 1]")
    if spec.ell == 0.0:
        _check_regular(spec.params, x, "the umbrella parametrization")
    k, tau = spec.params.kappa, spec.params.tau
    a = np.sqrt(k) / 2.0 * x
    r = spec.sign * k / (4.0 * tau) * spec.ell
    return from_complex(np.cos(a) * np.exp(1j * r * y), np.sin(a) * np.exp(1j * (spec.phi + r) * y))


def helicoid_is_embedded(spec: HelicoidSpec, rtol: float = 1e-12) -> bool:
    """Embeddedness as stated for the helicoid family: ell in (0, 4 tau pi / kappa], or the umbrella."""
    if spec.ell == 0.0:
        return True
    return spec.ell <= 4.0 * abs(spec.params.tau) * np.pi / spec.params.kappa * (1 + rtol)


def helicoid_fibre_turns(spec: HelicoidSpec) -> tuple[float, float]:
    """Angles swept over y in [0, 1] along the fibres z = 0 and w = 0 (the two axes)."""
    r = spec.sign * spec.params.kappa / (4.0 * spec.params.tau) * spec.ell
    return float(r), float(spec.phi + r)


def helicoid_patch_is_embedded(spec: HelicoidSpec) -> bool:
    """Exact test for the patch [0, 4 pi / sqrt(kappa)) x [0, 1].

    Two points of the patch coincide only when both axes are swept by
    more than half a turn, so the patch is embedded iff both sweep
    angles lie strictly inside (-pi, pi).  Unlike the pitch-only rule
    this depends on ``phi`` and ``sign``.
    """
    if spec.ell == 0.0:
        return True
    r, s = helicoid_fibre_turns(spec)
    return abs(r) < np.pi and abs(s) < np.pi


@dataclass(frozen=True)
class FcSpec:
    """Reparametrised helicoid in S^3(4H^2 - 1, H) with neck parameter ``c``."""

    H: float
    c: float

    def __post_init__(self):
        if not self.H > 0.5:
            raise GeometryError(f"need H > 1/2, got {self.H!r}")
        if not (0.0 <= self.c <= 1.0):
            raise GeometryError(f"need c in [0, 1], got {self.c!r}")

    @property
    def params(self) -> BergerParams:
        return BergerParams.from_mean_curvature(self.H)

    @property
    def kappa(self) -> float:
        return 4.0 * self.H**2 - 1.0

    @property
    def tau(self) -> float:
        return self.H

    @property
    def axis_x(self) -> float:
        """x-coordinate of the vertical axis v = f^c(axis_x, .)."""
        return np.pi / np.sqrt(self.kappa)


def fc_point(spec: FcSpec, x, y, params: BergerParams | None = None) -> np.ndarray:
    """f^c(x, y); ``params`` overrides the ambient (kappa, tau) if given.

    For c = 0 the map degenerates where sin(sqrt(kappa) x / 2) = 0 and those
    points are rejected; elsewhere (including the axis) it is an immersion.
    """
    P = params or spec.params
    k, tau = P.kappa, P.tau
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if spec.c == 0.0:
        _check_regular(P, x, "f^0")
    a = np.sqrt(k) / 2.0 * x
    r = k / (4.0 * tau)
    return from_complex(np.cos(a) * np.exp(-1j * spec.c * r * y), np.sin(a) * np.exp(1j * r * y))


def fc_meridian_angle(spec: FcSpec, y) -> np.ndarray:
    """Angle of the horizontal field of the meridian x -> f^c(x, y)."""
    return (spec.c + 1.0) * spec.kappa / (4.0 * spec.tau) * np.asarray(y, dtype=float)


def fc_shape_operator(spec: FcSpec, y=0.0) -> np.ndarray:
    """Shape operator on the axis x = pi/sqrt(kappa) in the orthonormal frame (f_x, f_y).

    Only the axis value is provided; off-axis shape operators come from
    :func:`berger.daniel.surface_data`.
    """
    m = (spec.c - 1.0) * spec.kappa / (4.0 * spec.tau) + spec.tau
    return np.array([[0.0, m], [m, 0.0]])


def neck_curvature(H: float, c) -> np.ndarray:
    """Geodesic curvature of the sister of the axis, 2H + (c - 1)(4H^2 - 1)/(4H)."""
    return 2.0 * H + (np.asarray(c, dtype=float) - 1.0) * (4.0 * H * H - 1.0) / (4.0 * H)


def _neck_factors(H: float, c):
    # k^2 - 1 = (4H^2 - 1) A B / (16 H^2), with A, B exact at c = 0
    c = np.asarray(c, dtype=float)
    A = (2.0 * H - 1.0) + c * (2.0 * H + 1.0)
    B = (2.0 * H + 1.0) + c * (2.0 * H - 1.0)
    return c, A, B


def half_period(H: float, c) -> np.ndarray:
    """pi / sqrt(k^2 - 1) with k the neck curvature."""
    _, A, B = _neck_factors(H, c)
    return 4.0 * H * np.pi / (np.sqrt((2.0 * H - 1.0) * (2.0 * H + 1.0)) * np.sqrt(A * B))


def boundary_angle(H: float, c) -> np.ndarray:
    """Angle between the horizontal fields of f^c(., 0) and f^c(., T): (c+1)(4H^2-1)/(4H) * T."""
    c, A, B = _neck_factors(H, c)
    return np.pi * (c + 1.0) * np.sqrt((2.0 * H - 1.0) * (2.0 * H + 1.0)) / np.sqrt(A * B)


def alpha0(H: float, c) -> np.ndarray:
    """Parameter at which f^c(., 0) and f^c(., alpha) have opposite horizontal fields."""
    return 4.0 * H * np.pi / ((np.asarray(c, dtype=float) + 1.0) * (4.0 * H * H - 1.0))


def alpha_domain(H: float, c: float) -> tuple[float, float]:
    """Open interval (0, 2 alpha0) of admissible second-boundary parameters."""
    return 0.0, float(2.0 * alpha0(H, c))


@dataclass(frozen=True)
class SisterProfile:
    H: float
    c: float
    k_neck: float
    T_half: float
    alpha0: float

    def Tcal(self, c):
        return boundary_angle(self.H, c)


def sister_profile(spec: FcSpec) -> SisterProfile:
    return SisterProfile(
        spec.H,
        spec.c,
        float(neck_curvature(spec.H, spec.c)),
        float(half_period(spec.H, spec.c)),
        float(alpha0(spec.H, spec.c)),
    )


def fn_point(n: float, x, y) -> np.ndarray:
    """Lawson's cousin of the R^3 unduloid with neck size n, in the round S^3 (kappa=4, tau=1)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return from_complex(np.cos(x) * np.exp(-1j * n * y), np.sin(x) * np.exp(1j * (2 * np.pi - n) * y))


def s3_flow_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    return np.array(
        [[c, 0.0, -s, 0.0],
         [0.0, c, 0.0, -s],
         [s, 0.0, c, 0.0],
         [0.0, s, 0.0, c]]
    )


def s3_flow(theta: float, p) -> np.ndarray:
    """Flow (z, w) -> (cos(theta/2) z - sin(theta/2) w, sin(theta/2) z + cos(theta/2) w)."""
    return np.asarray(p, dtype=float) @ s3_flow_matrix(theta).T


def s3_flow_isometry(params: BergerParams, theta: float) -> AmbientIsometry:
    return check_isometry(params, s3_flow_matrix(theta))
