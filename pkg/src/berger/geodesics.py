"""Vertical and horizontal geodesics, linkedness and the polygon of the horizontal-unduloid construction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .core import (
    AmbientIsometry,
    BergerParams,
    GeometryError,
    as_point,
    check_isometry,
    fibre_rotation,
    from_complex,
    frame_vectors,
    hopf_project,
    left_matrix,
    left_translation,
    metric_eval,
    quat_inv,
    to_complex,
)

LINK_THRESHOLD = 1e-6
INTERSECT_THRESHOLD = 1e-8
MIN_SAMPLES = 256


def vertical_geodesic(params: BergerParams, p, s) -> np.ndarray:
    """Unit-speed integral curve of xi through ``p``; broadcasts over ``s``."""
    z, w = to_complex(as_point(p))
    s = np.asarray(s, dtype=float)
    th = params.kappa / (4.0 * params.tau) * s
    return from_complex(np.exp(1j * th) * z, np.exp(-1j * th) * w)


def horizontal_geodesic(params: BergerParams, p, phi: float, t) -> np.ndarray:
    """Unit-speed horizontal geodesic through ``p`` with tangent F_phi."""
    z, w = to_complex(as_point(p))
    t = np.asarray(t, dtype=float)
    a = np.sqrt(params.kappa) / 2.0 * t
    return from_complex(
        np.cos(a) * z - np.sin(a) * np.exp(-1j * phi) * w,
        np.cos(a) * w + np.sin(a) * np.exp(1j * phi) * z,
    )


def horizontal_field(params: BergerParams, p, phi) -> np.ndarray:
    """F_phi = cos(phi) E1 + sin(phi) E2 at ``p``."""
    E = frame_vectors(params, p)
    phi = np.asarray(phi, dtype=float)[..., None]
    return np.cos(phi) * E[..., 0, :] + np.sin(phi) * E[..., 1, :]


@dataclass(frozen=True)
class VerticalGeodesic:
    params: BergerParams
    base: np.ndarray

    def __call__(self, s) -> np.ndarray:
        return vertical_geodesic(self.params, self.base, s)

    @property
    def length(self) -> float:
        return self.params.vertical_length


@dataclass(frozen=True)
class HorizontalGeodesic:
    """Horizontal geodesic ``t -> h(orient * t)`` through ``base`` with field F_phi."""

    params: BergerParams
    base: np.ndarray
    phi: float
    orient: int = 1

    def __post_init__(self):
        object.__setattr__(self, "base", as_point(self.base))
        if self.orient not in (1, -1):
            raise GeometryError("orient must be +1 or -1")

    def __call__(self, t) -> np.ndarray:
        return horizontal_geodesic(self.params, self.base, self.phi, self.orient * np.asarray(t, dtype=float))

    @property
    def length(self) -> float:
        return self.params.horizontal_length

    @property
    def field_angle(self) -> float:
        """Angle of the oriented tangent field against (E1, E2), in [0, 2 pi)."""
        return float(np.mod(self.phi + (np.pi if self.orient < 0 else 0.0), 2 * np.pi))

    def reversed(self) -> "HorizontalGeodesic":
        return HorizontalGeodesic(self.params, self.base, self.phi, -self.orient)

    def mapped(self, iso: AmbientIsometry) -> "HorizontalGeodesic":
        """Image under an isometry, re-expressed in (base, phi, orient) form."""
        base = iso(self.base)
        tangent = self.orient * horizontal_field(self.params, self.base, self.phi) @ iso.matrix.T
        E = frame_vectors(self.params, base)
        c1 = metric_eval(self.params, tangent, E[0], base=base)
        c2 = metric_eval(self.params, tangent, E[1], base=base)
        c3 = metric_eval(self.params, tangent, E[2], base=base)
        if abs(c3) > 1e-8:
            raise GeometryError("isometry does not preserve horizontality")
        return HorizontalGeodesic(self.params, base, float(np.arctan2(c2, c1)), 1)

    def samples(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        t = np.linspace(0.0, self.length, n, endpoint=False)
        return t, self(t)


# --------------------------------------------------------------------------
# linkedness


@dataclass(frozen=True)
class LinkReport:
    status: str  # "linked" | "intersecting" | "indeterminate"
    min_distance: float
    t1: float
    t2: float


class IndeterminateLink(GeometryError):
    pass


def link_status(h1: HorizontalGeodesic, h2: HorizontalGeodesic, samples: int = MIN_SAMPLES) -> LinkReport:
    """Minimum chordal distance between two horizontal geodesics, coarse grid then local refinement."""
    if samples < MIN_SAMPLES:
        raise GeometryError(f"need at least {MIN_SAMPLES} samples per curve")
    L1, L2 = h1.length, h2.length
    t1 = np.linspace(0.0, L1, samples, endpoint=False)
    t2 = np.linspace(0.0, L2, samples, endpoint=False)
    P1, P2 = h1(t1), h2(t2)
    D = np.linalg.norm(P1[:, None, :] - P2[None, :, :], axis=-1)

    # local minima of the periodic distance table serve as refinement seeds
    is_min = np.ones_like(D, dtype=bool)
    for ax in (0, 1):
        for sh in (1, -1):
            is_min &= D <= np.roll(D, sh, axis=ax)
    cand = np.argwhere(is_min)
    order = np.argsort(D[is_min])[:8]
    best = (np.inf, 0.0, 0.0)

    def f(x):
        return float(np.sum((h1(x[0]) - h2(x[1])) ** 2))

    for i, j in cand[order]:
        res = minimize(f, [t1[i], t2[j]], method="BFGS", options={"gtol": 1e-14})
        d = np.sqrt(max(res.fun, 0.0))
        if d < best[0]:
            best = (d, float(res.x[0] % L1), float(res.x[1] % L2))
    d = best[0]
    if d > LINK_THRESHOLD:
        status = "linked"
    elif d < INTERSECT_THRESHOLD:
        status = "intersecting"
    else:
        status = "indeterminate"
    return LinkReport(status, float(d), best[1], best[2])


def are_linked(h1: HorizontalGeodesic, h2: HorizontalGeodesic, samples: int = MIN_SAMPLES) -> bool:
    """True iff the two curves are disjoint (the usage of "linked" for horizontal geodesics).

    Raises :class:`IndeterminateLink` when the minimum distance falls in the
    ambiguity band between the intersection and separation thresholds.
    """
    rep = link_status(h1, h2, samples)
    if rep.status == "indeterminate":
        raise IndeterminateLink(f"minimum distance {rep.min_distance:.3e} is inside the indeterminate band")
    return rep.status == "linked"


# --------------------------------------------------------------------------
# connecting vertical segment


@dataclass(frozen=True)
class SegmentData:
    """Normal form of a pair: h2 passes through v(sign * ell) with field F_phi once h1 is moved to (1, 0) with field E1."""

    ell: float
    phi: float
    sign: int
    t1: float  # parameter on h1 where the vertical segment starts
    t2: float  # parameter on h2 where it ends


def _circle_angle(params: BergerParams, h: HorizontalGeodesic, q) -> float:
    """Parameter t with Hopf(h(t)) = q, taken in [0, 2 pi / sqrt(kappa))."""
    rk = np.sqrt(params.kappa)
    P0 = hopf_project(params, h(0.0)) * rk
    W = hopf_project(params, h(np.pi / (2 * rk))) * rk
    q = np.asarray(q) * rk
    return float(np.mod(np.arctan2(q @ W, q @ P0), 2 * np.pi) / rk)


def _circle_basis(h: HorizontalGeodesic) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal (u0, u1) with h(t) = cos(sqrt(kappa) t / 2) u0 + sin(sqrt(kappa) t / 2) u1."""
    return h(0.0), h(np.pi / np.sqrt(h.params.kappa))


def _same_curve(h1: HorizontalGeodesic, h2: HorizontalGeodesic, tol: float = 1e-9) -> bool:
    u0, u1 = _circle_basis(h1)
    p = h2.base
    if np.linalg.norm(p - (p @ u0) * u0 - (p @ u1) * u1) > tol:
        return False
    dphi = np.mod(h2.field_angle - h1.field_angle, np.pi)
    return min(dphi, np.pi - dphi) < 1e-7


def connecting_vertical_segment(params: BergerParams, h1: HorizontalGeodesic, h2: HorizontalGeodesic) -> SegmentData:
    """Shortest vertical segment joining ``h1`` to ``h2`` and the relative field angle.

    ``ell`` is normalized to ``[0, 2 tau pi / kappa]``: of the two vertical arcs
    joining the same pair of fibre points (mod the antipodal map), the shorter
    one is kept and its direction recorded in ``sign``.
    """
    phi = float(np.mod(h2.field_angle - h1.field_angle, 2 * np.pi))
    if _same_curve(h1, h2):
        t1 = float(np.mod(_locate(h1, h2.base), h1.length))
        return SegmentData(0.0, phi, 1, t1, 0.0)
    rep = link_status(h1, h2)
    if rep.status != "linked":
        raise GeometryError(f"horizontal geodesics intersect without coinciding (distance {rep.min_distance:.3e})")

    rk = np.sqrt(params.kappa)
    n1 = np.cross(hopf_project(params, h1(0.0)), hopf_project(params, h1(np.pi / (2 * rk))))
    n2 = np.cross(hopf_project(params, h2(0.0)), hopf_project(params, h2(np.pi / (2 * rk))))
    m = np.cross(n1, n2)
    if np.linalg.norm(m) < 1e-12 * np.linalg.norm(n1) * np.linalg.norm(n2):
        qs = [hopf_project(params, h1(0.0))]
    else:
        m = m / np.linalg.norm(m) / rk
        qs = [m, -m]

    half = 4.0 * abs(params.tau) * np.pi / params.kappa  # vertical distance to the antipode
    best = None
    for q in qs:
        t1 = _circle_angle(params, h1, q)
        t2 = _circle_angle(params, h2, q)
        z1, w1 = to_complex(h1(t1))
        z2, w2 = to_complex(h2(t2))
        theta = np.angle(z2 * np.conj(z1) + w1 * np.conj(w2))
        # candidate fibre points differ by the antipodal map (theta -> theta + pi)
        if theta > np.pi / 2:
            theta -= np.pi
            t2 += h2.length / 2
        elif theta <= -np.pi / 2:
            theta += np.pi
            t2 += h2.length / 2
        s = 4.0 * params.tau * theta / params.kappa
        cand = (abs(s), 1 if s >= 0 else -1, t1, float(np.mod(t2, h2.length)))
        assert abs(s) <= half / 2 + 1e-12
        if best is None or cand[0] < best[0] - 1e-13:
            best = cand
    ell, sign, t1, t2 = best
    return SegmentData(float(ell), phi, int(sign), float(t1), float(t2))


def _locate(h: HorizontalGeodesic, p) -> float:
    u0, u1 = _circle_basis(h)
    return float(2.0 * np.arctan2(p @ u1, p @ u0) / np.sqrt(h.params.kappa))


def normal_form_isometry(params: BergerParams, h1: HorizontalGeodesic, seg: SegmentData) -> AmbientIsometry:
    """Isometry sending h1(seg.t1) to (1, 0) and the tangent of h1 there to E1."""
    L = left_translation(params, quat_inv(h1(seg.t1)))
    R = fibre_rotation(params, -h1.field_angle)
    return R.compose(L)


# --------------------------------------------------------------------------
# the polygon Gamma_lambda


def geodesic_reflection(params: BergerParams, p, direction) -> AmbientIsometry:
    """Half-turn about the great circle through ``p`` with R^4 tangent ``direction``.

    For horizontal or vertical geodesics this is an isometry of every Berger
    sphere; anything else is rejected by the isometry gate.
    """
    p = np.asarray(p, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d - (d @ p) * p
    d = d / np.linalg.norm(d)
    P = np.outer(p, p) + np.outer(d, d)
    return check_isometry(params, 2.0 * P - np.eye(4))


@dataclass(frozen=True)
class GeodesicPolygon:
    """Closed polygon gamma1 + gamma4 - gamma3 - gamma2 bounding a convex Hopf sector."""

    params: BergerParams
    lam: float

    @property
    def domains(self) -> dict[str, tuple[float, float]]:
        rk = np.sqrt(self.params.kappa)
        return {
            "gamma1": (0.0, np.pi / rk),
            "gamma2": (0.0, self.lam),
            "gamma3": (0.0, 2.0 * self.params.tau * np.pi / self.params.kappa),
            "gamma4": (0.0, np.pi / rk - self.lam),
        }

    def gamma1(self, t):
        a = np.sqrt(self.params.kappa) / 2.0 * np.asarray(t, dtype=float)
        return from_complex(np.cos(a) + 0j, np.sin(a) + 0j)

    def gamma2(self, t):
        a = np.sqrt(self.params.kappa) / 2.0 * np.asarray(t, dtype=float)
        return from_complex(np.cos(a) + 0j, 1j * np.sin(a))

    def gamma3(self, t):
        k, tau = self.params.kappa, self.params.tau
        th = k / (4.0 * tau) * np.asarray(t, dtype=float)
        a = np.sqrt(k) / 2.0 * self.lam
        return from_complex(np.exp(1j * th) * np.cos(a), np.exp(-1j * th) * 1j * np.sin(a))

    def gamma4(self, t):
        a = np.sqrt(self.params.kappa) / 2.0 * np.asarray(t, dtype=float)
        return from_complex(1j * np.sin(a), np.cos(a) + 0j)

    def segment(self, name: str):
        return getattr(self, name)

    def chain(self, n: dict[str, int] | int = 32) -> list[tuple[str, np.ndarray, np.ndarray]]:
        """Segments in traversal order as (name, parameters, points); shared endpoints repeated."""
        if isinstance(n, int):
            n = {k: n for k in ("gamma1", "gamma2", "gamma3", "gamma4")}
        out = []
        for name, rev in (("gamma1", False), ("gamma4", False), ("gamma3", True), ("gamma2", True)):
            a, b = self.domains[name]
            t = np.linspace(a, b, n[name] + 1)
            if rev:
                t = t[::-1]
            out.append((name, t, self.segment(name)(t)))
        return out

    def h1(self, t):
        return self.gamma1(t)

    def h2(self, t):
        k = self.params.kappa
        c, s = np.cos(np.sqrt(k) * self.lam), np.sin(np.sqrt(k) * self.lam)
        a = np.sqrt(k) / 2.0 * np.asarray(t, dtype=float)
        return from_complex(c * np.cos(a) + 1j * s * np.sin(a), -c * np.sin(a) + 1j * s * np.cos(a))

    def h1_geodesic(self) -> HorizontalGeodesic:
        return HorizontalGeodesic(self.params, np.array([1.0, 0, 0, 0]), 0.0)

    def h2_geodesic(self) -> HorizontalGeodesic:
        k = self.params.kappa
        base = from_complex(np.cos(np.sqrt(k) * self.lam) + 0j, 1j * np.sin(np.sqrt(k) * self.lam))
        return HorizontalGeodesic(self.params, base, np.pi)

    def gamma2_reflection(self) -> AmbientIsometry:
        """Half-turn about the great circle carrying gamma2."""
        return geodesic_reflection(self.params, self.gamma2(0.0), [0.0, 0.0, 0.0, 1.0])

    def gamma4_reflection(self) -> AmbientIsometry:
        return geodesic_reflection(self.params, self.gamma4(0.0), [0.0, 1.0, 0.0, 0.0])


def build_polygon(params: BergerParams, lam: float) -> GeodesicPolygon:
    lmax = np.pi / (2.0 * np.sqrt(params.kappa))
    if not (0.0 <= lam <= lmax * (1 + 1e-14)):
        raise GeometryError(f"lambda must lie in [0, {lmax}], got {lam!r}")
    return GeodesicPolygon(params, float(min(lam, lmax)))


def reflection_across_gamma3(params: BergerParams, lam: float) -> AmbientIsometry:
    """rho = L_g o rho0 o L_g^{-1} with g = gamma2(lambda) and rho0(z, w) = (z, -w)."""
    poly = build_polygon(params, lam)
    g = poly.gamma2(lam)
    rho0 = np.diag([1.0, 1.0, -1.0, -1.0])
    return check_isometry(params, left_matrix(g) @ rho0 @ left_matrix(quat_inv(g)))
