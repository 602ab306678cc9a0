"""H^2 x R in the hyperboloid model.

Points are arrays ``(..., 4)`` holding ``(x0, x1, x2, height)`` where
``(x0, x1, x2)`` lies on the upper sheet of ``-x0^2 + x1^2 + x2^2 = -1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import GeometryError

LORENTZ = np.diag([-1.0, 1.0, 1.0])
HYPERBOLOID_TOL = 1e-10


def lorentz(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return -x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1] + x[..., 2] * y[..., 2]


def lorentz_cross(x, y) -> np.ndarray:
    """Vector Lorentz-orthogonal to both ``x`` and ``y``."""
    return np.cross(x, y) @ LORENTZ


def lift(x1, x2) -> np.ndarray:
    """Hyperboloid point over the disk coordinates (x1, x2)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    return np.stack([np.sqrt(1.0 + x1 * x1 + x2 * x2), x1, x2], axis=-1)


def project_hyperboloid(x) -> np.ndarray:
    """Rescale onto the upper sheet (for drift removal after integration steps)."""
    x = np.asarray(x, dtype=float)
    n = np.sqrt(np.maximum(-lorentz(x, x), 1e-300))
    return x / n[..., None] * np.sign(x[..., :1])


def check_point(p, tol: float = HYPERBOLOID_TOL) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 4:
        raise GeometryError(f"expected (x0, x1, x2, h), got shape {p.shape}")
    x = p[..., :3]
    if np.any(np.abs(lorentz(x, x) + 1.0) > tol * np.maximum(1.0, x[..., 0] ** 2)) or np.any(x[..., 0] <= 0):
        raise GeometryError("point is not on the upper sheet of the hyperboloid")
    return p


def h2_distance(x, y) -> np.ndarray:
    # chord form: <x - y, x - y> = 4 sinh^2(d / 2), accurate for nearby points
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c = lorentz(x - y, x - y)
    return 2.0 * np.arcsinh(0.5 * np.sqrt(np.maximum(c, 0.0)))


def unit_tangent(p, v) -> np.ndarray:
    """Project ``v`` to T_p H^2 and normalize in the Lorentz metric."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v + lorentz(v, p)[..., None] * p
    n = np.sqrt(lorentz(v, v))
    if np.any(n < 1e-14):
        raise GeometryError("direction has no component tangent to H^2")
    return v / n[..., None]


@dataclass(frozen=True)
class H2RGeodesic:
    """Unit-speed geodesic of H^2 x R starting at ``start`` with slope ``alpha`` against the vertical."""

    start: np.ndarray
    alpha: float
    direction: np.ndarray

    def __post_init__(self):
        start = check_point(self.start)
        object.__setattr__(self, "start", start)
        if not (-1e-15 <= self.alpha <= np.pi / 2 + 1e-15):
            raise GeometryError(f"slope must lie in [0, pi/2], got {self.alpha!r}")
        object.__setattr__(self, "direction", unit_tangent(start[:3], self.direction))

    def __call__(self, s) -> np.ndarray:
        return h2r_geodesic(self, s)


def product_distance(p, q) -> np.ndarray:
    """Distance in H^2 x R between points ``(x0, x1, x2, h)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.hypot(h2_distance(p[..., :3], q[..., :3]), p[..., 3] - q[..., 3])


def h2r_geodesic(g: H2RGeodesic, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    r = s * np.sin(g.alpha)
    p, u = g.start[:3], g.direction
    x = np.cosh(r)[..., None] * p + np.sinh(r)[..., None] * u
    h = g.start[3] + s * np.cos(g.alpha)
    return np.concatenate([x, h[..., None]], axis=-1)


def boost_matrix(p, u, d: float) -> np.ndarray:
    """Hyperbolic translation by ``d`` along the geodesic through ``p`` with unit direction ``u``."""
    p = np.asarray(p, dtype=float)
    u = np.asarray(u, dtype=float)
    Jp, Ju = LORENTZ @ p, LORENTZ @ u
    ch, sh = np.cosh(d), np.sinh(d)
    return (
        np.eye(3)
        + (ch - 1.0) * (-np.outer(p, Jp) + np.outer(u, Ju))
        + sh * (-np.outer(u, Jp) + np.outer(p, Ju))
    )


@dataclass(frozen=True)
class H2RIsometry:
    """``(x, h) -> (L x, flip * h + shift)`` with ``L`` a Lorentz matrix preserving the upper sheet."""

    lorentz_matrix: np.ndarray
    shift: float = 0.0
    flip: int = 1

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        x = p[..., :3] @ self.lorentz_matrix.T
        return np.concatenate([x, (self.flip * p[..., 3] + self.shift)[..., None]], axis=-1)

    def push(self, v) -> np.ndarray:
        """Differential on tangent vectors ``(v0, v1, v2, vh)``."""
        v = np.asarray(v, dtype=float)
        return np.concatenate([v[..., :3] @ self.lorentz_matrix.T, (self.flip * v[..., 3])[..., None]], axis=-1)

    def compose(self, other: "H2RIsometry") -> "H2RIsometry":
        """``self o other``."""
        return H2RIsometry(
            self.lorentz_matrix @ other.lorentz_matrix,
            self.flip * other.shift + self.shift,
            self.flip * other.flip,
        )

    def inverse(self) -> "H2RIsometry":
        Linv = LORENTZ @ self.lorentz_matrix.T @ LORENTZ
        return H2RIsometry(Linv, -self.flip * self.shift, self.flip)


def translation_along(g: H2RGeodesic, s: float) -> H2RIsometry:
    """Translation by arclength ``s`` along ``g``."""
    B = boost_matrix(g.start[:3], g.direction, s * np.sin(g.alpha))
    return H2RIsometry(B, s * np.cos(g.alpha), 1)


def product_metric(v, w) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    return lorentz(v[..., :3], w[..., :3]) + v[..., 3] * w[..., 3]


def translation_family_relation(g1: H2RGeodesic, g2: H2RGeodesic, s: float = 1.0, tol: float = 1e-9):
    """Compare the translation families of two geodesics.

    Returns ``(same_family, same_plane, vertical_offset)``; the offset is
    the height difference between ``g2`` and the point of ``g1`` over the
    same H^2 point, or ``nan`` when the H^2 projections differ.
    """
    A, B = translation_along(g1, s), translation_along(g2, s)
    same = np.allclose(A.lorentz_matrix, B.lorentz_matrix, atol=tol) and abs(A.shift - B.shift) < tol
    n1 = lorentz_cross(g1.start[:3], g1.direction)
    same_plane = abs(lorentz(n1, g2.start[:3])) < tol and abs(lorentz(n1, g2.direction)) < tol
    offset = np.nan
    if same_plane and np.sin(g1.alpha) > tol:
        # parameter on g1 over g2's foot point
        p, u = g1.start[:3], g1.direction
        q = g2.start[:3]
        r = np.arctanh(lorentz(q, u) / -lorentz(q, p))
        t = r / np.sin(g1.alpha)
        offset = float(g2.start[3] - h2r_geodesic(g1, t)[3])
    return bool(same), bool(same_plane), offset


# --------------------------------------------------------------------------
# planar curves


def _stencils(X: np.ndarray, dt: float, closed: bool):
    if closed:
        f = lambda k: np.roll(X, -k, axis=0)
        d1 = (f(-2) - 8 * f(-1) + 8 * f(1) - f(2)) / (12 * dt)
        d2 = (-f(-2) + 16 * f(-1) - 30 * X + 16 * f(1) - f(2)) / (12 * dt * dt)
        return X, d1, d2
    n = len(X)
    if n < 5:
        raise GeometryError("need at least 5 samples")
    c = slice(2, n - 2)
    d1 = (X[0 : n - 4] - 8 * X[1 : n - 3] + 8 * X[3 : n - 1] - X[4:n]) / (12 * dt)
    d2 = (-X[0 : n - 4] + 16 * X[1 : n - 3] - 30 * X[c] + 16 * X[3 : n - 1] - X[4:n]) / (12 * dt * dt)
    return X[c], d1, d2


def geodesic_curvature_h2(points, dt: float = 1.0, closed: bool = False) -> np.ndarray:
    """Signed geodesic curvature of a uniformly sampled curve on the hyperboloid.

    ``points`` has shape ``(N, 3)`` (or ``(N, 4)``, height ignored).  Five-point
    stencils give X' and X''; the covariant acceleration is the projection of
    X'' to T_X H^2.  Open curves lose two samples at each end.  Positive
    curvature means the curve turns towards ``X x X'`` (counterclockwise about
    the centre of a circle seen from above).
    """
    X = np.asarray(points, dtype=float)[..., :3]
    if len(X) < 5:
        raise GeometryError("need at least 5 samples")
    if dt <= 0:
        raise GeometryError("sample spacing must be positive")
    X, d1, d2 = _stencils(X, dt, closed)
    speed2 = lorentz(d1, d1)
    if np.any(speed2 <= 1e-24):
        raise GeometryError("degenerate sample spacing")
    acc = d2 + lorentz(d2, X)[:, None] * X
    nu = lorentz_cross(X, d1) / np.sqrt(speed2)[:, None]
    return lorentz(acc, nu) / speed2


def polyline_length_h2(points) -> float:
    X = np.asarray(points, dtype=float)[..., :3]
    return float(np.sum(h2_distance(X[:-1], X[1:])))


def hyperbolic_circle(center, radius: float, t) -> np.ndarray:
    """Circle of intrinsic ``radius`` about ``center``, parametrized by angle ``t``."""
    c = np.asarray(center, dtype=float)
    e1 = unit_tangent(c, np.array([0.0, 1.0, 0.3]))
    e2 = lorentz_cross(c, e1)
    t = np.asarray(t, dtype=float)[..., None]
    return np.cosh(radius) * c + np.sinh(radius) * (np.cos(t) * e1 + np.sin(t) * e2)


@dataclass(frozen=True)
class CircleGeometry:
    radius: float
    length: float
    area: float


def circle_geometry(k: float) -> CircleGeometry:
    """Radius, circumference and enclosed area of a circle of geodesic curvature ``k > 1`` in H^2."""
    if not k > 1:
        raise GeometryError(f"circles in H^2 have curvature > 1, got {k!r}")
    R = np.arctanh(1.0 / k)
    return CircleGeometry(float(R), float(2 * np.pi * np.sinh(R)), float(2 * np.pi * (np.cosh(R) - 1.0)))


# --------------------------------------------------------------------------
# vertical planes


@dataclass(frozen=True)
class VerticalPlane:
    """Gamma x R for the geodesic ``Gamma = {x : <x, normal> = 0}`` with ``normal`` spacelike unit."""

    normal: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        q = lorentz(n, n)
        if q <= 1e-14:
            raise GeometryError("vertical plane needs a spacelike normal")
        object.__setattr__(self, "normal", n / np.sqrt(q))

    @classmethod
    def through(cls, p, u) -> "VerticalPlane":
        return cls(lorentz_cross(np.asarray(p, dtype=float)[:3], u))

    def deviation(self, points) -> np.ndarray:
        """Hyperbolic distance from the H^2 parts of ``points`` to the plane."""
        x = np.asarray(points, dtype=float)[..., :3]
        return np.arcsinh(np.abs(lorentz(x, self.normal)))

    def reflect(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).copy()
        p[..., :3] -= 2.0 * lorentz(p[..., :3], self.normal)[..., None] * self.normal
        return p

    def reflection(self) -> H2RIsometry:
        n = self.normal
        return H2RIsometry(np.eye(3) - 2.0 * np.outer(n, LORENTZ @ n), 0.0, 1)

    def ideal_endpoints(self) -> np.ndarray:
        """The two null directions of Gamma, scaled to x0 = 1 (points on the unit circle at infinity)."""
        n = self.normal
        # foot point: the point of Gamma closest to (1, 0, 0)
        o = np.array([1.0, 0.0, 0.0])
        p = o - lorentz(o, n) * n
        p = p / np.sqrt(-lorentz(p, p))
        u = lorentz_cross(n, p)
        ends = np.stack([p + u, p - u])
        return ends / ends[:, :1]

    def coincides(self, other: "VerticalPlane", tol: float = 1e-9) -> bool:
        n, m = self.normal, other.normal
        return bool(min(np.max(np.abs(n - m)), np.max(np.abs(n + m))) < tol)

    def intersects(self, other: "VerticalPlane", tol: float = 1e-12) -> bool:
        """True for crossing or coincident planes; ultraparallel and asymptotic pairs are disjoint."""
        return self.coincides(other) or abs(lorentz(self.normal, other.normal)) < 1.0 - tol


def fit_vertical_plane(points) -> tuple[VerticalPlane, float]:
    """Least-squares vertical plane through the H^2 parts of ``points``; returns (plane, max deviation)."""
    x = np.asarray(points, dtype=float)[..., :3].reshape(-1, 3)
    if len(x) < 2:
        raise GeometryError("need at least two points to fit a plane")
    _, _, vt = np.linalg.svd(x, full_matrices=True)
    m = vt[-1]
    n = LORENTZ @ m
    plane = VerticalPlane(n)
    return plane, float(np.max(plane.deviation(x)))
