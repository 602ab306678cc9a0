"""Triangle meshes on S^3 and the seeds used by the Plateau solver."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import BergerParams, GeometryError, normalize
from .geodesics import GeodesicPolygon
from .surfaces import FcSpec, HelicoidSpec, fc_point, helicoid_point

INTERIOR = -1
ON_CURVE_TOL = 1e-8


@dataclass
class TriMesh:
    """Vertices on S^3, consistently oriented triangles and boundary bookkeeping.

    ``curve_id[i]`` is ``-1`` for interior vertices.  Each boundary curve lies
    on a great circle whose orthonormal 2-frame is stored in ``carriers``;
    ``curve_param`` is the parameter the vertex had when it was generated.
    ``grid_shape`` is set for meshes generated from a parameter lattice
    (vertex ``(i, j)`` has index ``i * ny + j``).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    curve_id: np.ndarray
    curve_param: np.ndarray
    topology: str = "disk"
    carriers: dict[int, np.ndarray] = field(default_factory=dict)
    grid_shape: tuple[int, int] | None = None
    periodic_x: bool = False

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float)
        self.triangles = np.asarray(self.triangles, dtype=np.int64)
        self.curve_id = np.asarray(self.curve_id, dtype=np.int64)
        self.curve_param = np.asarray(self.curve_param, dtype=float)

    @property
    def boundary(self) -> np.ndarray:
        return self.curve_id != INTERIOR

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def copy(self) -> "TriMesh":
        return replace(
            self,
            vertices=self.vertices.copy(),
            triangles=self.triangles.copy(),
            curve_id=self.curve_id.copy(),
            curve_param=self.curve_param.copy(),
            carriers={k: v.copy() for k, v in self.carriers.items()},
        )

    def with_vertices(self, vertices) -> "TriMesh":
        m = self.copy()
        m.vertices = np.asarray(vertices, dtype=float)
        return m

    def grid(self, values=None) -> np.ndarray:
        """Reshape per-vertex data to the parameter lattice."""
        if self.grid_shape is None:
            raise GeometryError("mesh was not generated from a lattice")
        v = self.vertices if values is None else np.asarray(values)
        return v.reshape(self.grid_shape + v.shape[1:])

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    def topological_boundary_edges(self) -> np.ndarray:
        t = self.triangles
        e = np.sort(np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
        uniq, counts = np.unique(e, axis=0, return_counts=True)
        return uniq[counts == 1]

    def validate(self, tol: float = ON_CURVE_TOL) -> None:
        v = self.vertices
        if np.any(np.abs(np.linalg.norm(v, axis=1) - 1.0) > 1e-9):
            raise GeometryError("mesh vertices must be unit vectors")
        if self.triangles.min() < 0 or self.triangles.max() >= len(v):
            raise GeometryError("triangle index out of range")
        if not is_consistently_oriented(self.triangles):
            raise GeometryError("triangles are not consistently oriented")
        bset = set(np.unique(self.topological_boundary_edges()).tolist())
        flagged = set(np.flatnonzero(self.boundary).tolist())
        if not bset <= flagged:
            raise GeometryError("boundary vertices without a curve id")
        for cid, basis in self.carriers.items():
            idx = np.flatnonzero(self.curve_id == cid)
            p = v[idx]
            off = p - (p @ basis.T) @ basis
            if len(idx) and np.max(np.linalg.norm(off, axis=1)) > tol:
                raise GeometryError(f"boundary curve {cid} is off its carrier circle")

    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges()) + len(self.triangles)


def is_consistently_oriented(triangles) -> bool:
    """Every interior edge is traversed once in each direction."""
    t = np.asarray(triangles)
    d = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    uniq, counts = np.unique(d, axis=0, return_counts=True)
    if np.any(counts > 1):
        return False
    return True


def great_circle_basis(p, q) -> np.ndarray:
    """Orthonormal basis of the 2-plane spanned by ``p`` and ``q``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    q = q - (q @ p) * p
    return np.stack([p, q / np.linalg.norm(q)])


def grid_triangles(nx: int, ny: int, periodic_x: bool) -> np.ndarray:
    """Two triangles per lattice cell, consistently oriented; vertex (i, j) -> i * ny + j."""
    ii = np.arange(nx if periodic_x else nx - 1)
    jj = np.arange(ny - 1)
    I, J = np.meshgrid(ii, jj, indexing="ij")
    I, J = I.ravel(), J.ravel()
    I1 = (I + 1) % nx
    a = I * ny + J
    b = I1 * ny + J
    c = I1 * ny + J + 1
    d = I * ny + J + 1
    return np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])


def lattice_mesh(points, periodic_x: bool, topology: str) -> TriMesh:
    points = np.asarray(points, dtype=float)
    nx, ny = points.shape[:2]
    n = nx * ny
    return TriMesh(
        points.reshape(n, 4),
        grid_triangles(nx, ny, periodic_x),
        np.full(n, INTERIOR),
        np.zeros(n),
        topology=topology,
        grid_shape=(nx, ny),
        periodic_x=periodic_x,
    )


def _mark_rows(mesh: TriMesh, xs, ys, bottom: int, top: int, curve):
    nx, ny = mesh.grid_shape
    ids = mesh.curve_id.reshape(nx, ny)
    par = mesh.curve_param.reshape(nx, ny)
    ids[:, 0], par[:, 0] = bottom, xs
    ids[:, -1], par[:, -1] = top, xs
    mesh.carriers[bottom] = great_circle_basis(curve(0.0, ys[0]), curve(np.pi / 2, ys[0]))
    mesh.carriers[top] = great_circle_basis(curve(0.0, ys[-1]), curve(np.pi / 2, ys[-1]))


def helicoid_mesh(spec: HelicoidSpec, nx: int, ny: int) -> TriMesh:
    """Annulus lattice: ``nx`` points around x in [0, 4 pi / sqrt(kappa)), ``ny`` rows over y in [0, 1]."""
    if spec.ell == 0.0:
        raise GeometryError("use umbrella_mesh for the umbrella")
    L = spec.params.horizontal_length
    xs = np.arange(nx) * L / nx
    ys = np.linspace(0.0, 1.0, ny)
    pts = helicoid_point(spec, xs[:, None], ys[None, :])
    mesh = lattice_mesh(pts, True, "annulus")
    rk = np.sqrt(spec.params.kappa)
    _mark_rows(mesh, xs, ys, 0, 1, lambda a, y: helicoid_point(spec, 2 * a / rk, y))
    return mesh


def fc_mesh(spec: FcSpec, alpha: float, nx: int, ny: int, params: BergerParams | None = None) -> TriMesh:
    """Annulus lattice of f^c over [0, 4 pi / sqrt(kappa)) x [0, alpha]."""
    P = params or spec.params
    xs = np.arange(nx) * P.horizontal_length / nx
    if spec.c == 0.0:
        xs = xs + 0.5 * P.horizontal_length / nx  # keep off the degenerate meridians
    ys = np.linspace(0.0, alpha, ny)
    pts = fc_point(spec, xs[:, None], ys[None, :], P)
    mesh = lattice_mesh(pts, True, "annulus")
    rk = np.sqrt(P.kappa)
    _mark_rows(mesh, xs, ys, 0, 1, lambda a, y: fc_point(spec, 2 * a / rk + 0.1, y, P))
    return mesh


def umbrella_mesh(params: BergerParams, n_angle: int, n_radial: int, radius: float | None = None) -> TriMesh:
    """Polar mesh of the horizontal umbrella bounded by the horizontal geodesic {z = 0}.

    The umbrella is the hemisphere ``(cos a, 0, sin a cos t, sin a sin t)``
    with ``a`` in ``[0, pi/2]``; ``radius`` (default pi / sqrt(kappa), the
    full umbrella) truncates it at ``a = sqrt(kappa) radius / 2``.
    """
    rk = np.sqrt(params.kappa)
    R = np.pi / rk if radius is None else radius
    a = rk / 2.0 * R * np.arange(1, n_radial + 1) / n_radial
    t = 2 * np.pi * np.arange(n_angle) / n_angle
    A, T = np.meshgrid(a, t, indexing="ij")
    ring = np.stack([np.cos(A), 0 * A, np.sin(A) * np.cos(T), np.sin(A) * np.sin(T)], axis=-1)
    verts = np.concatenate([[[1.0, 0.0, 0.0, 0.0]], ring.reshape(-1, 4)])
    tris = []
    idx = lambda r, k: 1 + r * n_angle + (k % n_angle)
    for k in range(n_angle):
        tris.append((0, idx(0, k), idx(0, k + 1)))
    for r in range(n_radial - 1):
        for k in range(n_angle):
            a0, a1, b0, b1 = idx(r, k), idx(r, k + 1), idx(r + 1, k), idx(r + 1, k + 1)
            tris.append((a0, b0, b1))
            tris.append((a0, b1, a1))
    n = len(verts)
    cid = np.full(n, INTERIOR)
    par = np.zeros(n)
    last = np.arange(1 + (n_radial - 1) * n_angle, n)
    cid[last] = 0
    par[last] = t
    carriers = {0: great_circle_basis(verts[last[0]], verts[last[n_angle // 4]])}
    return TriMesh(verts, np.array(tris), cid, par, "disk", carriers)


def _polygon_lattice(poly: GeodesicPolygon, P: np.ndarray, u, v) -> TriMesh:
    """Label the border of a lattice spanning the polygon (bottom gamma1, left gamma2, top gamma3, right gamma4)."""
    d = poly.domains
    lerp = lambda name, s: d[name][0] + s * (d[name][1] - d[name][0])
    nu, nv = len(u), len(v)
    mesh = lattice_mesh(P, False, "disk")
    ids = mesh.curve_id.reshape(nu, nv)
    par = mesh.curve_param.reshape(nu, nv)
    ids[0, :], par[0, :] = 2, lerp("gamma2", v)
    ids[-1, :], par[-1, :] = 4, lerp("gamma4", v)
    ids[:, -1], par[:, -1] = 3, lerp("gamma3", u)
    ids[:, 0], par[:, 0] = 1, lerp("gamma1", u)
    ids[-1, -1], par[-1, -1] = 4, d["gamma4"][1]
    ids[0, -1], par[0, -1] = 2, d["gamma2"][1]
    rk = np.sqrt(poly.params.kappa)
    mesh.carriers = {
        1: great_circle_basis(poly.gamma1(0.0), poly.gamma1(np.pi / rk)),
        2: great_circle_basis(poly.gamma2(0.0), poly.gamma2(np.pi / rk)),
        3: great_circle_basis(poly.gamma3(0.0), poly.gamma3(d["gamma3"][1])),
        4: great_circle_basis(poly.gamma4(0.0), poly.gamma4(np.pi / rk)),
    }
    return mesh


def _polygon_sides(poly: GeodesicPolygon, u, v):
    d = poly.domains
    lerp = lambda name, s: d[name][0] + s * (d[name][1] - d[name][0])
    return (
        poly.gamma1(lerp("gamma1", u)),
        poly.gamma3(lerp("gamma3", u)),
        poly.gamma2(lerp("gamma2", v)),
        poly.gamma4(lerp("gamma4", v)),
    )


def ruled_disk(poly: GeodesicPolygon, nu: int, nv: int) -> TriMesh:
    """Disk ruled by great-circle arcs from gamma1(u) to gamma3(u).

    The first and last rulings are the sides gamma2 and gamma4, so the
    border is the polygon itself.  Points along a ruling are equally
    spaced in arc length.  Curve ids are 1..4 for the great circles
    carrying gamma1..gamma4; corners take the id of the horizontal side
    through them.
    """
    u = np.linspace(0.0, 1.0, nu)
    v = np.linspace(0.0, 1.0, nv)
    bottom, top, left, right = _polygon_sides(poly, u, v)
    cosw = np.clip(np.einsum("ij,ij->i", bottom, top), -1.0, 1.0)
    w = np.arccos(cosw)[:, None, None]
    V = v[None, :, None]
    sw = np.sin(w)
    P = (np.sin((1 - V) * w) * bottom[:, None, :] + np.sin(V * w) * top[:, None, :]) / sw
    P[:, 0], P[:, -1], P[0, :], P[-1, :] = bottom, top, left, right
    return _polygon_lattice(poly, normalize(P), u, v)


def coons_disk(poly: GeodesicPolygon, nu: int, nv: int) -> TriMesh:
    """Bilinearly blended (Coons) patch spanning the polygon, projected to S^3.

    Sides and curve ids as in :func:`ruled_disk`.
    """
    u = np.linspace(0.0, 1.0, nu)
    v = np.linspace(0.0, 1.0, nv)
    bottom, top, left, right = _polygon_sides(poly, u, v)
    U = u[:, None, None]
    Vv = v[None, :, None]
    P = (
        (1 - Vv) * bottom[:, None, :]
        + Vv * top[:, None, :]
        + (1 - U) * left[None, :, :]
        + U * right[None, :, :]
        - (1 - U) * (1 - Vv) * bottom[0]
        - U * (1 - Vv) * bottom[-1]
        - (1 - U) * Vv * top[0]
        - U * Vv * top[-1]
    )
    P = normalize(P)
    # exact boundary samples
    P[:, 0], P[:, -1], P[0, :], P[-1, :] = bottom, top, left, right
    return _polygon_lattice(poly, P, u, v)


def cone_disk(poly: GeodesicPolygon, n_boundary: dict[str, int] | int, n_rings: int) -> TriMesh:
    """Cone over the polygon from the lift of its Hopf-sector centroid (chordal interpolation)."""
    chain = poly.chain(n_boundary)
    ids = {"gamma1": 1, "gamma2": 2, "gamma3": 3, "gamma4": 4}
    pts, cid, par = [], [], []
    for name, t, seg in chain:
        pts.append(seg[:-1])
        cid += [ids[name]] * (len(seg) - 1)
        par += list(t[:-1])
    b = np.concatenate(pts)
    K = len(b)
    centre = normalize(b.mean(axis=0))
    rings = [normalize((1 - s) * centre + s * b) for s in np.arange(1, n_rings + 1) / n_rings]
    verts = np.concatenate([[centre]] + rings)
    idx = lambda r, k: 1 + r * K + (k % K)
    tris = [(0, idx(0, k), idx(0, k + 1)) for k in range(K)]
    for r in range(n_rings - 1):
        for k in range(K):
            a0, a1, b0, b1 = idx(r, k), idx(r, k + 1), idx(r + 1, k), idx(r + 1, k + 1)
            tris += [(a0, b0, b1), (a0, b1, a1)]
    n = len(verts)
    c = np.full(n, INTERIOR)
    p = np.zeros(n)
    c[1 + (n_rings - 1) * K :] = cid
    p[1 + (n_rings - 1) * K :] = par
    tris = np.array(tris)
    mesh = TriMesh(verts, tris, c, p, "disk")
    ref = coons_disk(poly, 3, 3)
    mesh.carriers = ref.carriers
    return mesh


def sphere_mesh(n_angle: int, n_radial: int) -> TriMesh:
    """Closed polar mesh of the great 2-sphere {b = 0} without boundary (two umbrellas glued)."""
    P = BergerParams(4.0, 1.0)
    top = umbrella_mesh(P, n_angle, n_radial)
    v = top.vertices
    ring = np.flatnonzero(top.curve_id == 0)
    inner = np.flatnonzero(top.curve_id != 0)
    mirror = v[inner] * np.array([-1.0, 1.0, 1.0, 1.0])
    remap = np.empty(len(v), dtype=np.int64)
    remap[ring] = ring
    remap[inner] = len(v) + np.arange(len(inner))
    tris = np.concatenate([top.triangles, remap[top.triangles][:, ::-1]])
    verts = np.concatenate([v, mirror])
    n = len(verts)
    return TriMesh(verts, tris, np.full(n, INTERIOR), np.zeros(n), "sphere")
