"""Discrete area in the Berger metric, its gradient, a fixed-boundary minimizer and mesh diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.spatial import cKDTree

from .core import V_MATRIX, AmbientIsometry, BergerParams, GeometryError, frame_vectors, hopf_project, metric_eval, normalize
from .mesh import INTERIOR, TriMesh

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# area and gradient


def _face_terms(params: BergerParams, V: np.ndarray, T: np.ndarray):
    v0, v1, v2 = V[T[:, 0]], V[T[:, 1]], V[T[:, 2]]
    e1, e2 = v1 - v0, v2 - v0
    q = v0 + v1 + v2
    qn = np.linalg.norm(q, axis=1)
    m = q / qn[:, None]
    u = m @ V_MATRIX.T
    beta = params.eta - 1.0
    s = 4.0 / params.kappa
    s1 = np.einsum("ij,ij->i", e1, u)
    s2 = np.einsum("ij,ij->i", e2, u)
    g11 = s * (np.einsum("ij,ij->i", e1, e1) + beta * s1 * s1)
    g22 = s * (np.einsum("ij,ij->i", e2, e2) + beta * s2 * s2)
    g12 = s * (np.einsum("ij,ij->i", e1, e2) + beta * s1 * s2)
    D = np.maximum(g11 * g22 - g12 * g12, 0.0)
    return dict(e1=e1, e2=e2, m=m, qn=qn, u=u, s1=s1, s2=s2, g11=g11, g22=g22, g12=g12, D=D, beta=beta, s=s)


def face_areas(params: BergerParams, mesh_or_vertices, triangles=None) -> np.ndarray:
    """g-area of each chord triangle with the metric frozen at its (projected) barycenter."""
    V, T = _unpack(mesh_or_vertices, triangles)
    return 0.5 * np.sqrt(_face_terms(params, V, T)["D"])


def discrete_area(params: BergerParams, mesh_or_vertices, triangles=None) -> float:
    return float(np.sum(face_areas(params, mesh_or_vertices, triangles)))


def _unpack(mesh_or_vertices, triangles):
    if isinstance(mesh_or_vertices, TriMesh):
        return mesh_or_vertices.vertices, mesh_or_vertices.triangles
    return np.asarray(mesh_or_vertices, dtype=float), np.asarray(triangles)


def area_gradient(params: BergerParams, mesh_or_vertices, triangles=None) -> np.ndarray:
    """Euclidean gradient (shape (N, 4)) of :func:`discrete_area` with respect to the vertex positions."""
    V, T = _unpack(mesh_or_vertices, triangles)
    f = _face_terms(params, V, T)
    e1, e2, u, m = f["e1"], f["e2"], f["u"], f["m"]
    g11, g22, g12, s1, s2 = (f[k][:, None] for k in ("g11", "g22", "g12", "s1", "s2"))
    s, beta = f["s"], f["beta"]
    Ge1 = s * (e1 + beta * s1 * u)
    Ge2 = s * (e2 + beta * s2 * u)
    dD_e1 = 2.0 * g22 * Ge1 - 2.0 * g12 * Ge2
    dD_e2 = 2.0 * g11 * Ge2 - 2.0 * g12 * Ge1
    dg11_u = s * beta * 2.0 * s1 * e1
    dg22_u = s * beta * 2.0 * s2 * e2
    dg12_u = s * beta * (s2 * e1 + s1 * e2)
    dD_u = g22 * dg11_u + g11 * dg22_u - 2.0 * g12 * dg12_u
    dD_m = dD_u @ V_MATRIX  # u = V m
    dD_q = (dD_m - np.einsum("ij,ij->i", dD_m, m)[:, None] * m) / f["qn"][:, None]
    area = 0.5 * np.sqrt(f["D"])
    scale = np.where(area > 0, 1.0 / (8.0 * np.where(area > 0, area, 1.0)), 0.0)[:, None]
    g0 = scale * (-dD_e1 - dD_e2 + dD_q)
    g1 = scale * (dD_e1 + dD_q)
    g2 = scale * (dD_e2 + dD_q)
    grad = np.zeros_like(V)
    np.add.at(grad, T[:, 0], g0)
    np.add.at(grad, T[:, 1], g1)
    np.add.at(grad, T[:, 2], g2)
    return grad


# --------------------------------------------------------------------------
# normals, masses and the mean curvature residual


def vertex_masses(params: BergerParams, mesh: TriMesh) -> np.ndarray:
    """Mixed Voronoi areas in the g-metric (half and quarter splits on obtuse faces)."""
    f = _face_terms(params, mesh.vertices, mesh.triangles)
    g11, g22, g12 = f["g11"], f["g22"], f["g12"]
    A = 0.5 * np.sqrt(f["D"])
    g33 = g11 + g22 - 2.0 * g12
    dots = np.stack([g12, g11 - g12, g22 - g12], 1)  # unnormalised cosines at the three corners
    cot = dots / np.maximum(2.0 * A, 1e-300)[:, None]
    share = np.stack(
        [
            g11 * cot[:, 2] + g22 * cot[:, 1],
            g11 * cot[:, 2] + g33 * cot[:, 0],
            g22 * cot[:, 1] + g33 * cot[:, 0],
        ],
        1,
    ) / 8.0
    obtuse = dots < 0.0
    bad = obtuse.any(axis=1)
    share[bad] = np.where(obtuse[bad], 0.5, 0.25) * A[bad, None]
    M = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(M, mesh.triangles[:, k], share[:, k])
    return M


def vertex_normals(params: BergerParams, mesh: TriMesh) -> np.ndarray:
    """g-unit normals at the vertices (area-weighted average of face normals in frame coordinates)."""
    V, T = mesh.vertices, mesh.triangles
    E = frame_vectors(params, V)  # (N, 3, 4)
    acc = np.zeros((len(V), 3))
    for k in range(3):
        i, j, l = T[:, k], T[:, (k + 1) % 3], T[:, (k + 2) % 3]
        a = V[j] - V[i]
        b = V[l] - V[i]
        Ei = E[i]
        ca = metric_eval(params, a[:, None, :], Ei, base=V[i][:, None, :])
        cb = metric_eval(params, b[:, None, :], Ei, base=V[i][:, None, :])
        np.add.at(acc, i, np.cross(ca, cb))
    n = np.linalg.norm(acc, axis=1, keepdims=True)
    if np.any(n == 0):
        raise GeometryError("vertex with degenerate star")
    acc /= n
    return np.einsum("nk,nki->ni", acc, E)


def mean_curvature_residual(params: BergerParams, mesh: TriMesh, normals=None) -> np.ndarray:
    """Normal component of the area gradient divided by the vertex mass; zero on the boundary.

    Tangential components of the discrete gradient only reflect the
    distribution of vertices along the surface and are not part of the
    certificate.
    """
    grad = area_gradient(params, mesh)
    n = vertex_normals(params, mesh) if normals is None else normals
    r = np.abs(np.einsum("ij,ij->i", grad, n)) / vertex_masses(params, mesh)
    r[mesh.boundary] = 0.0
    return r


def max_residual(params: BergerParams, mesh: TriMesh) -> float:
    return float(np.max(mean_curvature_residual(params, mesh)))


# --------------------------------------------------------------------------
# minimization


@dataclass
class SolveConfig:
    tol: float = 1e-3
    max_iter: int = 100_000
    stall: float = 1e-12
    stall_count: int = 3
    armijo: float = 1e-4
    mass_shift: float = 1e-8
    max_cg: int = 200
    cg_rtol: float = 1e-3
    damping: float = 1.0
    repair_needles: bool = True
    callback: object = None


@dataclass
class SolveReport:
    iterations: int
    area: float
    residual: float
    converged: bool
    graphical: bool | None = None
    message: str = ""
    history: list = field(default_factory=list, repr=False)

    def to_line(self) -> str:
        g = "null" if self.graphical is None else str(self.graphical).lower()
        return (
            f"iterations={self.iterations} area={self.area:.17g} residual={self.residual:.17g} "
            f"converged={str(self.converged).lower()} graphical={g} message={self.message!r}"
        )


def stiffness_matrix(params: BergerParams, mesh: TriMesh) -> sp.csr_matrix:
    """P1 stiffness matrix in the g-metric, triangles frozen at their barycenters."""
    f = _face_terms(params, mesh.vertices, mesh.triangles)
    g11, g22, g12, D = f["g11"], f["g22"], f["g12"], f["D"]
    area = 0.5 * np.sqrt(D)
    Dsafe = np.where(D > 0, D, 1.0)
    inv = np.stack([np.stack([g22, -g12], -1), np.stack([-g12, g11], -1)], -2) / Dsafe[:, None, None]
    B = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
    K = area[:, None, None] * np.einsum("ai,fab,bj->fij", B, inv, B)
    T = mesh.triangles
    rows = np.repeat(T, 3, axis=1).ravel()
    cols = np.tile(T, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.csr_matrix((K.ravel(), (rows, cols)), shape=(n, n))


def _needle_repair(params: BergerParams, mesh: TriMesh, max_aspect: float = 1e3) -> TriMesh:
    """Flip the longest interior edge of triangles whose aspect ratio exceeds ``max_aspect``."""
    V, T = mesh.vertices, mesh.triangles.copy()
    for _ in range(3):
        f = _face_terms(params, V, T)
        e3 = f["e2"] - f["e1"]
        lens = np.sqrt(np.stack([f["g11"], f["g22"], f["s"] * np.einsum("ij,ij->i", e3, e3)], 1))
        area = 0.5 * np.sqrt(f["D"])
        aspect = lens.max(1) ** 2 / np.maximum(2 * area, 1e-300)
        bad = np.flatnonzero(aspect > max_aspect)
        if len(bad) == 0:
            break
        flipped = False
        edge_map = {}
        for fi, t in enumerate(T):
            for k in range(3):
                edge_map[(t[k], t[(k + 1) % 3])] = fi
        for fi in bad:
            t = T[fi]
            k = int(np.argmax([np.linalg.norm(V[t[(i + 1) % 3]] - V[t[i]]) for i in range(3)]))
            a, b, c = t[k], t[(k + 1) % 3], t[(k + 2) % 3]
            other = edge_map.get((b, a))
            if other is None:  # boundary edge
                continue
            o = T[other]
            d = [x for x in o if x not in (a, b)][0]
            T[fi] = (c, a, d)
            T[other] = (c, d, b)
            flipped = True
            break
        if not flipped:
            break
    out = mesh.copy()
    out.triangles = T
    return out


class _NormalChart:
    """Interior vertices moved along frozen normals: x_i(t) = normalize(x_i + t_i n_i)."""

    def __init__(self, params: BergerParams, mesh: TriMesh, normals: np.ndarray):
        self.params = params
        self.mesh = mesh
        self.interior = np.flatnonzero(~mesh.boundary)
        self.base = mesh.vertices
        self.normals = normals[self.interior]

    def vertices(self, t: np.ndarray) -> np.ndarray:
        V = self.base.copy()
        V[self.interior] = normalize(self.base[self.interior] + t[:, None] * self.normals)
        return V

    def area(self, t: np.ndarray) -> float:
        return discrete_area(self.params, self.vertices(t), self.mesh.triangles)

    def gradient(self, t: np.ndarray) -> np.ndarray:
        raw = self.base[self.interior] + t[:, None] * self.normals
        w = np.linalg.norm(raw, axis=1)
        x = raw / w[:, None]
        G = area_gradient(self.params, self.vertices(t), self.mesh.triangles)[self.interior]
        d = (self.normals - np.einsum("ij,ij->i", x, self.normals)[:, None] * x) / w[:, None]
        return np.einsum("ij,ij->i", G, d)

    def hessian_times(self, v: np.ndarray, g_scale: float = 1e-6) -> np.ndarray:
        h = g_scale / max(float(np.abs(v).max()), 1e-300)
        return (self.gradient(h * v) - self.gradient(-h * v)) / (2.0 * h)


def _newton_direction(chart: _NormalChart, g: np.ndarray, precond, shift: np.ndarray, cfg: SolveConfig) -> np.ndarray:
    """Preconditioned CG on the area Hessian plus ``diag(shift)``, stopped early at negative curvature."""
    x = np.zeros_like(g)
    r = -g
    z = precond(r)
    p = z.copy()
    rz = r @ z
    gnorm = np.linalg.norm(g)
    for k in range(cfg.max_cg):
        Hp = chart.hessian_times(p) + shift * p
        pHp = p @ Hp
        if pHp <= 0.0:
            return z if k == 0 else x
        a = rz / pHp
        x += a * p
        r -= a * Hp
        if np.linalg.norm(r) < cfg.cg_rtol * gnorm:
            break
        z = precond(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x


def minimize_area(params: BergerParams, mesh: TriMesh, config: SolveConfig | None = None) -> tuple[TriMesh, SolveReport]:
    """Fixed-boundary area descent along vertex normals.

    Each iteration freezes the vertex normals, moves interior vertex ``i``
    to ``normalize(x_i + t_i n_i)`` and takes an inexact Newton step in
    ``t``: conjugate gradients on finite-difference Hessian products plus
    a damping multiple of the vertex masses, preconditioned by the metric
    stiffness matrix, followed by Armijo backtracking.  The damping shrinks
    after full steps and grows after backtracking.  Boundary vertices
    never move.
    """
    cfg = config or SolveConfig()
    m = mesh.copy()
    if cfg.repair_needles:
        m = _needle_repair(params, m)
    interior = np.flatnonzero(~m.boundary)
    area = discrete_area(params, m)
    history = []
    res = 0.0
    it = 0
    flat = 0
    mu = cfg.damping
    message = "iteration cap reached"
    while True:
        if len(interior) == 0:
            res = 0.0
            history.append((it, area, res))
            break
        chart = _NormalChart(params, m, vertex_normals(params, m))
        mass = vertex_masses(params, m)[interior]
        g = chart.gradient(np.zeros(len(interior)))
        res = float(np.max(np.abs(g) / mass))
        history.append((it, area, res))
        if cfg.callback is not None:
            cfg.callback(it, area, res)
        if res < cfg.tol or it >= cfg.max_iter or flat >= cfg.stall_count:
            if flat >= cfg.stall_count and res >= cfg.tol:
                message = "stalled"
            break
        shift = (mu + cfg.mass_shift) * mass
        K = stiffness_matrix(params, m)[interior][:, interior] + sp.diags(shift)
        precond = spla.splu(K.tocsc()).solve
        it += 1
        accepted = False
        for d in (_newton_direction(chart, g, precond, mu * mass, cfg), precond(-g)):
            slope = float(g @ d)
            if slope >= 0.0:
                continue
            s = 1.0
            while s > 1e-12:
                new_area = chart.area(s * d)
                if new_area <= area + cfg.armijo * s * slope:
                    accepted = True
                    break
                s *= 0.5
            if accepted:
                break
        if not accepted:
            message = "line search failed"
            break
        # Levenberg-Marquardt style damping: trust full steps, damp after backtracking
        mu = mu * 0.25 if s == 1.0 else max(4.0 * mu, 1.0)
        if mu < 1e-6:
            mu = 0.0
        change = (area - new_area) / max(area, 1e-300)
        flat = flat + 1 if change < cfg.stall else 0
        m.vertices = chart.vertices(s * d)
        area = new_area
    converged = res < cfg.tol
    if converged:
        message = "residual below tolerance"
    log.info("minimize_area: %s after %d iterations, residual %.3e", message, it, res)
    return m, SolveReport(it, area, res, converged, None, message, history)


# --------------------------------------------------------------------------
# reflection


def relax_lattice(
    params: BergerParams,
    mesh: TriMesh,
    spacing: tuple[float, float] = (1.0, 1.0),
    sweeps: int = 100,
    step: float = 0.5,
) -> TriMesh:
    """Tangential smoothing of a lattice mesh towards a harmonic parametrization.

    Each sweep moves every interior vertex towards the weighted mean of its
    four lattice neighbours (weights 1 / spacing^2), keeping only the part
    of the move tangent to the surface.  Boundary vertices stay put.  The
    shape changes at second order, so a normal-only solve should follow.
    """
    if mesh.grid_shape is None:
        raise GeometryError("lattice smoothing needs a mesh generated from a lattice")
    nx, ny = mesh.grid_shape
    wx, wy = 1.0 / spacing[0] ** 2, 1.0 / spacing[1] ** 2
    inner = (~mesh.boundary).reshape(nx, ny)
    inner[:, 0] = inner[:, -1] = False
    if not mesh.periodic_x:
        inner[0] = inner[-1] = False
    out = mesh.copy()
    for _ in range(sweeps):
        G = out.grid()
        n = out.grid(vertex_normals(params, out))
        if mesh.periodic_x:
            left, right = np.roll(G, 1, axis=0), np.roll(G, -1, axis=0)
        else:
            left = np.concatenate([G[:1], G[:-1]])
            right = np.concatenate([G[1:], G[-1:]])
        down = np.concatenate([G[:, :1], G[:, :-1]], axis=1)
        up = np.concatenate([G[:, 1:], G[:, -1:]], axis=1)
        d = (wx * (left + right) + wy * (down + up)) / (2 * (wx + wy)) - G
        d -= np.sum(d * G, axis=-1, keepdims=True) * G
        d -= (metric_eval(params, d, n, base=G) / metric_eval(params, n, n, base=G))[..., None] * n
        G = np.where(inner[..., None], normalize(G + step * d), G)
        out.vertices = G.reshape(-1, 4)
    return out


def extend_by_reflection(
    mesh: TriMesh,
    iso: AmbientIsometry,
    glue: int | set[int],
    relabel: dict[int, int] | None = None,
    tol: float = 1e-10,
) -> TriMesh:
    """Weld ``mesh`` to its image under ``iso`` along the boundary curves ``glue``.

    Every boundary vertex fixed by ``iso`` is welded to its image.  Curves
    of the copy are renamed through ``relabel``.  The copy's triangles are
    reversed so the orientation of the welded mesh is consistent.
    """
    glue = {glue} if isinstance(glue, int) else set(glue)
    relabel = relabel or {}
    V = mesh.vertices
    W = iso(V)
    on_glue = np.isin(mesh.curve_id, list(glue))
    if not np.any(on_glue):
        raise GeometryError(f"mesh has no boundary curve in {sorted(glue)}")
    moved = np.linalg.norm(W - V, axis=1)
    if np.max(moved[on_glue]) > tol:
        raise GeometryError(f"isometry moves the glue curve by {np.max(moved[on_glue]):.3e}")
    fixed = mesh.boundary & (moved <= tol)
    n = mesh.n_vertices
    remap = np.empty(n, dtype=np.int64)
    remap[fixed] = np.flatnonzero(fixed)
    free = np.flatnonzero(~fixed)
    remap[free] = n + np.arange(len(free))
    verts = np.concatenate([V, W[free]])
    tris = np.concatenate([mesh.triangles, remap[mesh.triangles][:, ::-1]])
    cid_copy = np.array([relabel.get(int(c), int(c)) if c != INTERIOR else INTERIOR for c in mesh.curve_id[free]], dtype=np.int64)
    cid = np.concatenate([mesh.curve_id, cid_copy])
    par = np.concatenate([mesh.curve_param, mesh.curve_param[free]])
    out = TriMesh(verts, tris, cid, par, mesh.topology, {}, None)
    # recompute boundary from the welded topology
    bverts = np.unique(out.topological_boundary_edges())
    is_b = np.zeros(len(verts), dtype=bool)
    is_b[bverts] = True
    out.curve_id[~is_b] = INTERIOR
    # welded corners that stay on the boundary inherit a neighbouring non-glue curve
    bedges = out.topological_boundary_edges()
    for vtx in np.flatnonzero(is_b & np.isin(out.curve_id, list(glue))):
        nbrs = np.concatenate([bedges[bedges[:, 0] == vtx, 1], bedges[bedges[:, 1] == vtx, 0]])
        ids = [int(out.curve_id[k]) for k in nbrs if out.curve_id[k] not in glue and out.curve_id[k] != INTERIOR]
        if ids:
            out.curve_id[vtx] = ids[0]
    carriers = {k: v for k, v in mesh.carriers.items() if k not in glue}
    for old, new in relabel.items():
        if old in mesh.carriers and old not in glue:
            carriers[new] = iso(mesh.carriers[old])
    for k in np.unique(out.curve_id):
        if k != INTERIOR and k not in carriers and k in mesh.carriers:
            carriers[int(k)] = mesh.carriers[k]
    out.carriers = {k: v for k, v in carriers.items() if np.any(out.curve_id == k)}
    return out


def unfold_polygon_lattice(
    points: np.ndarray,
    rho2: AmbientIsometry,
    rho3: AmbientIsometry,
    rho4: AmbientIsometry,
    tol: float = 1e-8,
) -> np.ndarray:
    """One period of the annulus spanned by a polygon disk lattice, as a lattice.

    ``points`` is ``(nu, nv, 4)`` with column 0 on the gamma2 circle, the
    last column on gamma4, row 0 on gamma1 and the last row on gamma3.
    The half-turn about gamma3 doubles the rows, then the half-turns about
    gamma2 and gamma4 unfold four quarters along the first lattice axis.
    The result has shape ``(4 (nu - 1) + 1, 2 (nv - 1) + 1, 4)``; its first
    and last columns coincide and rows 0 and -1 lie on h1 and h2.
    """
    P = np.asarray(points, dtype=float)
    nu, nv = P.shape[:2]
    for iso, line, what in ((rho3, P[:, -1], "gamma3"), (rho2, P[0], "gamma2"), (rho4, P[-1], "gamma4")):
        err = float(np.max(np.linalg.norm(iso(line) - line, axis=-1)))
        if err > tol:
            raise GeometryError(f"half-turn about {what} moves its lattice side by {err:.3e}")
    strip = np.concatenate([P, rho3(P[:, -2::-1])], axis=1)
    half = np.concatenate([rho2(strip[:0:-1]), strip], axis=0)
    full = np.concatenate([half, rho4(half[-2::-1])], axis=0)
    gap = float(np.max(np.linalg.norm(full[0] - full[-1], axis=-1)))
    if gap > tol:
        raise GeometryError(f"unfolded lattice does not close up (gap {gap:.3e})")
    return full


def boundary_loops(mesh: TriMesh) -> list[np.ndarray]:
    """Boundary edges chained into closed vertex loops."""
    e = mesh.topological_boundary_edges()
    adj: dict[int, list[int]] = {}
    for a, b in e:
        adj.setdefault(int(a), []).append(int(b))
        adj.setdefault(int(b), []).append(int(a))
    if any(len(v) != 2 for v in adj.values()):
        raise GeometryError("boundary is not a disjoint union of simple loops")
    seen = set()
    loops = []
    for start in adj:
        if start in seen:
            continue
        loop = [start]
        seen.add(start)
        prev, cur = start, adj[start][0]
        while cur != start:
            loop.append(cur)
            seen.add(cur)
            nxt = adj[cur][0] if adj[cur][0] != prev else adj[cur][1]
            prev, cur = cur, nxt
        loops.append(np.array(loop))
    return loops


# --------------------------------------------------------------------------
# graphicality and self-intersection


def projected_orientations(params: BergerParams, mesh: TriMesh) -> np.ndarray:
    """Signed triple products of the Hopf images of each face (zero for collapsed faces)."""
    P = hopf_project(params, mesh.vertices) * np.sqrt(params.kappa)
    a, b, c = P[mesh.triangles[:, 0]], P[mesh.triangles[:, 1]], P[mesh.triangles[:, 2]]
    return np.einsum("ij,ij->i", a, np.cross(b, c))


def is_vertical_graph(params: BergerParams, mesh: TriMesh, rel_tol: float = 1e-9) -> bool:
    """Hopf projection preserves face orientation (all non-collapsed faces turn the same way).

    Faces that collapse because two of their vertices lie on one vertical
    boundary fibre are ignored.
    """
    o = projected_orientations(params, mesh)
    scale = np.max(np.abs(o))
    big = np.abs(o) > rel_tol * scale
    small = ~big
    if np.any(small):
        P = hopf_project(params, mesh.vertices)
        T = mesh.triangles[small]
        d = np.min(
            np.stack(
                [np.linalg.norm(P[T[:, i]] - P[T[:, (i + 1) % 3]], axis=1) for i in range(3)], 1
            ),
            axis=1,
        )
        if np.any(d > 1e-9):
            return False
    return bool(np.all(o[big] > 0) or np.all(o[big] < 0))


@dataclass
class IntersectionReport:
    pairs: np.ndarray  # (k, 2) face indices

    @property
    def none(self) -> bool:
        return len(self.pairs) == 0

    def __len__(self) -> int:
        return len(self.pairs)


def _tangent_basis(m: np.ndarray) -> np.ndarray:
    """Orthonormal bases (k, 3, 4) of the orthogonal complements of the unit vectors ``m``.

    Rows 1..3 of the Householder reflection swapping ``m`` and a signed
    ``e0``.
    """
    w = m.copy()
    w[:, 0] += np.where(m[:, 0] >= 0, 1.0, -1.0)
    H = np.eye(4)[None] - 2.0 * w[:, :, None] * w[:, None, :] / np.einsum("ki,ki->k", w, w)[:, None, None]
    return H[:, 1:4, :]


def _segment_hits(P0, P1, A, B, C, eps=1e-12):
    """Möller-Trumbore: segment P0P1 crosses triangle ABC (vectorized, strict interior)."""
    d = P1 - P0
    e1, e2 = B - A, C - A
    h = np.cross(d, e2)
    a = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(a) > eps
    f = np.where(ok, 1.0 / np.where(ok, a, 1.0), 0.0)
    s = P0 - A
    u = f * np.einsum("ij,ij->i", s, h)
    q = np.cross(s, e1)
    v = f * np.einsum("ij,ij->i", d, q)
    t = f * np.einsum("ij,ij->i", e2, q)
    return ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t >= 0) & (t <= 1)


def _candidate_pairs(tri: np.ndarray, T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Non-adjacent face pairs whose bounding spheres overlap.

    Each face queries a ball of twice its own radius, so every overlapping
    pair is found from its larger face without a global search radius.
    """
    cent = tri.mean(axis=1)
    rad = np.max(np.linalg.norm(tri - cent[:, None, :], axis=2), axis=1)
    tree = cKDTree(cent)
    hoods = tree.query_ball_point(cent, 2.0 * rad + 1e-12)
    counts = np.fromiter((len(h) for h in hoods), dtype=np.int64, count=len(hoods))
    if counts.sum() == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    i = np.repeat(np.arange(len(hoods)), counts)
    j = np.concatenate([np.asarray(h, dtype=np.int64) for h in hoods])
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    keep = lo < hi
    pairs = np.unique(np.stack([lo[keep], hi[keep]], 1), axis=0)
    if len(pairs) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    near = np.linalg.norm(cent[i] - cent[j], axis=1) <= rad[i] + rad[j] + 1e-12
    i, j = i[near], j[near]
    share = np.zeros(len(i), dtype=bool)
    for a in range(3):
        for b in range(3):
            share |= T[i, a] == T[j, b]
    return i[~share], j[~share]


def _crossing(X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    hit = np.zeros(len(X1), dtype=bool)
    for a in range(3):
        b = (a + 1) % 3
        hit |= _segment_hits(X1[:, a], X1[:, b], X2[:, 0], X2[:, 1], X2[:, 2])
        hit |= _segment_hits(X2[:, a], X2[:, b], X1[:, 0], X1[:, 1], X1[:, 2])
    return hit


def _report(hits: list) -> IntersectionReport:
    return IntersectionReport(np.concatenate(hits) if hits else np.zeros((0, 2), dtype=np.int64))


def self_intersection_test(mesh: TriMesh, batch: int = 200_000) -> IntersectionReport:
    """Pairs of non-adjacent faces whose chord triangles meet after radial projection.

    Candidate pairs come from a k-d tree over face bounding spheres.  Each
    pair is mapped by central projection onto the tangent space of S^3 at
    the normalized midpoint of the pair, where flat triangles stay flat and
    the classical edge-triangle crossing test decides the pair.
    """
    V, T = mesh.vertices, mesh.triangles
    tri = V[T]
    cent = tri.mean(axis=1)
    i, j = _candidate_pairs(tri, T)
    hits = []
    for lo in range(0, len(i), batch):
        ii, jj = i[lo : lo + batch], j[lo : lo + batch]
        mid = cent[ii] + cent[jj]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        Bs = _tangent_basis(mid)

        def proj(X):
            dots = np.einsum("kvi,ki->kv", X, mid)
            Y = X / dots[..., None]
            return np.einsum("kvi,kci->kvc", Y, Bs)

        hit = _crossing(proj(tri[ii]), proj(tri[jj]))
        hits.append(np.stack([ii[hit], jj[hit]], 1))
    return _report(hits)


def flat_self_intersections(vertices, triangles, batch: int = 200_000) -> IntersectionReport:
    """Self-intersection test for a triangle mesh in R^3."""
    V = np.asarray(vertices, dtype=float)
    T = np.asarray(triangles, dtype=np.int64)
    if V.shape[-1] != 3:
        raise GeometryError(f"expected points in R^3, got shape {V.shape}")
    tri = V[T]
    i, j = _candidate_pairs(tri, T)
    hits = []
    for lo in range(0, len(i), batch):
        ii, jj = i[lo : lo + batch], j[lo : lo + batch]
        hit = _crossing(tri[ii], tri[jj])
        hits.append(np.stack([ii[hit], jj[hit]], 1))
    return _report(hits)
