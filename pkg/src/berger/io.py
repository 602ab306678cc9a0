"""Plain-text exchange formats: ``.s3mesh``, ``.h2rmesh``, CSV and view-only OBJ.

Every float is written with 17 significant digits so that equal data give
byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import BergerParams, GeometryError, hopf_project
from .mesh import TriMesh, grid_triangles

FLOAT_FMT = ".17g"


def fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def _row(values) -> str:
    return " ".join(v if isinstance(v, str) else fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in values)


# --------------------------------------------------------------------------
# .s3mesh


def write_s3mesh(path, mesh: TriMesh) -> Path:
    """Header with counts, then ``v`` vertex, ``f`` face and ``b`` boundary lines.

    Optional ``grid``, ``topology`` and ``carrier`` lines keep the lattice
    shape and the great circles the boundary curves lie on.
    """
    path = Path(path)
    b = np.flatnonzero(mesh.boundary)
    lines = [f"s3mesh {mesh.n_vertices} {len(mesh.triangles)} {len(b)}", f"topology {mesh.topology}"]
    if mesh.grid_shape is not None:
        lines.append(f"grid {mesh.grid_shape[0]} {mesh.grid_shape[1]} {int(mesh.periodic_x)}")
    for cid in sorted(mesh.carriers):
        lines.append("carrier " + _row([int(cid), *np.asarray(mesh.carriers[cid], dtype=float).ravel().tolist()]))
    lines += ["v " + " ".join(fmt(x) for x in v) for v in mesh.vertices]
    lines += [f"f {i} {j} {k}" for i, j, k in mesh.triangles]
    lines += [f"b {i} {mesh.curve_id[i]} {fmt(mesh.curve_param[i])}" for i in b]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_s3mesh(path) -> TriMesh:
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0][0] != "s3mesh" or len(lines[0]) != 4:
        raise GeometryError(f"{path}: not an s3mesh file")
    nv, nf, nb = (int(t) for t in lines[0][1:])
    verts, faces, bnd, carriers = [], [], [], {}
    topology, grid, periodic = "disk", None, False
    for tok in lines[1:]:
        tag = tok[0]
        if tag == "v":
            verts.append([float(t) for t in tok[1:5]])
        elif tag == "f":
            faces.append([int(t) for t in tok[1:4]])
        elif tag == "b":
            bnd.append((int(tok[1]), int(tok[2]), float(tok[3])))
        elif tag == "topology":
            topology = tok[1]
        elif tag == "grid":
            grid, periodic = (int(tok[1]), int(tok[2])), bool(int(tok[3]))
        elif tag == "carrier":
            carriers[int(tok[1])] = np.array([float(t) for t in tok[2:]]).reshape(2, 4)
        else:
            raise GeometryError(f"{path}: unknown line tag {tag!r}")
    if (len(verts), len(faces), len(bnd)) != (nv, nf, nb):
        raise GeometryError(f"{path}: counts do not match the header")
    cid = np.full(nv, -1, dtype=np.int64)
    par = np.zeros(nv)
    for i, c, t in bnd:
        cid[i], par[i] = c, t
    return TriMesh(
        np.array(verts).reshape(nv, 4),
        np.array(faces, dtype=np.int64).reshape(nf, 3),
        cid,
        par,
        topology,
        carriers,
        grid,
        periodic,
    )


# --------------------------------------------------------------------------
# .h2rmesh


def write_h2rmesh(path, points) -> Path:
    """Lattice ``(nx, ny, 4)`` of H^2 x R points ``(x0, x1, x2, height)`` with its triangles."""
    path = Path(path)
    P = np.asarray(points, dtype=float)
    nx, ny = P.shape[:2]
    T = grid_triangles(nx, ny, False)
    lines = [f"h2rmesh {nx * ny} {len(T)}", f"grid {nx} {ny}"]
    lines += ["v " + " ".join(fmt(x) for x in v) for v in P.reshape(-1, 4)]
    lines += [f"f {i} {j} {k}" for i, j, k in T]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_h2rmesh(path) -> tuple[np.ndarray, np.ndarray]:
    """Returns the ``(nx, ny, 4)`` lattice and the triangles."""
    lines = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines or lines[0][0] != "h2rmesh":
        raise GeometryError(f"{path}: not an h2rmesh file")
    nv, nf = int(lines[0][1]), int(lines[0][2])
    grid = None
    verts, faces = [], []
    for tok in lines[1:]:
        if tok[0] == "grid":
            grid = (int(tok[1]), int(tok[2]))
        elif tok[0] == "v":
            verts.append([float(t) for t in tok[1:5]])
        elif tok[0] == "f":
            faces.append([int(t) for t in tok[1:4]])
        else:
            raise GeometryError(f"{path}: unknown line tag {tok[0]!r}")
    if grid is None or (len(verts), len(faces)) != (nv, nf) or grid[0] * grid[1] != nv:
        raise GeometryError(f"{path}: counts do not match the header")
    return np.array(verts).reshape(grid + (4,)), np.array(faces, dtype=np.int64).reshape(nf, 3)


# --------------------------------------------------------------------------
# CSV


def write_csv(path, header, rows) -> Path:
    """Rows of numbers or strings; floats get 17 significant digits."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_sister_csv(path, points) -> Path:
    """Columns (i, j, x0, x1, x2, height) for a lattice of H^2 x R points."""
    P = np.asarray(points, dtype=float)
    nx, ny = P.shape[:2]
    rows = ([i, j, *map(float, P[i, j])] for i in range(nx) for j in range(ny))
    return write_csv(path, ["i", "j", "x0", "x1", "x2", "height"], rows)


def write_curve_csv(path, t, points, columns=("a", "b", "c", "d")) -> Path:
    """Polyline with a parameter column followed by one column per coordinate."""
    P = np.asarray(points, dtype=float)
    return write_csv(path, ["t", *columns], ([float(s), *map(float, p)] for s, p in zip(np.asarray(t, dtype=float), P)))


# --------------------------------------------------------------------------
# OBJ (viewing only)


def stereographic(points, pole=(-1.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """Stereographic projection of S^3 from ``pole`` onto the orthogonal 3-space."""
    p = np.asarray(points, dtype=float)
    q = np.asarray(pole, dtype=float)
    # orthonormal basis of the complement of the pole, rows 1..3
    basis = np.linalg.svd(q[None, :])[2][1:]
    if q[0] < 0 and np.allclose(np.abs(q), [1, 0, 0, 0]):
        basis = np.eye(4)[1:]
    return (p @ basis.T) / (1.0 - p @ q)[..., None]


def far_pole(points) -> np.ndarray:
    """A pole among the coordinate points and their negatives that is farthest from ``points``."""
    P = np.asarray(points, dtype=float).reshape(-1, 4)
    cands = np.concatenate([-np.eye(4), np.eye(4)])
    closest = np.max(P @ cands.T, axis=0)
    return cands[int(np.argmin(closest))]


def write_obj(path, vertices3, triangles) -> Path:
    path = Path(path)
    V = np.asarray(vertices3, dtype=float)
    lines = ["v " + " ".join(fmt(x) for x in v) for v in V]
    lines += [f"f {i + 1} {j + 1} {k + 1}" for i, j, k in np.asarray(triangles)]
    path.write_text("\n".join(lines) + "\n")
    return path


def write_mesh_obj(path, mesh: TriMesh, projection: str = "stereographic", params: BergerParams | None = None) -> Path:
    """OBJ of the stereographic image, or of the Hopf image (needs ``params``)."""
    if projection == "stereographic":
        V = stereographic(mesh.vertices, far_pole(mesh.vertices))
    elif projection == "hopf":
        if params is None:
            raise GeometryError("the Hopf image needs the Berger parameters")
        V = hopf_project(params, mesh.vertices)
    else:
        raise GeometryError(f"unknown projection {projection!r}")
    return write_obj(path, V, mesh.triangles)
