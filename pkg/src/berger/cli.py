"""Command-line front end.

Exit codes: 0 success, 1 failed verification, 2 bad configuration,
3 solver did not converge.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")

log = logging.getLogger("berger")


class ConfigError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(";", ",").split(",") if t.strip()]


def _str_list(text: str) -> list[str]:
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _sign(text) -> int:
    v = int(text)
    if v not in (1, -1):
        raise ValueError("must be +1 or -1")
    return v


# key -> (parser, default); a default of None means "not set"
KEYS: dict[str, tuple] = {
    "geometry.kappa": (float, None),
    "geometry.tau": (float, None),
    "surface.H": (float, 1.0),
    "surface.c": (float, 1.0),
    "surface.kind": (str, "fc"),
    "surface.ell": (float, None),
    "surface.phi": (float, 3.141592653589793),
    "surface.sign": (_sign, 1),
    "surface.n": (float, 1.0),
    "polygon.lambda": (float, None),
    "polygon.samples": (int, 64),
    "mesh.nx": (int, None),
    "mesh.ny": (int, None),
    "mesh.projection": (str, "stereographic"),
    "solver.tol": (float, 1e-3),
    "solver.max_iter": (int, 100_000),
    "solver.seed": (str, "ruled"),
    "solver.seed_mesh": (str, None),
    "solver.alpha": (float, None),
    "sister.source": (str, "fc"),
    "sister.rotation_sign": (_sign, -1),
    "sister.threshold": (float, 1e-2),
    "sister.embedding": (int, 1),
    "tables.H": (_float_list, [1.0]),
    "tables.c": (_float_list, [0.0, 0.25, 0.5, 0.75, 1.0]),
    "sweep.alpha": (_float_list, None),
    "sweep.delta": (float, 0.05),
    "sweep.relax_rounds": (int, 3),
    "sweep.relax_sweeps": (int, 100),
    "verify.only": (_str_list, None),
    "output.out": (str, None),
}

FLAGS = {
    "kappa": "geometry.kappa",
    "tau": "geometry.tau",
    "H": "surface.H",
    "c": "surface.c",
    "surface": "surface.kind",
    "ell": "surface.ell",
    "lambda_": "polygon.lambda",
    "alpha": "solver.alpha",
    "alphas": "sweep.alpha",
    "nx": "mesh.nx",
    "ny": "mesh.ny",
    "tol": "solver.tol",
    "seed": "solver.seed",
    "seed_mesh": "solver.seed_mesh",
    "source": "sister.source",
    "rotation_sign": "sister.rotation_sign",
    "only": "verify.only",
    "out": "output.out",
}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]


def read_config_file(path) -> dict:
    """Flat ``section.key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def _parse_value(key: str, raw):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    parser, _ = KEYS[key]
    if raw is None:
        return None
    try:
        v = parser(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc
    if isinstance(v, float) and v != v:
        raise ConfigError(f"bad value for {key}: NaN")
    return v


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {k: d for k, (_, d) in KEYS.items()}
    if args.config:
        for k, raw in read_config_file(args.config).items():
            values[k] = _parse_value(k, raw)
    flags = dict(FLAGS)
    if args.command == "tables":
        flags.update(H="tables.H", c="tables.c")
    for flag, key in flags.items():
        raw = getattr(args, flag, None)
        if raw is not None:
            values[key] = _parse_value(key, raw)
    for key in ("mesh.nx", "mesh.ny", "polygon.samples", "solver.max_iter"):
        if values[key] is not None and values[key] < 2:
            raise ConfigError(f"{key} must be at least 2")
    if not values["solver.tol"] > 0:
        raise ConfigError("solver.tol must be positive")
    return RunConfig(args.command, values)


def apply_thread_cap(env=os.environ) -> int | None:
    """Read ``BERGER_THREADS`` and forward it to the BLAS/OpenMP thread variables."""
    raw = env.get("BERGER_THREADS")
    if raw is None or raw == "":
        return None
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"BERGER_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"BERGER_THREADS must be a positive integer, got {raw!r}")
    for var in THREAD_VARS:
        env[var] = str(n)
    return n


# --------------------------------------------------------------------------
# shared helpers


def fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (int, str)):
        return str(x)
    return format(float(x), ".17g")


def emit(stream, **pairs):
    stream.write(" ".join(f"{k}={fmt(v)}" for k, v in pairs.items()) + "\n")


def _ambient(cfg: RunConfig, default=None):
    """Berger parameters from --kappa/--tau, else from H."""
    from .core import BergerParams

    k, t = cfg["geometry.kappa"], cfg["geometry.tau"]
    if (k is None) != (t is None):
        raise ConfigError("--kappa and --tau must be given together")
    if k is not None:
        return BergerParams(k, t)
    if default is not None:
        return default
    return BergerParams.from_mean_curvature(cfg["surface.H"])


def _sister_ambient(cfg: RunConfig):
    """Surfaces tied to H live in S^3(4H^2 - 1, H); explicit --kappa/--tau must agree."""
    from .core import BergerParams

    P = BergerParams.from_mean_curvature(cfg["surface.H"])
    k, t = cfg["geometry.kappa"], cfg["geometry.tau"]
    if k is not None or t is not None:
        if k is None or t is None or abs(k - P.kappa) > 1e-12 or abs(t - P.tau) > 1e-12:
            raise ConfigError(f"H={cfg['surface.H']} needs kappa={P.kappa} and tau={P.tau}")
    return P


def _lambda(cfg: RunConfig, P) -> float:
    import numpy as np

    lam = cfg["polygon.lambda"]
    return float(np.pi / (4 * np.sqrt(P.kappa))) if lam is None else lam


def _resolution(cfg: RunConfig, nx: int, ny: int) -> tuple[int, int]:
    return cfg["mesh.nx"] or nx, cfg["mesh.ny"] or ny


def _require_out(cfg: RunConfig, suffixes) -> Path:
    out = cfg["output.out"]
    if out is None:
        raise ConfigError(f"--out is required ({' or '.join(suffixes)})")
    path = Path(out)
    if path.suffix not in suffixes:
        raise ConfigError(f"--out must end in {' or '.join(suffixes)}, got {out!r}")
    return path


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_helicoid(cfg: RunConfig, out) -> int:
    from .core import BergerParams
    from .io import write_mesh_obj, write_s3mesh
    from .mesh import fc_mesh, helicoid_mesh, umbrella_mesh
    from .plateau import max_residual
    from .surfaces import FcSpec, HelicoidSpec, half_period

    import numpy as np

    path = _require_out(cfg, (".s3mesh", ".obj"))
    kind = cfg["surface.kind"]
    nx, ny = _resolution(cfg, 128, 64)
    if kind == "helicoid":
        P = _ambient(cfg, BergerParams(4.0, 1.0))
        ell = cfg["surface.ell"] if cfg["surface.ell"] is not None else 2 * abs(P.tau) * np.pi / P.kappa
        mesh = helicoid_mesh(HelicoidSpec(P, ell, cfg["surface.phi"], cfg["surface.sign"]), nx, ny)
    elif kind == "umbrella":
        P = _ambient(cfg, BergerParams(4.0, 1.0))
        mesh = umbrella_mesh(P, nx, ny)
    elif kind == "fc":
        P = _sister_ambient(cfg)
        spec = FcSpec(cfg["surface.H"], cfg["surface.c"])
        alpha = cfg["solver.alpha"] if cfg["solver.alpha"] is not None else float(half_period(spec.H, spec.c))
        mesh = fc_mesh(spec, alpha, nx, ny)
    elif kind == "fn":
        # f^n is the round helicoid of pitch n/2 with y doubled
        P = BergerParams(4.0, 1.0)
        mesh = helicoid_mesh(HelicoidSpec(P, cfg["surface.n"] / 2, np.pi, -1), nx, ny)
    else:
        raise ConfigError(f"unknown surface {kind!r} (helicoid, umbrella, fc, fn)")
    if path.suffix == ".obj":
        write_mesh_obj(path, mesh, cfg["mesh.projection"], P)
    else:
        write_s3mesh(path, mesh)
    emit(out, surface=kind, kappa=P.kappa, tau=P.tau, vertices=mesh.n_vertices, faces=len(mesh.triangles),
         residual=max_residual(P, mesh), out=str(path))
    return EXIT_OK


def cmd_polygon(cfg: RunConfig, out) -> int:
    import numpy as np

    from .core import left_matrix
    from .geodesics import build_polygon, reflection_across_gamma3, vertical_geodesic
    from .io import write_csv

    P = _ambient(cfg)
    lam = _lambda(cfg, P)
    poly = build_polygon(P, lam)
    rho = reflection_across_gamma3(P, lam)
    n = cfg["polygon.samples"]
    t = np.linspace(0.0, P.horizontal_length, n)
    s = np.linspace(*poly.domains["gamma3"], n)
    chain = poly.chain(n)
    gap = max(float(np.linalg.norm(a[-1] - b[0])) for (_, _, a), (_, _, b) in zip(chain, chain[1:] + chain[:1]))
    rho_dev = float(np.max(np.abs(rho(poly.h1(t)) - poly.h2(t))))
    g3_dev = float(np.max(np.abs(vertical_geodesic(P, [1.0, 0, 0, 0], s) @ left_matrix(poly.gamma2(lam)).T - poly.gamma3(s))))
    if cfg["output.out"] is not None:
        path = _require_out(cfg, (".csv",))
        rows = [[name, float(ti), *map(float, p)] for name, ts, seg in chain for ti, p in zip(ts, seg)]
        write_csv(path, ["side", "t", "x0", "x1", "x2", "x3"], rows)
    emit(out, kappa=P.kappa, tau=P.tau, **{"lambda": lam}, closure_gap=gap, rho_deviation=rho_dev,
         gamma3_deviation=g3_dev, rho_accepted=True)
    return EXIT_OK


def _polygon_seed(cfg, P, nx, ny):
    from .geodesics import build_polygon
    from .mesh import coons_disk, cone_disk, ruled_disk

    poly = build_polygon(P, _lambda(cfg, P))
    seed = cfg["solver.seed"]
    if seed == "ruled":
        return ruled_disk(poly, nx, ny)
    if seed == "coons":
        return coons_disk(poly, nx, ny)
    if seed == "cone":
        return cone_disk(poly, nx, ny)
    raise ConfigError(f"unknown seed {seed!r} (ruled, coons, cone, fc)")


def cmd_solve(cfg: RunConfig, out) -> int:
    from .io import read_s3mesh, write_s3mesh
    from .mesh import fc_mesh
    from .plateau import SolveConfig, minimize_area
    from .surfaces import FcSpec, alpha0

    path = _require_out(cfg, (".s3mesh",))
    nx, ny = _resolution(cfg, 17, 17)
    if cfg["solver.seed_mesh"] is not None:
        P = _ambient(cfg)
        try:
            mesh = read_s3mesh(cfg["solver.seed_mesh"])
        except OSError as exc:
            raise ConfigError(f"cannot read seed mesh: {exc}") from exc
    elif cfg["solver.seed"] == "fc":
        P = _sister_ambient(cfg)
        spec = FcSpec(cfg["surface.H"], cfg["surface.c"])
        alpha = cfg["solver.alpha"] if cfg["solver.alpha"] is not None else float(alpha0(spec.H, spec.c))
        nx, ny = _resolution(cfg, 64, 32)
        mesh = fc_mesh(spec, alpha, nx, ny)
    else:
        P = _ambient(cfg)
        mesh = _polygon_seed(cfg, P, nx, ny)
    result, rep = minimize_area(P, mesh, SolveConfig(tol=cfg["solver.tol"], max_iter=cfg["solver.max_iter"]))
    write_s3mesh(path, result)
    out.write(rep.to_line() + "\n")
    return EXIT_OK if rep.converged else EXIT_SOLVER


def _write_sister(cfg, sister):
    from .io import write_h2rmesh, write_sister_csv

    if cfg["output.out"] is None:
        return
    path = _require_out(cfg, (".csv", ".h2rmesh"))
    (write_h2rmesh if path.suffix == ".h2rmesh" else write_sister_csv)(path, sister.points)


def _diagnostics_line(out, dg, **extra):
    emit(
        out,
        **extra,
        axis=dg.axis,
        slope=dg.slope,
        branch=dg.branch.replace(" ", "_"),
        h1=dg.h1.case,
        h2_holds=dg.h2_holds,
        mirror_deviation=max(m.plane_deviation for m in dg.mirrors),
        intersections=len(dg.intersections.pairs),
        path_residual=dg.path_residual,
    )


def polygon_sister(P, lam: float, n: int, tol: float, threshold: float, rotation_sign: int):
    """Disk solve over the polygon, sister of the quarter and its unfolding to one period."""
    import numpy as np

    from .daniel import reconstruct_sister, sister_data, surface_data, unfold_quarter
    from .geodesics import build_polygon
    from .mesh import ruled_disk
    from .plateau import SolveConfig, minimize_area

    disk, rep = minimize_area(P, ruled_disk(build_polygon(P, lam), n, n), SolveConfig(tol=tol))
    us = np.linspace(0.0, 1.0, n)
    quarter = reconstruct_sister(
        sister_data(P.tau, surface_data(P, disk.grid(), us, us), rotation_sign), (0, 0), threshold=threshold
    )
    return unfold_quarter(quarter), rep


def cmd_sister(cfg: RunConfig, out) -> int:
    import numpy as np

    from .daniel import hypotheses_and_axis, sister_pipeline
    from .surfaces import FcSpec, fc_point, half_period

    P = _sister_ambient(cfg)
    source = cfg["sister.source"]
    sign = cfg["sister.rotation_sign"]
    embed = bool(cfg["sister.embedding"])
    if source == "fc":
        spec = FcSpec(cfg["surface.H"], cfg["surface.c"])
        nx, ny = _resolution(cfg, 64, 33)
        xs = np.arange(nx) * P.horizontal_length / nx
        ys = np.linspace(0.0, float(half_period(spec.H, spec.c)), ny)
        sister = sister_pipeline(P, lambda x, y: fc_point(spec, x, y), xs, ys, spec.H, periodic_x=True,
                                 seed_node=(nx // 4, 0), rotation_sign=sign, threshold=cfg["sister.threshold"])
        dg = hypotheses_and_axis(sister, check_embedding=embed)
        _write_sister(cfg, sister)
        _diagnostics_line(out, dg, source=source, H=spec.H, c=spec.c)
        return EXIT_OK
    if source == "polygon":
        n = cfg["mesh.nx"] or 17
        lam = _lambda(cfg, P)
        sister, rep = polygon_sister(P, lam, n, min(cfg["solver.tol"], 1e-6), cfg["sister.threshold"], sign)
        dg = hypotheses_and_axis(sister, check_embedding=embed)
        _write_sister(cfg, sister)
        _diagnostics_line(out, dg, source=source, H=P.tau, **{"lambda": lam}, solver_residual=rep.residual)
        return EXIT_OK if rep.converged else EXIT_SOLVER
    raise ConfigError(f"unknown sister source {source!r} (fc, polygon)")


TABLE_HEADER = ["H", "c", "k_neck", "T_half", "Tcal", "alpha0"]


def tables_rows(Hs, cs) -> list[list[float]]:
    from .surfaces import FcSpec, alpha0, boundary_angle, half_period, neck_curvature

    rows = []
    for H in Hs:
        for c in cs:
            FcSpec(float(H), float(c))  # range check
            rows.append([float(H), float(c), float(neck_curvature(H, c)), float(half_period(H, c)),
                         float(boundary_angle(H, c)), float(alpha0(H, c))])
    return rows


def _write_table(cfg, header, rows, out):
    from .io import fmt as ffmt
    from .io import write_csv

    if cfg["output.out"] is not None:
        write_csv(_require_out(cfg, (".csv",)), header, rows)
    else:
        out.write(",".join(header) + "\n")
        for r in rows:
            out.write(",".join(ffmt(v) if isinstance(v, float) else str(v) for v in r) + "\n")


def cmd_tables(cfg: RunConfig, out) -> int:
    _write_table(cfg, TABLE_HEADER, tables_rows(cfg["tables.H"], cfg["tables.c"]), out)
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out) -> int:
    from .verify import CHECKS, run_checks

    names = cfg["verify.only"]
    if names:
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(unknown)}")
    checks = run_checks(names)
    for c in checks:
        out.write(c.line() + "\n")
    failed = sum(not c.passed for c in checks)
    out.write(f"checks={len(checks)} failed={failed}\n")
    return EXIT_VERIFY if failed else EXIT_OK


SWEEP_HEADER = ["alpha", "slope", "axis", "converged", "solver_residual", "path_residual", "vertical_defect"]


def sweep_row(spec, alpha: float, nx: int, ny: int, tol: float, rounds: int, sweeps: int, rotation_sign: int):
    """Solve the annulus between f^c(., 0) and f^c(., alpha), then measure the sister's axis slope."""
    import numpy as np

    from .daniel import classify_slope, fit_period, reconstruct_sister, sister_data, surface_data
    from .mesh import fc_mesh
    from .plateau import SolveConfig, minimize_area, relax_lattice

    P = spec.params
    solver = SolveConfig(tol=tol)
    mesh, rep = minimize_area(P, fc_mesh(spec, alpha, nx, ny), solver)
    xs = np.arange(nx) * P.horizontal_length / nx
    ys = np.linspace(0.0, alpha, ny)
    for _ in range(rounds):
        mesh = relax_lattice(P, mesh, (xs[1] - xs[0], ys[1] - ys[0]), sweeps=sweeps)
        mesh, rep = minimize_area(P, mesh, solver)
    sd = sister_data(spec.H, surface_data(P, mesh.grid(), xs, ys, periodic_x=True), rotation_sign)
    sister = reconstruct_sister(sd, (0, 0), threshold=np.inf)
    slope = fit_period(sister).slope

    return [float(alpha), float(slope), classify_slope(slope), str(rep.converged).lower(), float(rep.residual),
            float(sister.path_residual), sister.vertical_defect()]


def cmd_sweep(cfg: RunConfig, out) -> int:
    from .surfaces import FcSpec, alpha0, alpha_domain

    _sister_ambient(cfg)
    spec = FcSpec(cfg["surface.H"], cfg["surface.c"])
    a0 = float(alpha0(spec.H, spec.c))
    d = cfg["sweep.delta"]
    alphas = cfg["sweep.alpha"] or [a0 - d, a0, a0 + d]
    lo, hi = alpha_domain(spec.H, spec.c)
    for a in alphas:
        if not lo < a < hi:
            raise ConfigError(f"alpha {a} outside ({lo}, {hi})")
    nx, ny = _resolution(cfg, 64, 32)
    rows = [sweep_row(spec, a, nx, ny, min(cfg["solver.tol"], 1e-6), cfg["sweep.relax_rounds"],
                      cfg["sweep.relax_sweeps"], cfg["sister.rotation_sign"]) for a in alphas]
    _write_table(cfg, SWEEP_HEADER, rows, out)
    return EXIT_OK


COMMANDS = {
    "gen-helicoid": cmd_gen_helicoid,
    "polygon": cmd_polygon,
    "solve": cmd_solve,
    "sister": cmd_sister,
    "tables": cmd_tables,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    s = argparse.SUPPRESS
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--kappa", default=s)
    common.add_argument("--tau", default=s)
    common.add_argument("--H", default=s)
    common.add_argument("--c", default=s)
    common.add_argument("--lambda", dest="lambda_", default=s)
    common.add_argument("--alpha", default=s, help="second boundary parameter of an f^c annulus")
    common.add_argument("--alphas", default=s, help="comma-separated sweep values")
    common.add_argument("--nx", default=s)
    common.add_argument("--ny", default=s)
    common.add_argument("--tol", default=s)
    common.add_argument("--seed", default=s, help="ruled, coons, cone or fc")
    common.add_argument("--seed-mesh", dest="seed_mesh", default=s)
    common.add_argument("--surface", default=s, help="helicoid, umbrella, fc or fn")
    common.add_argument("--ell", default=s)
    common.add_argument("--source", default=s, help="fc or polygon")
    common.add_argument("--rotation-sign", dest="rotation_sign", default=s)
    common.add_argument("--only", default=s, help="comma-separated check names")
    common.add_argument("--out", default=s)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="berger", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = make_parser().parse_args(argv)
        apply_thread_cap()
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
        cfg = build_config(args)
        from .core import GeometryError

        try:
            return COMMANDS[cfg.command](cfg, out)
        except GeometryError as exc:
            raise ConfigError(str(exc)) from exc
    except ConfigError as exc:
        sys.stderr.write(f"berger: error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
