import io

import numpy as np
import pytest

from berger.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, apply_thread_cap, main
from berger.io import read_csv, read_h2rmesh, read_s3mesh


def run(*argv):
    buf = io.StringIO()
    code = main(list(argv), buf)
    return code, buf.getvalue()


def pairs(line):
    return dict(tok.split("=", 1) for tok in line.split())


def test_tables_row_for_h1_c1():
    code, text = run("tables", "--H", "1", "--c", "0,1")
    assert code == EXIT_OK
    lines = text.splitlines()
    assert lines[0] == "H,c,k_neck,T_half,Tcal,alpha0"
    H, c, k, T, _, a0 = (float(v) for v in lines[2].split(","))
    assert (H, c) == (1.0, 1.0)
    assert abs(k - 2) < 1e-15
    assert abs(T - np.pi / np.sqrt(3)) < 1e-15
    assert abs(a0 - 2 * np.pi / 3) < 1e-15


def test_tables_csv_is_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        assert run("tables", "--H", "0.75,1,2", "--out", str(tmp_path / name))[0] == EXIT_OK
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# grid\ntables.H=2\ntables.c=0.5\n")
    _, text = run("tables", "--config", str(cfg))
    assert text.splitlines()[1].startswith("2,0.5,")
    _, text = run("tables", "--config", str(cfg), "--H", "1")
    assert text.splitlines()[1].startswith("1,0.5,")


@pytest.mark.parametrize(
    "content",
    ["solver.tol=abc\n", "nosuch.key=1\n", "no equals sign\n", "solver.tol=-1\n", "mesh.nx=1\n", "sister.rotation_sign=2\n"],
)
def test_bad_config_exits_2(tmp_path, content):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(content)
    assert run("tables", "--config", str(cfg))[0] == EXIT_CONFIG


def test_bad_arguments_exit_2(tmp_path):
    assert run("tables", "--H", "0.4")[0] == EXIT_CONFIG
    assert run("nosuch")[0] == EXIT_CONFIG
    assert run("tables", "--bogus", "1")[0] == EXIT_CONFIG
    assert run("tables", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_CONFIG
    assert run("gen-helicoid", "--surface", "torus", "--out", str(tmp_path / "x.s3mesh"))[0] == EXIT_CONFIG
    assert run("gen-helicoid", "--out", str(tmp_path / "x.txt"))[0] == EXIT_CONFIG
    assert run("sister", "--H", "1", "--kappa", "4", "--tau", "1")[0] == EXIT_CONFIG
    assert run("polygon", "--kappa", "3")[0] == EXIT_CONFIG
    assert run("verify", "--only", "no.such.check")[0] == EXIT_CONFIG


def test_thread_cap():
    env = {"BERGER_THREADS": "2"}
    assert apply_thread_cap(env) == 2 and env["OMP_NUM_THREADS"] == "2"
    assert apply_thread_cap({}) is None
    from berger.cli import ConfigError

    with pytest.raises(ConfigError):
        apply_thread_cap({"BERGER_THREADS": "0"})


def test_verify_exits_0_and_names_every_check():
    from berger.verify import CHECKS

    code, text = run("verify")
    assert code == EXIT_OK, text
    for name in CHECKS:
        assert f"PASS {name} " in text
    assert text.splitlines()[-1] == f"checks={len(CHECKS)} failed=0"


def test_verify_selection():
    code, text = run("verify", "--only", "core.eta_identity,surfaces.gauss_bonnet")
    assert code == EXIT_OK and "checks=2 failed=0" in text


def test_polygon_report(tmp_path):
    code, text = run("polygon", "--H", "1", "--out", str(tmp_path / "p.csv"))
    assert code == EXIT_OK
    d = pairs(text)
    assert float(d["rho_deviation"]) < 1e-10 and float(d["gamma3_deviation"]) < 1e-10
    header, rows = read_csv(tmp_path / "p.csv")
    assert header[:2] == ["side", "t"] and {r[0] for r in rows} == {"gamma1", "gamma2", "gamma3", "gamma4"}


@pytest.mark.parametrize("surface", ["helicoid", "umbrella", "fc", "fn"])
def test_gen_helicoid_writes_a_mesh(tmp_path, surface):
    out = tmp_path / "m.s3mesh"
    code, text = run("gen-helicoid", "--surface", surface, "--nx", "24", "--ny", "8", "--out", str(out))
    assert code == EXIT_OK
    m = read_s3mesh(out)
    assert m.n_vertices == int(pairs(text)["vertices"])
    assert np.allclose(np.linalg.norm(m.vertices, axis=1), 1, atol=1e-14)


def test_solve_then_resolve_from_file(tmp_path):
    disk = tmp_path / "disk.s3mesh"
    code, text = run("solve", "--H", "1", "--nx", "9", "--ny", "9", "--tol", "1e-6", "--out", str(disk))
    assert code == EXIT_OK and "converged=true" in text
    code, text = run("solve", "--H", "1", "--seed-mesh", str(disk), "--tol", "1e-6", "--out", str(tmp_path / "again.s3mesh"))
    assert code == EXIT_OK and "iterations=0" in text


def test_solve_reports_non_convergence(tmp_path):
    cfg = tmp_path / "cap.cfg"
    cfg.write_text("solver.max_iter=2\n")
    code, text = run("solve", "--config", str(cfg), "--H", "1", "--nx", "9", "--ny", "9", "--tol", "1e-12",
                     "--out", str(tmp_path / "d.s3mesh"))
    assert code == EXIT_SOLVER and "converged=false" in text


def test_sister_fc_has_a_vertical_axis(tmp_path):
    out = tmp_path / "s.h2rmesh"
    code, text = run("sister", "--H", "1", "--c", "0.5", "--nx", "32", "--ny", "17", "--out", str(out))
    assert code == EXIT_OK
    d = pairs(text)
    assert d["axis"] == "vertical" and d["intersections"] == "0"
    P, _ = read_h2rmesh(out)
    # the periodic lattice carries the closing column
    assert P.shape == (33, 17, 4)


def test_sister_csv_is_byte_identical(tmp_path):
    for name in ("a.csv", "b.csv"):
        run("sister", "--H", "1", "--c", "1", "--nx", "16", "--ny", "9", "--out", str(tmp_path / name))
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


@pytest.mark.slow
def test_sweep_emits_a_slope_column(tmp_path):
    out = tmp_path / "sweep.csv"
    code, _ = run("sweep", "--H", "1", "--c", "1", "--out", str(out))
    assert code == EXIT_OK
    header, rows = read_csv(out)
    assert header[:3] == ["alpha", "slope", "axis"]
    alphas = [float(r[0]) for r in rows]
    assert np.allclose(alphas, 2 * np.pi / 3 + np.array([-0.05, 0, 0.05]), atol=1e-15)
    slope = float(rows[1][1])
    assert abs(slope - np.pi / 2) < 0.05 and rows[1][2] == "horizontal"


def test_sweep_rejects_alpha_outside_the_domain():
    assert run("sweep", "--H", "1", "--c", "1", "--alphas", "5")[0] == EXIT_CONFIG
