import numpy as np
import pytest

from springfem.cli import main
from springfem.elasticity import (
    ElasticityTensor,
    isotropic_tensor,
    material_from_poisson,
    random_full_symmetric_tensor,
    write_tensor,
)
from springfem.mesh import generate_mesh, mesh_text, parse_mesh, write_mesh
from springfem.reporting import SPRINGS_CSV_COLUMNS, SWEEP_CSV_COLUMNS


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


class TestAnalyze:
    def test_stdout(self, capsys):
        assert main(["analyze", "--gen", "equilateral:3", "--nu", "0.2"]) == 0
        out = capsys.readouterr().out
        lines = out.strip().split("\n")
        assert lines[0] == SPRINGS_CSV_COLUMNS
        mesh = generate_mesh("equilateral:3")
        from springfem.mesh import spring_adjacency

        assert len(lines) == 1 + len(spring_adjacency(mesh))

    def test_to_file(self, workdir):
        assert main(["analyze", "--gen", "equilateral:2", "--nu", "0.1", "--out", "a.csv"]) == 0
        assert (workdir / "a.csv").read_text().startswith(SPRINGS_CSV_COLUMNS)

    def test_mesh_file_input(self, workdir, capsys):
        write_mesh(generate_mesh("patch_square"), workdir / "m.mesh")
        assert main(["analyze", "--mesh", str(workdir / "m.mesh"), "--nu", "0.2"]) == 0
        assert capsys.readouterr().out.startswith(SPRINGS_CSV_COLUMNS)

    def test_lambda_route(self, capsys):
        # lambda = mu = 1 is the ratio-1/4 material
        assert main(["analyze", "--gen", "patch_equilateral", "--lambda", "1", "--mu", "1"]) == 0
        out_lam = capsys.readouterr().out
        assert main(["analyze", "--gen", "patch_equilateral", "--nu", "0.25"]) == 0
        assert capsys.readouterr().out == out_lam

    def test_jitter_deterministic(self, capsys):
        args = ["analyze", "--gen", "square_right:3", "--jitter", "0.1", "--seed", "7", "--nu", "0.2"]
        assert main(args) == 0
        first = capsys.readouterr().out
        assert main(args) == 0
        assert capsys.readouterr().out == first
        assert main(["analyze", "--gen", "square_right:3", "--jitter", "0.1", "--seed", "8", "--nu", "0.2"]) == 0
        assert capsys.readouterr().out != first

    def test_usage_errors(self, capsys):
        assert main(["analyze", "--gen", "equilateral:2"]) == 1  # no material
        assert main(["analyze", "--gen", "equilateral:2", "--nu", "0.1", "--lambda", "1"]) == 1
        assert main(["analyze", "--nu", "0.2"]) == 1  # no mesh
        assert (
            main(["analyze", "--gen", "equilateral:2", "--mesh", "x", "--nu", "0.2"]) == 1
        )
        err = capsys.readouterr().err
        assert "usage error" in err

    def test_input_errors(self, workdir, capsys):
        assert main(["analyze", "--mesh", "missing.mesh", "--nu", "0.2"]) == 2
        assert main(["analyze", "--gen", "equilateral:3", "--nu", "0.7"]) == 2
        assert main(["analyze", "--gen", "nope:3", "--nu", "0.2"]) == 2
        (workdir / "bad.mesh").write_text("springmesh 1\ndim 2\nnodes oops\n")
        assert main(["analyze", "--mesh", str(workdir / "bad.mesh"), "--nu", "0.2"]) == 2
        assert "input error" in capsys.readouterr().err


class TestSweep:
    def test_default_paths_and_grid(self, workdir, capsys):
        assert main(["sweep", "--gen", "equilateral:3"]) == 0
        text = (workdir / "sweep.csv").read_text()
        lines = text.strip().split("\n")
        assert lines[0] == SWEEP_CSV_COLUMNS
        assert len(lines) == 1 + 145  # full default ratio grid
        png = (workdir / "sweep.png").read_bytes()
        assert png[:4] == b"\x89PNG"

    def test_custom_range(self, workdir):
        assert (
            main(
                ["sweep", "--gen", "equilateral:3", "--nu-min", "0.2", "--nu-max", "0.3",
                 "--nu-step", "0.05", "--out", "s.csv", "--no-fig"]
            )
            == 0
        )
        lines = (workdir / "s.csv").read_text().strip().split("\n")
        got = [float(ln.split(",")[1]) for ln in lines[1:]]
        assert got == pytest.approx([0.2, 0.25, 0.3], abs=1e-12)
        assert not (workdir / "s.png").exists()

    def test_figure_follows_csv_name(self, workdir):
        assert main(["sweep", "--gen", "equilateral:2", "--nu-min", "0.1", "--nu-max", "0.2",
                     "--nu-step", "0.1", "--out", "run.csv"]) == 0
        assert (workdir / "run.png").exists()

    def test_explicit_figure_path(self, workdir):
        assert main(["sweep", "--gen", "equilateral:2", "--nu-min", "0.1", "--nu-max", "0.1",
                     "--nu-step", "0.1", "--out", "a.csv", "--fig", "b.png"]) == 0
        assert (workdir / "b.png").exists()
        assert not (workdir / "a.png").exists()

    def test_stdout_csv_defaults_figure_name(self, workdir, capsys):
        assert main(["sweep", "--gen", "equilateral:2", "--nu-min", "0.1", "--nu-max", "0.1",
                     "--nu-step", "0.1", "--out", "-"]) == 0
        assert capsys.readouterr().out.startswith(SWEEP_CSV_COLUMNS)
        assert (workdir / "sweep.png").exists()

    def test_multiple_meshes_and_jitter_labels(self, workdir):
        write_mesh(generate_mesh("square_right:3"), workdir / "sq3.mesh")
        assert (
            main(
                ["sweep", "--gen", "equilateral:3", "--mesh", str(workdir / "sq3.mesh"),
                 "--jitter", "0.05", "--seed", "3", "--nu-min", "0.2", "--nu-max", "0.2",
                 "--nu-step", "0.1", "--out", "m.csv", "--no-fig"]
            )
            == 0
        )
        labels = [ln.split(",")[0] for ln in (workdir / "m.csv").read_text().strip().split("\n")[1:]]
        assert labels == ["equilateral:3+jitter", "sq3.mesh+jitter"]

    def test_count_all_column(self, workdir):
        base = ["sweep", "--gen", "equilateral:3", "--nu-min", "0.2", "--nu-max", "0.2",
                "--nu-step", "0.1", "--no-fig"]
        assert main(base + ["--out", "int.csv"]) == 0
        assert main(base + ["--out", "all.csv", "--count-all"]) == 0
        counted_int = int((workdir / "int.csv").read_text().strip().split("\n")[1].split(",")[2])
        counted_all = int((workdir / "all.csv").read_text().strip().split("\n")[1].split(",")[2])
        assert counted_all > counted_int

    def test_plane_stress_flag(self, workdir):
        assert main(["sweep", "--gen", "equilateral:4", "--nu-min", "0.3", "--nu-max", "0.32",
                     "--nu-step", "0.02", "--plane-stress", "--out", "ps.csv", "--no-fig"]) == 0
        rows = (workdir / "ps.csv").read_text().strip().split("\n")[1:]
        # under plane stress the equilateral flip moves up to 1/3
        assert float(rows[0].split(",")[4]) == 100.0
        assert float(rows[1].split(",")[4]) == 100.0

    def test_grid_validation(self, capsys):
        assert main(["sweep", "--gen", "equilateral:2", "--nu-max", "0.5"]) == 1
        assert main(["sweep", "--gen", "equilateral:2", "--nu-min", "-1.0"]) == 1
        assert main(["sweep", "--gen", "equilateral:2", "--nu-min", "0.4",
                     "--nu-max", "0.2"]) == 1
        assert main(["sweep", "--gen", "equilateral:2", "--nu-step", "-0.01"]) == 1
        assert main(["sweep"]) == 1  # no mesh at all


class TestColormap:
    def test_stdout_svg(self, capsys):
        assert main(["colormap", "--gen", "equilateral:3", "--nu", "0.2"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("<svg")
        assert out.rstrip().endswith("</svg>")

    def test_to_file(self, workdir):
        assert main(["colormap", "--gen", "equilateral:2", "--nu", "0.3", "--out", "c.svg"]) == 0
        assert (workdir / "c.svg").read_text().startswith("<svg")

    def test_rejects_3d(self, capsys):
        assert main(["colormap", "--gen", "cube_kuhn:1", "--nu", "0.2"]) == 2
        assert "input error" in capsys.readouterr().err


class TestSolve:
    def test_affine_boundary_data(self, workdir, capsys):
        rc = main(
            ["solve", "--gen", "square_right:4", "--nu", "0.3",
             "--g-linear", "0.2", "-1", "0.5", "0.1", "0.3", "-0.7",
             "--out", "u.csv"]
        )
        assert rc == 0
        err = capsys.readouterr().err
        assert "max spring-form residual:" in err
        assert "max fem-form residual:" in err
        lines = (workdir / "u.csv").read_text().strip().split("\n")
        assert lines[0] == "node,x,y,u1,u2"
        b = np.array([[0.2, -1.0], [0.5, 0.1]])
        c = np.array([0.3, -0.7])
        for ln in lines[1:]:
            vals = [float(v) for v in ln.split(",")[1:]]
            x, u = np.array(vals[:2]), np.array(vals[2:])
            assert np.abs(u - (b @ x + c)).max() < 1e-8

    def test_constant_force(self, capsys):
        assert main(["solve", "--gen", "equilateral:4", "--nu", "0.2",
                     "--f", "0", "-1", "--out", "-"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("node,x,y,u1,u2")

    def test_uncertified_warning_still_solves(self, capsys):
        assert main(["solve", "--gen", "equilateral:4", "--nu", "0.3",
                     "--g", "0.1", "0", "--out", "-"]) == 0
        err = capsys.readouterr().err
        assert "solvability not certified" in err

    def test_tensor_file_route(self, workdir, capsys):
        write_tensor(isotropic_tensor(material_from_poisson(0.2), 2), workdir / "t.txt")
        assert main(["solve", "--gen", "square_right:3", "--tensor", str(workdir / "t.txt"),
                     "--g", "0.1", "0.2", "--out", "-"]) == 0
        capsys.readouterr()

    def test_indefinite_tensor_fails_numerically(self, workdir, capsys):
        write_tensor(random_full_symmetric_tensor(2, seed=5), workdir / "bad.txt")
        rc = main(["solve", "--gen", "square_right:3", "--tensor", str(workdir / "bad.txt"),
                   "--g", "0.1", "0.2", "--out", "-"])
        assert rc == 3
        assert "numerical failure" in capsys.readouterr().err

    def test_asymmetric_tensor_rejected(self, workdir, capsys):
        rng = np.random.default_rng(1)
        write_tensor(ElasticityTensor(2, rng.normal(size=(2, 2, 2, 2))), workdir / "asym.txt")
        rc = main(["solve", "--gen", "square_right:3", "--tensor", str(workdir / "asym.txt"),
                   "--g", "0", "0", "--out", "-"])
        assert rc == 2
        assert "input error" in capsys.readouterr().err

    def test_tensor_dimension_mismatch(self, workdir, capsys):
        write_tensor(isotropic_tensor(material_from_poisson(0.2), 3), workdir / "t3.txt")
        assert main(["solve", "--gen", "square_right:3", "--tensor", str(workdir / "t3.txt"),
                     "--out", "-"]) == 2
        capsys.readouterr()

    def test_usage_errors(self, workdir, capsys):
        write_tensor(isotropic_tensor(material_from_poisson(0.2), 2), workdir / "t.txt")
        assert main(["solve", "--gen", "equilateral:2", "--tensor", str(workdir / "t.txt"),
                     "--nu", "0.2", "--out", "-"]) == 1
        assert main(["solve", "--gen", "equilateral:2", "--nu", "0.2",
                     "--f", "1", "--out", "-"]) == 1  # needs 2 values
        assert main(["solve", "--gen", "equilateral:2", "--nu", "0.2",
                     "--g", "0", "0", "--g-linear", "1", "0", "0", "1", "0", "0",
                     "--out", "-"]) == 1
        assert main(["solve", "--gen", "equilateral:2", "--nu", "0.2",
                     "--g-linear", "1", "0", "--out", "-"]) == 1  # needs 6
        assert main(["solve", "--gen", "cube_kuhn:1", "--nu", "0.2",
                     "--plane-stress", "--out", "-"]) == 2
        capsys.readouterr()

    def test_plane_stress_solve(self, capsys):
        assert main(["solve", "--gen", "square_right:3", "--nu", "0.3", "--plane-stress",
                     "--g-linear", "1", "0", "0", "1", "0", "0", "--out", "-"]) == 0
        capsys.readouterr()


class TestVerify:
    def test_single_group(self, capsys):
        assert main(["verify", "--group", "row-sum"]) == 0
        lines = capsys.readouterr().out.strip().split("\n")
        assert lines[0] == "group,cases,failures,max_error,status"
        assert len(lines) == 2
        row = lines[1].split(",")
        assert row[0] == "row-sum"
        assert row[1].isdigit() and int(row[1]) > 0
        assert row[2] == "0"
        assert row[4] == "ok"

    def test_two_groups_to_file(self, workdir):
        assert main(["verify", "--group", "symmetry", "--group", "row-sum",
                     "--out", "v.csv"]) == 0
        lines = (workdir / "v.csv").read_text().strip().split("\n")
        assert [ln.split(",")[0] for ln in lines[1:]] == ["symmetry", "row-sum"]

    def test_unknown_group(self, capsys):
        assert main(["verify", "--group", "nope"]) == 1
        assert "usage error" in capsys.readouterr().err


class TestGenerate:
    def test_stdout_round_trip(self, capsys, tmp_path):
        assert main(["generate", "--gen", "patch_square"]) == 0
        text = capsys.readouterr().out
        assert text == mesh_text(generate_mesh("patch_square"))
        path = tmp_path / "m.mesh"
        path.write_text(text)
        mesh = parse_mesh(path)
        assert mesh.num_nodes == 4
        assert mesh.num_elements == 2

    def test_jittered_output(self, workdir):
        assert main(["generate", "--gen", "square_right:3", "--jitter", "0.1",
                     "--seed", "2", "--out", "j.mesh"]) == 0
        jittered = parse_mesh(workdir / "j.mesh")
        plain = generate_mesh("square_right:3")
        assert not np.array_equal(jittered.nodes, plain.nodes)
        assert np.array_equal(jittered.elements, plain.elements)

    def test_bad_spec(self, capsys):
        assert main(["generate", "--gen", "equilateral:0"]) == 2
        assert main(["generate", "--gen", "wat"]) == 2
        capsys.readouterr()


class TestParserLevel:
    def test_no_subcommand(self, capsys):
        assert main([]) == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert main(["analyze", "--bogus"]) == 1
        capsys.readouterr()
