import json

import pytest

from hsymcurl.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main


def test_converge(tmp_path, capsys):
    rc = main(["converge", "--field", "B1", "--element", "Y0", "--levels", "1",
               "--out-dir", str(tmp_path), "--format", "csv", "--format", "json"])
    assert rc == EXIT_OK
    assert (tmp_path / "converge_B1_Y0.csv").exists()
    assert (tmp_path / "converge_B1_Y0.json").exists()


def test_converge_without_condensation(tmp_path):
    assert main(["--threads", "1", "converge", "--field", "B4", "--element", "D1",
                 "--levels", "1", "--no-condense", "--out-dir", str(tmp_path)]) == EXIT_OK


def test_dilatation(tmp_path):
    rc = main(["dilatation", "--element", "NI0", "--bc", "neumann", "--levels", "1",
               "--out-dir", str(tmp_path), "--format", "json", "--format", "vtk"])
    assert rc == EXIT_OK
    d = json.loads((tmp_path / "dilatation_U1_NI0_neumann.json").read_text())
    assert d["mode"] == "neumann" and d["levels"][0]["cells"] == 384
    assert (tmp_path / "dilatation_U1_NI0_neumann.vtk").exists()


def test_sequence(tmp_path, capsys):
    assert main(["sequence", "--element", "Y0", "--out-dir", str(tmp_path)]) == EXIT_OK
    d = json.loads((tmp_path / "sequence.json").read_text())
    assert d[0]["symcurl_rank"] == 6 and d[0]["kernel_dim"] == 15


def test_mesh_export(tmp_path):
    assert main(["mesh-export", "--domain", "dilatation", "--levels", "0",
                 "--out-dir", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "mesh_dilatation_0.vtk").read_text().startswith("# vtk")


@pytest.mark.parametrize("argv", [
    ["dilatation", "--bc", "bogus"],
    ["converge", "--field", "B1", "--element", "Q9"],
    ["converge", "--field", "B1", "--element", "U1"],
    ["converge", "--field", "B7", "--element", "Y0"],
    ["dilatation", "--element", "Y2", "--levels", "1"],
    ["--threads", "0", "sequence"],
    [],
])
def test_invalid_configuration(argv, capsys):
    assert main(argv) == EXIT_CONFIG


def test_solver_failure(tmp_path, capsys):
    rc = main(["converge", "--field", "B1", "--element", "NI0", "--levels", "1",
               "--tol", "1e-30", "--out-dir", str(tmp_path)])
    assert rc == EXIT_SOLVER
    assert "solver failure" in capsys.readouterr().err


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
