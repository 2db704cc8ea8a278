import csv
import json

import numpy as np
import pytest

from hsymcurl import bench
from hsymcurl.elements import get_element

I3 = np.eye(3)


def test_field_examples():
    assert np.allclose(bench.eval_benchmark_field("B1", np.zeros(3)), 0)
    assert np.allclose(bench.eval_benchmark_field("B4", np.zeros(3)), I3)
    assert np.allclose(bench.eval_benchmark_field("B4", np.array([2.0, 0, 0])), 0)
    assert np.allclose(bench.eval_benchmark_field("B3", np.zeros(3)), 0)
    with pytest.raises(ValueError):
        bench.eval_benchmark_field("B9", np.zeros(3))


def test_field_branches():
    x = np.array([[0.5, 0.2, -0.1], [-2.5, 0.3, 0.4]])
    B2 = bench.eval_benchmark_field("B2", x)
    assert np.allclose(B2[0][:, 0], np.cos(0.5)) and np.allclose(B2[0][:, 1:], 0)
    assert np.allclose(B2[1][:, 0], np.sin(-2.5))
    a = np.sin(x[:, 0] + 2 * x[:, 1] - 3 * x[:, 2])
    B3 = bench.eval_benchmark_field("B3", x)
    assert np.allclose(B3[0], 2 * a[0] * I3) and np.allclose(B3[1], a[1] * I3)
    B1 = bench.eval_benchmark_field("B1", x)
    assert np.isclose(B1[1, 0, 0], np.sinh(-2.5) / 10) and np.count_nonzero(B1[1]) == 1
    # a point on the plane takes the branch of its cell centroid
    on = np.array([[1.0, 0, 0]])
    f = bench.FIELDS["B4"]
    assert np.allclose(f(on, np.array([[0.9, 0, 0]])), I3)
    assert np.allclose(f(on, np.array([[1.1, 0, 0]])), 0)
    assert bench.FIELDS["B1"].jump_planes == ()
    assert bench.FIELDS["B2"].jump_planes == ((0, -1.0), (0, 1.0))


def test_eoc_formula():
    r = bench.eoc([100, 800, 6400], [1.0, 0.5, 0.125])
    assert np.allclose(r, [1.0, 2.0])
    assert bench.eoc([10], [1.0]) == []


def test_meso_params():
    mu_e, lam_i = bench.compute_meso_params((76.9, 115.4), (769.0, 1154.0))
    assert abs(mu_e - 85.44) <= 0.01 and abs(lam_i - 128.22) <= 0.01
    _, lam_o = bench.compute_meso_params((76.9, 11.54), (769.0, 1154.0))
    assert abs(lam_o - 8.3) <= 0.05
    with pytest.raises(ValueError):
        bench.compute_meso_params((76.9, 115.4), (50.0, 1154.0))
    with pytest.raises(ValueError):
        bench.compute_meso_params((76.9, 115.4), (769.0, -500.0))


def test_setup_materials_match_meso_params():
    inner, outer = bench.DilatationSetup().materials()
    assert np.isclose(inner.mu_e, 85.444, atol=1e-3) and np.isclose(outer.mu_e, inner.mu_e)
    assert np.isclose(inner.lambda_micro, 1154.0) and np.isclose(outer.lambda_micro, 1154.0)
    assert inner.mu_c == 0.0 and inner.L_c == 1.0 and inner.mu_macro == 76.9


def test_meshes():
    m = bench.convergence_mesh(0)
    assert m.n_cells == 6 * 3
    m = bench.dilatation_mesh(0)
    assert m.n_cells == 384
    region = bench.inner_region(m)
    assert np.sum(region == 0) == 48
    with pytest.raises(ValueError):
        bench.convergence_mesh(0, base=(2, 1, 1))
    with pytest.raises(ValueError):
        bench.dilatation_mesh(0, base=(3, 4, 4))


def test_run_convergence_member_reproduction():
    target = lambda x, xc=None: np.broadcast_to(I3, np.shape(x)[:-1] + (3, 3))
    rep = bench.run_convergence("B1", "Y0", levels=1, target=target)
    assert rep.errors[0] <= 1e-9 and rep.eocs == []


def test_run_convergence_two_levels():
    rep = bench.run_convergence("B4", "S0", levels=2)
    assert rep.dofs[0] < rep.dofs[1] and rep.errors[1] < rep.errors[0]
    assert rep.levels[0].cells == 18 and rep.levels[1].cells == 144
    d = rep.to_dict()
    assert d["field"] == "B4" and len(d["levels"]) == 2 and len(d["eoc"]) == 1


def test_d1_contains_b4_on_small_levels():
    rep = bench.run_convergence("B4", "D1", levels=2, tol=1e-13)
    assert max(rep.errors) <= 1e-9


def test_emit_convergence(tmp_path):
    rep = bench.run_convergence("B1", "NI0", levels=2)
    p = bench.emit(rep, "csv", tmp_path)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["element", "level", "dofs", "rel_l2_error", "eoc"]
    assert rows[1][0] == "NI0" and rows[1][4] == "" and float(rows[2][4]) > 0
    j = json.loads(bench.emit(rep, "json", tmp_path).read_text())
    assert list(j) == ["field", "element", "levels", "eoc"]
    with pytest.raises(ValueError):
        bench.emit(rep, "vtk", tmp_path)


@pytest.fixture(scope="module")
def small_dilatation():
    return bench.run_dilatation("U1", "NI0", "neumann", levels=[0])


def test_dilatation_report(small_dilatation, tmp_path):
    rep = small_dilatation
    lv = rep.levels[0]
    assert lv.cells == 384 and lv.energy > 0 and np.isfinite(lv.energy)
    assert np.isclose(lv.energy, lv.quadratic_form, rtol=1e-8)
    j = json.loads(bench.emit(rep, "json", tmp_path).read_text())
    assert {"pair", "mode", "levels"} <= set(j) and j["pair"] == ["U1", "NI0"]
    assert {"cells", "energy"} <= set(j["levels"][0])
    rows = list(csv.reader(open(bench.emit(rep, "csv", tmp_path))))
    assert rows[0][:2] == ["pair", "mode"] and len(rows) == 2
    text = bench.emit(rep, "vtk", tmp_path).read_text()
    assert "SCALARS trace_P double 1" in text and "SCALARS region double 1" in text


def test_dilatation_trace_is_cellwise_average(small_dilatation):
    s = small_dilatation.solution
    tr = bench.cell_average_trace(s["mesh"], get_element("NI0"), s["problem"].p_dofs, s["P"])
    assert np.allclose(tr, s["trace_P"])
    assert tr.shape == (384,) and np.all(tr > 0)


def test_dilatation_invalid_configuration():
    with pytest.raises(ValueError):
        bench.run_dilatation("U3", "S0")
    with pytest.raises(ValueError):
        bench.run_dilatation("U1", "Y2")
    with pytest.raises(ValueError):
        bench.run_dilatation("U1", "S0", "robin")
    rep = bench.DilatationReport(("U1", "S0"), "coupling")
    with pytest.raises(ValueError):
        bench.emit(rep, "vtk", "unused")
