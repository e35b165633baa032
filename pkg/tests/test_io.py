import csv

import numpy as np
import pytest

from posfve.errors import InvalidArgument
from posfve.io import (CONVERGENCE_COLUMNS, STEP_COLUMNS, TableWriter, export_field, partial_path, read_table,
                       read_vtk, write_json)
from posfve.mesh import generate_uniform


def test_single_cell_vtk(tmp_path):
    m = generate_uniform(1, 1)
    vtk, table = export_field(m, np.array([0.0, 1.0, 2.0, 3.0]), tmp_path / "f")
    text = vtk.read_text()
    assert "POINTS 4 double" in text and "CELLS 1 5" in text and "CELL_TYPES 1\n9\n" in text
    assert "SCALARS u double 1" in text
    pts, cells, vals = read_vtk(vtk)
    np.testing.assert_array_equal(pts, m.nodes)
    np.testing.assert_array_equal(cells, m.elems)
    np.testing.assert_array_equal(vals, [0, 1, 2, 3])
    rows = list(csv.reader(table.open()))
    assert rows[0] == ["x", "y", "u"] and len(rows) == 5


def test_field_roundtrip_exact(tmp_path, rng):
    m = generate_uniform(7, 5)
    U = rng.normal(size=m.n_nodes)
    vtk, table = export_field(m, U, tmp_path / "g.vtk")
    assert vtk.name == "g.vtk" and table.name == "g.csv"
    _, _, vals = read_vtk(vtk)
    np.testing.assert_array_equal(vals, U)
    assert len(read_table(table)) == m.n_nodes
    assert not list(tmp_path.glob("*.partial"))


def test_field_size_mismatch(tmp_path):
    with pytest.raises(InvalidArgument):
        export_field(generate_uniform(2, 2), np.zeros(3), tmp_path / "bad")


def test_table_writer_partial_then_rename(tmp_path):
    path = tmp_path / "t.csv"
    w = TableWriter(path, STEP_COLUMNS)
    w.write(step=1, t=5e-4, picard_iters=3, avg_linear_iters=2.5, min_u=0.001, max_u=100.0)
    assert partial_path(path).exists() and not path.exists()
    w.close()
    rows = read_table(path)
    assert rows[0]["step"] == "1" and float(rows[0]["t"]) == 5e-4


def test_table_writer_keeps_partial_on_error(tmp_path):
    path = tmp_path / "c.csv"
    with pytest.raises(RuntimeError):
        with TableWriter(path, CONVERGENCE_COLUMNS) as w:
            w.write(level=1, n=8, h=0.1, l2=1e-3, l2_rate=None, h1=1e-2, h1_rate=None, u_min=0, u_max=1)
            raise RuntimeError("solver died")
    assert not path.exists()
    text = partial_path(path).read_text().splitlines()
    assert text[0] == ",".join(CONVERGENCE_COLUMNS) and text[1].startswith("1,8,")


def test_table_writer_missing_column(tmp_path):
    with TableWriter(tmp_path / "x.csv", ("a", "b")) as w:
        with pytest.raises(InvalidArgument):
            w.write(a=1)
        w.write(a=1, b=2)


def test_json(tmp_path):
    p = write_json({"b": 1, "a": [1.5]}, tmp_path / "s.json")
    assert p.read_text().startswith('{\n  "a"')
