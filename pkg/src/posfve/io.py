"""Field export (legacy VTK, CSV) and result tables.

Every writer goes through a ``<name>.partial`` file that is renamed on
success, so an interrupted run never leaves a file that looks complete.
"""
from __future__ import annotations

import csv
import json
import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .mesh import QuadMesh

CONVERGENCE_COLUMNS = ("level", "n", "h", "l2", "l2_rate", "h1", "h1_rate", "u_min", "u_max")
STEP_COLUMNS = ("step", "t", "picard_iters", "avg_linear_iters", "min_u", "max_u")

VTK_QUAD = 9


def fmt(v) -> str:
    """Round-trippable text for numbers; empty for ``None``."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def partial_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".partial")


@contextmanager
def atomic_open(path, mode: str = "w"):
    """Write to ``path.partial``; rename onto ``path`` only if the block succeeds."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = partial_path(path)
    with open(tmp, mode, newline="") as fh:
        yield fh
    os.replace(tmp, path)


def _check_field(mesh: QuadMesh, U) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.shape != (mesh.n_nodes,):
        raise InvalidArgument(f"field has shape {U.shape}, mesh has {mesh.n_nodes} nodes")
    return U


def write_vtk(mesh: QuadMesh, U, path, name: str = "u", title: str = "posfve field") -> Path:
    """Legacy ASCII VTK unstructured grid with quad cells and one point scalar."""
    U = _check_field(mesh, U)
    with atomic_open(path) as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write(f"{title}\n")
        f.write("ASCII\n")
        f.write("DATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {mesh.n_nodes} double\n")
        for x, y in mesh.nodes:
            f.write(f"{fmt(x)} {fmt(y)} 0\n")
        f.write(f"CELLS {mesh.n_elems} {5 * mesh.n_elems}\n")
        for e in mesh.elems:
            f.write("4 " + " ".join(str(int(i)) for i in e) + "\n")
        f.write(f"CELL_TYPES {mesh.n_elems}\n")
        f.write(f"{VTK_QUAD}\n" * mesh.n_elems)
        f.write(f"POINT_DATA {mesh.n_nodes}\n")
        f.write(f"SCALARS {name} double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for v in U:
            f.write(fmt(v) + "\n")
    return Path(path)


def read_vtk(path):
    """Points, cells and the first point scalar of a file written by :func:`write_vtk`."""
    tokens = Path(path).read_text().split()
    pos = tokens.index("POINTS")
    n = int(tokens[pos + 1])
    pts = np.array(tokens[pos + 3: pos + 3 + 3 * n], dtype=float).reshape(n, 3)
    pos = tokens.index("CELLS")
    m = int(tokens[pos + 1])
    cells = np.array(tokens[pos + 3: pos + 3 + 5 * m], dtype=int).reshape(m, 5)[:, 1:]
    pos = tokens.index("LOOKUP_TABLE")
    vals = np.array(tokens[pos + 2: pos + 2 + n], dtype=float)
    return pts[:, :2], cells, vals


def write_field_csv(mesh: QuadMesh, U, path) -> Path:
    U = _check_field(mesh, U)
    with atomic_open(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "y", "u"))
        for (x, y), v in zip(mesh.nodes, U):
            w.writerow((fmt(x), fmt(y), fmt(v)))
    return Path(path)


def export_field(mesh: QuadMesh, U, path) -> tuple[Path, Path]:
    """Write ``<stem>.vtk`` and ``<stem>.csv`` next to each other."""
    stem = Path(path)
    if stem.suffix in (".vtk", ".csv"):
        stem = stem.with_suffix("")
    vtk = write_vtk(mesh, U, stem.with_suffix(".vtk"))
    table = write_field_csv(mesh, U, stem.with_suffix(".csv"))
    return vtk, table


class TableWriter:
    """CSV rows flushed one at a time to ``path.partial``; :meth:`close` renames.

    A run that dies midway leaves the rows written so far in the partial file.
    """

    def __init__(self, path, columns):
        self.path = Path(path)
        self.columns = tuple(columns)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(partial_path(self.path), "w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")
        self._w.writerow(self.columns)
        self._fh.flush()

    def write(self, **row) -> None:
        missing = set(self.columns) - set(row)
        if missing:
            raise InvalidArgument(f"missing columns {sorted(missing)}")
        self._w.writerow([fmt(row[c]) for c in self.columns])
        self._fh.flush()

    def abort(self) -> None:
        self._fh.close()

    def close(self) -> Path:
        self._fh.close()
        os.replace(partial_path(self.path), self.path)
        return self.path

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()
        return False


def write_json(data, path) -> Path:
    with atomic_open(path) as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return Path(path)


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
