"""Discrete error norms, convergence rates and positivity statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .geometry import ElementGeom, gradient_at_barycenter
from .mesh import DualPartition, QuadMesh


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    h1: float
    u_min: float
    u_max: float
    n_nodes: int
    h: float


def discrete_l2_error(mesh: QuadMesh, dual: DualPartition, U, exact_u) -> float:
    """Nodal error weighted by the overlapping dual areas (weights sum to 2|Omega|)."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    e = np.asarray(exact_u(x, y), dtype=float) - np.asarray(U, dtype=float)
    return float(np.sqrt(np.sum(dual.dual_area * e ** 2)))


def discrete_l2_norm(dual: DualPartition, U, weight_scale: float = 1.0) -> float:
    U = np.asarray(U, dtype=float)
    return float(np.sqrt(weight_scale * np.sum(dual.dual_area * U ** 2)))


def discrete_h1_error(mesh: QuadMesh, U, exact_grad) -> float:
    """Barycentric gradient error weighted by element areas."""
    geom = ElementGeom.from_vertices(mesh.elem_vertices)
    Q = geom.barycenter
    gh = gradient_at_barycenter(geom, np.asarray(U, dtype=float)[mesh.elems])
    diff = np.asarray(exact_grad(Q[:, 0], Q[:, 1]), dtype=float) - gh
    return float(np.sqrt(np.sum(geom.detJ_Q * np.sum(diff ** 2, axis=1))))


def convergence_rate(E1: float, h1: float, E2: float, h2: float) -> float:
    if min(E1, E2, h1, h2) <= 0.0:
        raise InvalidArgument("errors and mesh sizes must be positive")
    if h1 == h2:
        raise InvalidArgument("mesh sizes must differ")
    return math.log(E2 / E1) / math.log(h2 / h1)


@dataclass(frozen=True)
class PositivityReport:
    min: float
    max: float
    n_negative: int


def positivity_report(U, floor: float = 0.0) -> PositivityReport:
    """Extrema and the number of entries below ``-floor``."""
    U = np.asarray(U, dtype=float)
    return PositivityReport(float(U.min()), float(U.max()), int(np.count_nonzero(U < -floor)))


def error_report(mesh: QuadMesh, dual: DualPartition, U, exact_u, exact_grad) -> ErrorReport:
    U = np.asarray(U, dtype=float)
    return ErrorReport(
        l2=discrete_l2_error(mesh, dual, U, exact_u),
        h1=discrete_h1_error(mesh, U, exact_grad),
        u_min=float(U.min()),
        u_max=float(U.max()),
        n_nodes=mesh.n_nodes,
        h=mesh.h,
    )


def rates(reports: list[ErrorReport]) -> list[tuple[float | None, float | None]]:
    """(l2 rate, h1 rate) against the previous level; ``None`` for the first."""
    out = [(None, None)]
    for a, b in zip(reports, reports[1:]):
        out.append((convergence_rate(a.l2, a.h, b.l2, b.h), convergence_rate(a.h1, a.h, b.h1, b.h)))
    return out
