"""Iso-parametric bilinear quadrilateral geometry.

Every function here broadcasts over leading axes, so the same code serves a
single element (vertices of shape ``(4, 2)``) and a whole mesh (vertices of
shape ``(n_elems, 4, 2)``). Vertices are stored counterclockwise, P1..P4.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidElement


def cross2(u, v):
    """z-component of the cross product of 2D vectors (broadcasting)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def rot_ccw(v):
    """Rotate 2D vectors by +90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def rot_cw(v):
    """Rotate 2D vectors by -90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def triangle_area(p, q, r):
    """Unsigned area of the triangle ``(p, q, r)``."""
    p = np.asarray(p, dtype=float)
    return 0.5 * np.abs(cross2(np.asarray(q) - p, np.asarray(r) - p))


def shoelace_area(poly):
    """Signed area of polygons with vertices along axis -2."""
    poly = np.asarray(poly, dtype=float)
    nxt = np.roll(poly, -1, axis=-2)
    return 0.5 * np.sum(cross2(poly, nxt), axis=-1)


@dataclass(frozen=True)
class ElementGeom:
    """Geometric data of one or many bilinear quadrilaterals.

    ``a`` and ``b`` hold the map coefficients (a1, a2, a3) and (b1, b2, b3):
    x = x1 + a1 xi + a2 eta + a3 xi eta, likewise y with b.
    ``q1`` is the diagonal normal used for the flux between P1 and P3, and
    ``q2`` the one used between P2 and P4; each has the length of the
    diagonal it is normal to.
    """

    vertices: np.ndarray
    a: np.ndarray
    b: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    detJ_Q: np.ndarray
    barycenter: np.ndarray

    @classmethod
    def from_vertices(cls, vertices) -> "ElementGeom":
        v = np.asarray(vertices, dtype=float)
        if v.shape[-2:] != (4, 2):
            raise InvalidElement(f"expected vertices of shape (..., 4, 2), got {v.shape}")
        p1, p2, p3, p4 = (v[..., i, :] for i in range(4))
        coef = np.stack([p2 - p1, p4 - p1, p1 - p2 + p3 - p4], axis=-2)
        d1 = p3 - p1
        d2 = p4 - p2
        return cls(
            vertices=v,
            a=coef[..., 0],
            b=coef[..., 1],
            d1=d1,
            d2=d2,
            q1=rot_ccw(d2),
            q2=rot_cw(d1),
            detJ_Q=0.5 * cross2(d1, d2),
            barycenter=0.25 * (p1 + p2 + p3 + p4),
        )

    def relabel(self, start: int) -> "ElementGeom":
        """Same element(s) with local numbering starting at vertex ``start`` (0-based)."""
        return ElementGeom.from_vertices(np.roll(self.vertices, -start, axis=-2))


def element_geom(vertices) -> ElementGeom:
    return ElementGeom.from_vertices(vertices)


def bilinear_map(geom: ElementGeom, xi, eta):
    """Image of the reference point ``(xi, eta)`` under the bilinear map."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    p1 = geom.vertices[..., 0, :]
    x = p1[..., 0] + geom.a[..., 0] * xi + geom.a[..., 1] * eta + geom.a[..., 2] * xi * eta
    y = p1[..., 1] + geom.b[..., 0] * xi + geom.b[..., 1] * eta + geom.b[..., 2] * xi * eta
    return np.stack([x, y], axis=-1)


def diag_normals(geom: ElementGeom):
    return geom.q1, geom.q2


def jacobian(geom: ElementGeom, xi, eta):
    """Jacobi matrix of the bilinear map, shape ``(..., 2, 2)``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    a, b = geom.a, geom.b
    row_x = np.stack([a[..., 0] + a[..., 2] * eta, a[..., 1] + a[..., 2] * xi], axis=-1)
    row_y = np.stack([b[..., 0] + b[..., 2] * eta, b[..., 1] + b[..., 2] * xi], axis=-1)
    return np.stack([row_x, row_y], axis=-2)


def shape_functions(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return np.stack([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta], axis=-1)


def _reference_gradients(xi, eta):
    """d N_j / d(xi, eta), shape ``(..., 4, 2)``."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dxi = np.stack([-(1 - eta), 1 - eta, eta, -eta], axis=-1)
    deta = np.stack([-(1 - xi), -xi, xi, 1 - xi], axis=-1)
    return np.stack([dxi, deta], axis=-1)


def shape_gradients(geom: ElementGeom, xi, eta):
    """Physical gradients of N_1..N_4 at ``(xi, eta)``, shape ``(..., 4, 2)``."""
    J = jacobian(geom, xi, eta)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    if np.any(det <= 0.0):
        raise InvalidElement("singular or inverted Jacobian")
    # rows of J^{-T}
    inv_t = np.stack(
        [
            np.stack([J[..., 1, 1], -J[..., 1, 0]], axis=-1),
            np.stack([-J[..., 0, 1], J[..., 0, 0]], axis=-1),
        ],
        axis=-2,
    ) / det[..., None, None]
    ref = _reference_gradients(xi, eta)
    ref = np.broadcast_to(ref, det.shape + (4, 2))
    return np.einsum("...ij,...kj->...ki", inv_t, ref)


def gradient_at(geom: ElementGeom, xi, eta, u):
    """Gradient of the bilinear interpolant of nodal values ``u`` at ``(xi, eta)``."""
    G = shape_gradients(geom, xi, eta)
    return np.einsum("...k,...ki->...i", np.asarray(u, dtype=float), G)


def gradient_at_barycenter(geom: ElementGeom, u):
    """Closed-form gradient at the barycenter using the diagonal normals."""
    if np.any(geom.detJ_Q <= 0.0):
        raise InvalidElement("element with non-positive area")
    u = np.asarray(u, dtype=float)
    two_j = 2.0 * geom.detJ_Q
    c1 = (u[..., 0] - u[..., 2]) / two_j
    c2 = (u[..., 1] - u[..., 3]) / two_j
    return c1[..., None] * geom.q1 + c2[..., None] * geom.q2
