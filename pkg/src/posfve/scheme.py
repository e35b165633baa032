"""Flux approximations and global assembly.

Two discretizations share the nodal unknowns of the bilinear trial space:

* the monotone scheme, whose control volumes are the overlapping triangles
  cut off by element diagonals and whose fluxes are nonlinear two-point
  fluxes (five nonzeros per row, an M-matrix transpose for any u >= 0);
* the standard vertex-centred scheme on median dual cells (nine-point
  stencil), kept as the comparison baseline.

Coefficient conventions: ``kappa(x, y)`` returns tensors of shape
``(..., 2, 2)``; element-constant tensors may be passed directly as an array
of shape ``(n_elems, 2, 2)``. Robin data follow
``gamma * (kappa grad u) . n + delta * u = g``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, InvalidArgument, InvalidCoefficient
from .geometry import (ElementGeom, bilinear_map, jacobian, rot_cw, shape_functions, shape_gradients,
                       shoelace_area)
from .mesh import DualPartition, QuadMesh


@dataclass(frozen=True)
class RobinBC:
    """Boundary data; ``gamma``/``delta`` take ``(x, y)``, ``g`` takes ``(x, y, normal)``."""

    gamma: Callable
    delta: Callable
    g: Callable

    @classmethod
    def constant(cls, gamma: float, delta: float, g: float = 0.0) -> "RobinBC":
        if gamma <= 0.0:
            raise InvalidCoefficient(f"gamma must be positive, got {gamma}")
        return cls(
            gamma=lambda x, y: np.full(np.shape(x), float(gamma)),
            delta=lambda x, y: np.full(np.shape(x), float(delta)),
            g=lambda x, y, n: np.full(np.shape(x), float(g)),
        )

    def sample(self, points, normals):
        x, y = points[..., 0], points[..., 1]
        gamma = np.asarray(self.gamma(x, y), dtype=float)
        delta = np.asarray(self.delta(x, y), dtype=float)
        g = np.asarray(self.g(x, y, normals), dtype=float)
        if np.any(gamma <= 0.0):
            raise InvalidCoefficient("gamma must be positive on the boundary")
        if np.any(delta < 0.0):
            raise InvalidCoefficient("delta must be non-negative on the boundary")
        return gamma, delta, g


@dataclass(frozen=True)
class SparseSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def diag_idx(self) -> np.ndarray:
        return diagonal_positions(self.matrix)


def diagonal_positions(A: sp.csr_matrix) -> np.ndarray:
    """Position in ``A.data`` of each row's diagonal entry."""
    n = A.shape[0]
    pos = np.full(n, -1, dtype=np.int64)
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    hit = np.flatnonzero(A.indices == rows)
    pos[rows[hit]] = hit
    if np.any(pos < 0):
        raise InvalidArgument("matrix row without a diagonal entry")
    return pos


@dataclass(frozen=True)
class FluxPair:
    """Main part and residual of the one-sided flux across one diagonal."""

    A: float | np.ndarray
    r: float | np.ndarray
    r_plus: float | np.ndarray
    r_minus: float | np.ndarray
    nodes: tuple = (1, 3)
    elem: int | None = None


def evaluate_kappa(kappa, points) -> np.ndarray:
    if callable(kappa):
        K = np.asarray(kappa(points[..., 0], points[..., 1]), dtype=float)
    else:
        K = np.asarray(kappa, dtype=float)
    K = np.broadcast_to(K, points.shape[:-1] + (2, 2))
    check_spd(K)
    return K


def check_spd(K) -> None:
    K = np.asarray(K, dtype=float)
    scale = np.abs(K).max(initial=0.0)
    if np.any(np.abs(K[..., 0, 1] - K[..., 1, 0]) > 1e-12 * max(scale, 1e-300)):
        raise InvalidCoefficient("diffusion tensor is not symmetric")
    det = K[..., 0, 0] * K[..., 1, 1] - K[..., 0, 1] * K[..., 1, 0]
    if np.any(K[..., 0, 0] <= 0.0) or np.any(det <= 0.0):
        raise InvalidCoefficient("diffusion tensor is not positive definite")


def _flux_coefficients(geom: ElementGeom, K):
    """A_sigma and the residual coefficient for the diagonal opposite local vertex 1."""
    two_j = 2.0 * geom.detJ_Q
    kq1 = np.einsum("...ji,...j->...i", K, geom.q1)  # kappa^T q1
    A = np.einsum("...i,...i->...", geom.q1, kq1) / two_j
    rc = np.einsum("...i,...i->...", geom.q2, kq1) / two_j
    return A, rc


def one_sided_flux(geom: ElementGeom, kappa_Q, i: int, u):
    """One-sided flux for local node ``i`` (1..4) across the diagonal not through it.

    Returns the :class:`FluxPair` and the flux value A (u_i - u_opp) + r.
    """
    if i not in (1, 2, 3, 4):
        raise InvalidArgument(f"local node index must be 1..4, got {i}")
    K = np.asarray(kappa_Q, dtype=float)
    check_spd(K)
    g = geom.relabel(i - 1) if i != 1 else geom
    uu = np.roll(np.asarray(u, dtype=float), -(i - 1), axis=-1)
    A, rc = _flux_coefficients(g, K)
    r = rc * (uu[..., 1] - uu[..., 3])
    pair = FluxPair(A=A, r=r, r_plus=np.maximum(r, 0.0), r_minus=np.maximum(-r, 0.0),
                    nodes=(i, (i + 1) % 4 + 1))
    return pair, A * (uu[..., 0] - uu[..., 2]) + r


def _two_point(A, r_plus, r_minus, u1, u3, M, Ch2):
    a1 = A + r_plus * M / (M * u1 + Ch2)
    a3 = A + r_minus * M / (M * u3 + Ch2)
    return a1, a3


def two_point_flux(pair: FluxPair, u1, u3, M: float = 1.0, Ch2: float = 1e-2):
    """Non-negative two-point coefficients ``(alpha1, alpha3)``.

    The flux out of node 1 is ``alpha1 * u1 - alpha3 * u3`` and the flux out
    of node 3 is its exact negative.
    """
    if M <= 0.0 or Ch2 <= 0.0:
        raise InvalidArgument("M and C*h^2 must be positive")
    if np.any(np.asarray(u1) < 0.0) or np.any(np.asarray(u3) < 0.0):
        raise DomainError("two-point flux needs non-negative nodal values")
    return _two_point(pair.A, pair.r_plus, pair.r_minus, u1, u3, M, Ch2)


def boundary_flux(length: float, gamma: float, delta: float, g: float):
    """Robin contribution of a boundary segment: ``(diag coefficient, rhs term)``."""
    if np.any(np.asarray(gamma) <= 0.0):
        raise InvalidCoefficient("gamma must be positive")
    if np.any(np.asarray(length) <= 0.0):
        raise InvalidArgument("boundary segment length must be positive")
    return delta / gamma * length, g * length / gamma


class _Pattern:
    """Fixed COO -> CSR scatter, so repeated assemblies only redo the values."""

    def __init__(self, rows, cols, n: int):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        keys = rows * n + cols
        uniq, self.inverse = np.unique(keys, return_inverse=True)
        self.n = n
        self.nnz = len(uniq)
        self.indices = (uniq % n).astype(np.int32)
        counts = np.bincount(uniq // n, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.diag = diagonal_positions(self._csr(np.zeros(self.nnz)))

    def _csr(self, data):
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))

    def matrix(self, values, diag_shift=None, scale: float = 1.0) -> sp.csr_matrix:
        data = np.bincount(self.inverse, weights=values, minlength=self.nnz)
        if scale != 1.0:
            data *= scale
        if diag_shift is not None:
            data[self.diag] += diag_shift
        return self._csr(data)


def boundary_geometry(mesh: QuadMesh):
    """Midpoints, lengths and outward unit normals of the boundary edges."""
    be = mesh.boundary_edges
    a = mesh.nodes[be[:, 0]]
    b = mesh.nodes[be[:, 1]]
    t = b - a
    length = np.linalg.norm(t, axis=1)
    normal = rot_cw(t) / length[:, None]
    return a, b, length, normal


class MonotoneScheme:
    """Nonlinear two-point flux discretization on the overlapping dual.

    ``kappa`` may be a callable (sampled at element barycenters) or an
    element array; call :meth:`set_kappa` to refresh state-dependent tensors.
    """

    def __init__(self, mesh: QuadMesh, dual: DualPartition, kappa, bc: RobinBC | None,
                 M: float = 1.0, C: float = 1.0):
        if M <= 0.0 or C <= 0.0:
            raise InvalidArgument("M and C must be positive")
        self.mesh = mesh
        self.dual = dual
        self.M = float(M)
        self.Ch2 = float(C) * mesh.h ** 2
        self.geoms = (ElementGeom.from_vertices(mesh.elem_vertices),)
        self.geoms += (self.geoms[0].relabel(1),)
        el = mesh.elems
        self._stencils = [(el[:, 0], el[:, 2], el[:, 1], el[:, 3]),
                          (el[:, 1], el[:, 3], el[:, 2], el[:, 0])]
        rows, cols = [], []
        for n1, n3, _, _ in self._stencils:
            rows += [n1, n1, n3, n3]
            cols += [n1, n3, n3, n1]
        self._bnd_diag = np.zeros(0)
        self.boundary_rhs = np.zeros(mesh.n_nodes)
        if bc is not None:
            a, b, length, normal = boundary_geometry(mesh)
            gamma, delta, g = bc.sample(0.5 * (a + b), normal)
            diag, rhs = boundary_flux(length, gamma, delta, g)
            be = mesh.boundary_edges
            self._bnd_diag = np.concatenate([diag, diag])
            self._bnd_nodes = np.concatenate([be[:, 0], be[:, 1]])
            rows.append(self._bnd_nodes)
            cols.append(self._bnd_nodes)
            self.boundary_rhs = np.bincount(self._bnd_nodes, weights=np.concatenate([rhs, rhs]),
                                            minlength=mesh.n_nodes)
        self._pattern = _Pattern(np.concatenate(rows), np.concatenate(cols), mesh.n_nodes)
        self.set_kappa(kappa)

    @property
    def mass(self) -> np.ndarray:
        return self.dual.dual_area

    @property
    def time_mass(self) -> np.ndarray:
        return self.dual.dual_area

    def set_kappa(self, kappa) -> None:
        self.kappa_Q = evaluate_kappa(kappa, self.geoms[0].barycenter)
        self._coef = [_flux_coefficients(g, self.kappa_Q) for g in self.geoms]

    def flux_pairs(self, U):
        """Per-element :class:`FluxPair` for both diagonals at state ``U``."""
        pairs = []
        for (A, rc), (_, _, n2, n4) in zip(self._coef, self._stencils):
            r = rc * (U[n2] - U[n4])
            pairs.append(FluxPair(A=A, r=r, r_plus=np.maximum(r, 0.0), r_minus=np.maximum(-r, 0.0)))
        return pairs

    def coefficients(self, U):
        """``[(alpha1, alpha3), ...]`` for both diagonals of every element."""
        U = np.asarray(U, dtype=float)
        floor = -1e-11 * max(np.abs(U).max(initial=0.0), 1e-300)
        if np.any(U < floor):
            raise DomainError(f"linearization state has negative entries (min {U.min():.3e})")
        out = []
        for pair, (n1, n3, _, _) in zip(self.flux_pairs(U), self._stencils):
            out.append(_two_point(pair.A, pair.r_plus, pair.r_minus, U[n1], U[n3], self.M, self.Ch2))
        return out

    def matrix(self, U, mass_coeff=None, scale: float = 1.0) -> sp.csr_matrix:
        """``scale * A(U) + diag(mass_coeff)``."""
        vals = []
        for a1, a3 in self.coefficients(U):
            vals += [a1, -a3, a3, -a1]
        vals.append(self._bnd_diag)
        return self._pattern.matrix(np.concatenate(vals), diag_shift=mass_coeff, scale=scale)

    def source(self, f) -> np.ndarray:
        return assemble_source(self.dual, f)


def assemble_monotone(mesh: QuadMesh, dual: DualPartition, kappa, U_lin, bc: RobinBC,
                      M: float = 1.0, C: float = 1.0) -> SparseSystem:
    scheme = MonotoneScheme(mesh, dual, kappa, bc, M=M, C=C)
    return SparseSystem(scheme.matrix(np.asarray(U_lin, dtype=float)), scheme.boundary_rhs.copy())


def assemble_mass_lumped(dual: DualPartition) -> sp.dia_matrix:
    return sp.diags(dual.dual_area)


def assemble_source(dual: DualPartition, f) -> np.ndarray:
    """Centroid rule on each dual triangle."""
    c = dual.tri_centroid
    vals = np.asarray(f(c[:, 0], c[:, 1]), dtype=float) * dual.tri_area
    return np.bincount(dual.node, weights=vals, minlength=dual.n_nodes)


# reference midpoints of the segments M_i -> Q, and quadrant centres of vertex i's subregion
_SEGMENT_MID = np.array([[0.5, 0.25], [0.75, 0.5], [0.5, 0.75], [0.25, 0.5]])
_EDGE_MID = np.array([[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]])
_QUADRANT = np.array([[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]])
_CORNER = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


_GAUSS2 = 0.25 * np.array([1.0 - 1.0 / np.sqrt(3.0), 1.0 + 1.0 / np.sqrt(3.0)])


def consistent_mass_blocks(geom: ElementGeom) -> np.ndarray:
    """``(n_el, 4, 4)`` blocks: integral of N_j over vertex i's subregion.

    2x2 Gauss points per reference quadrant; exact since det J is affine
    and N_j bilinear.
    """
    out = np.zeros((len(geom.detJ_Q), 4, 4))
    for i, (qx, qy) in enumerate(_CORNER * 0.5):
        for a in _GAUSS2:
            for b in _GAUSS2:
                J = jacobian(geom, qx + a, qy + b)
                det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
                out[:, i, :] += 0.0625 * det[:, None] * shape_functions(qx + a, qy + b)[None, :]
    return out


class StandardScheme:
    """Vertex-centred scheme on median dual cells (Petrov-Galerkin baseline).

    Each element contributes the fluxes through its four inner segments
    M_i Q (one-point rule at the segment midpoint). A callable ``kappa`` is
    sampled at those midpoints; an element array is used as is.

    The time derivative uses ``mass_kind``: ``"consistent"`` integrates the
    bilinear trial function over each dual cell (9-point stencil),
    ``"lumped"`` keeps only the dual cell areas.
    """

    def __init__(self, mesh: QuadMesh, kappa, bc: RobinBC | None, mass_kind: str = "consistent"):
        if mass_kind not in ("consistent", "lumped"):
            raise InvalidArgument(f"mass_kind must be 'consistent' or 'lumped', got {mass_kind!r}")
        self.mesh = mesh
        self.mass_kind = mass_kind
        geom = ElementGeom.from_vertices(mesh.elem_vertices)
        self.geom = geom
        n_el = mesh.n_elems
        # (n_el, 4 segments, 4 shape functions, 2)
        self._grads = np.stack(
            [shape_gradients(geom, *_SEGMENT_MID[s]) for s in range(4)], axis=1)
        self._seg_points = np.stack([bilinear_map(geom, *_SEGMENT_MID[s]) for s in range(4)], axis=1)
        Q = geom.barycenter
        M_pts = np.stack([bilinear_map(geom, *_EDGE_MID[s]) for s in range(4)], axis=1)
        self._seg_normals = rot_cw(Q[:, None, :] - M_pts)  # outward from vertex s, length |M_s Q|

        corners = mesh.elem_vertices
        quads = np.stack([corners, M_pts, np.broadcast_to(Q[:, None, :], M_pts.shape),
                          np.roll(M_pts, 1, axis=1)], axis=2)
        self._sub_area = shoelace_area(quads)  # (n_el, 4)
        self._sub_points = np.stack([bilinear_map(geom, *_QUADRANT[s]) for s in range(4)], axis=1)
        self.mass = np.bincount(mesh.elems.ravel(), weights=self._sub_area.ravel(),
                                minlength=mesh.n_nodes)

        el = mesh.elems
        # entry (k, s, j): flux through segment s from column node j, rows s and s+1
        row_a = np.broadcast_to(el[:, :, None], (n_el, 4, 4))
        row_b = np.broadcast_to(np.roll(el, -1, axis=1)[:, :, None], (n_el, 4, 4))
        col = np.broadcast_to(el[:, None, :], (n_el, 4, 4))
        rows = [row_a.ravel(), row_b.ravel()]
        cols = [col.ravel(), col.ravel()]

        self.boundary_rhs = np.zeros(mesh.n_nodes)
        self._bnd_vals = np.zeros(0)
        if bc is not None:
            a, b, length, normal = boundary_geometry(mesh)
            be = mesh.boundary_edges
            half = 0.5 * length
            pa = a + 0.25 * (b - a)
            pb = a + 0.75 * (b - a)
            ga, da, gga = bc.sample(pa, normal)
            gb, db, ggb = bc.sample(pb, normal)
            ca = da / ga * half
            cb = db / gb * half
            na, nb = be[:, 0], be[:, 1]
            # u_h at the half-edge midpoints: 3/4 own node + 1/4 neighbour
            rows += [na, na, nb, nb]
            cols += [na, nb, nb, na]
            self._bnd_vals = np.concatenate([0.75 * ca, 0.25 * ca, 0.75 * cb, 0.25 * cb])
            self.boundary_rhs = (np.bincount(na, weights=gga * half / ga, minlength=mesh.n_nodes)
                                 + np.bincount(nb, weights=ggb * half / gb, minlength=mesh.n_nodes))
        self._pattern = _Pattern(np.concatenate(rows), np.concatenate(cols), mesh.n_nodes)
        self._mass_matrix = None
        self.set_kappa(kappa)

    @property
    def mass_matrix(self) -> sp.csr_matrix:
        """``M[P, j] = integral of N_j over the dual cell of P``; rows sum to the cell areas."""
        if self._mass_matrix is None:
            el = self.mesh.elems
            Me = consistent_mass_blocks(self.geom)
            rows = np.broadcast_to(el[:, :, None], Me.shape).ravel()
            cols = np.broadcast_to(el[:, None, :], Me.shape).ravel()
            n = self.mesh.n_nodes
            self._mass_matrix = sp.csr_matrix((Me.ravel(), (rows, cols)), shape=(n, n))
        return self._mass_matrix

    @property
    def time_mass(self):
        return self.mass_matrix if self.mass_kind == "consistent" else self.mass

    def set_kappa(self, kappa) -> None:
        if callable(kappa):
            K = evaluate_kappa(kappa, self._seg_points)
        else:
            K = np.asarray(kappa, dtype=float)
            check_spd(K)
            K = np.broadcast_to(K[:, None], (self.mesh.n_elems, 4, 2, 2))
        # c[k,s,j] = -(K grad N_j) . n_s
        kn = np.einsum("ksab,ksa->ksb", K, self._seg_normals)  # K^T n
        c = -np.einsum("ksjb,ksb->ksj", self._grads, kn)
        self._flux_vals = np.concatenate([c.ravel(), -c.ravel()])

    def matrix(self, U=None, mass_coeff=None, scale: float = 1.0) -> sp.csr_matrix:
        """``scale * A + mass_coeff``; ``mass_coeff`` is a diagonal vector or a sparse matrix."""
        vals = np.concatenate([self._flux_vals, self._bnd_vals])
        if sp.issparse(mass_coeff):
            return (self._pattern.matrix(vals, scale=scale) + mass_coeff).tocsr()
        return self._pattern.matrix(vals, diag_shift=mass_coeff, scale=scale)

    def source(self, f) -> np.ndarray:
        p = self._sub_points
        vals = np.asarray(f(p[..., 0], p[..., 1]), dtype=float) * self._sub_area
        return np.bincount(self.mesh.elems.ravel(), weights=vals.ravel(), minlength=self.mesh.n_nodes)


def assemble_standard_fve(mesh: QuadMesh, kappa, bc: RobinBC) -> SparseSystem:
    scheme = StandardScheme(mesh, kappa, bc, mass_kind="lumped")
    return SparseSystem(scheme.matrix(), scheme.boundary_rhs.copy())
