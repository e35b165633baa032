"""Benchmark problems: coefficients, sources, Robin data and exact solutions."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError, InvalidArgument
from .geometry import ElementGeom, gradient_at_barycenter
from .mesh import QuadMesh
from .scheme import RobinBC

PI = np.pi
UNIT_SQUARE = (0.0, 1.0, 0.0, 1.0)


def scalar_tensor(c):
    c = np.asarray(c, dtype=float)
    K = np.zeros(c.shape + (2, 2))
    K[..., 0, 0] = c
    K[..., 1, 1] = c
    return K


def constant_tensor(K0):
    K0 = np.asarray(K0, dtype=float)
    return lambda x, y: np.broadcast_to(K0, np.shape(x) + (2, 2))


def robin_from_exact(kappa, exact_u, exact_grad, gamma: float, delta: float) -> RobinBC:
    """Robin data ``g = gamma (kappa grad u).n + delta u`` matching an exact solution."""

    def g(x, y, n):
        K = kappa(x, y)
        flux = np.einsum("...ij,...j->...i", K, exact_grad(x, y))
        return gamma * np.einsum("...i,...i->...", flux, n) + delta * exact_u(x, y)

    base = RobinBC.constant(gamma, delta)
    return RobinBC(gamma=base.gamma, delta=base.delta, g=g)


@dataclass(frozen=True)
class ProblemSpec:
    """Steady or unsteady diffusion problem on an axis-aligned rectangle.

    ``element_kappa(mesh, geom, U)`` marks a state-dependent coefficient
    evaluated per element from the current iterate; ``kappa`` is then unused.
    ``x_interfaces``/``y_interfaces`` are coefficient discontinuities that
    element edges must follow. ``M`` is the recommended flux regularization
    constant: large enough that M * min(u) exceeds the coarsest mesh size.
    """

    name: str
    domain: tuple
    kappa: Callable | None
    source: Callable
    bc: RobinBC
    exact_u: Callable | None = None
    exact_grad: Callable | None = None
    initial: Callable | None = None
    element_kappa: Callable | None = None
    x_interfaces: tuple = ()
    y_interfaces: tuple = ()
    base_n: int = 8
    n_multiple: int = 1
    M: float = 1.0

    def __post_init__(self):
        if (self.exact_u is None) != (self.exact_grad is None):
            raise InvalidArgument("exact_u and exact_grad must be given together")

    @property
    def nonlinear(self) -> bool:
        return self.element_kappa is not None

    def level_size(self, level: int) -> int:
        """Cells per side at refinement level ``level`` (1-based)."""
        return self.base_n * 2 ** (level - 1)

    def check_mesh(self, mesh: QuadMesh) -> None:
        """Every element must lie on one side of every interface line."""
        v = mesh.elem_vertices
        scale = float(np.abs(mesh.nodes).max()) or 1.0
        tol = 1e-10 * scale
        for axis, lines in ((0, self.x_interfaces), (1, self.y_interfaces)):
            coord = v[..., axis]
            for c in lines:
                crossing = (coord.min(axis=1) < c - tol) & (coord.max(axis=1) > c + tol)
                if np.any(crossing):
                    raise ConfigurationError(
                        f"{self.name}: mesh does not resolve the interface {'xy'[axis]}={c:g}")

    def kappa_for(self, mesh: QuadMesh, U=None):
        """Coefficient argument for assembly: a callable, or element tensors from ``U``."""
        if self.element_kappa is None:
            return self.kappa
        if U is None:
            raise InvalidArgument(f"{self.name}: state-dependent coefficient needs a state")
        return self.element_kappa(mesh, ElementGeom.from_vertices(mesh.elem_vertices), U)


def monotonicity_problem(domain=UNIT_SQUARE, alpha: float = 0.01) -> ProblemSpec:
    """Strongly anisotropic tensor aligned with circles about the origin.

    Unit source on [3/8, 5/8]^2, near-Dirichlet boundary 1e-9 (kappa grad u).n + u = 0.
    """

    def kappa(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        K = np.empty(x.shape + (2, 2))
        K[..., 0, 0] = y ** 2 + alpha * x ** 2
        K[..., 0, 1] = K[..., 1, 0] = -(1.0 - alpha) * x * y
        K[..., 1, 1] = alpha * y ** 2 + x ** 2
        return K

    def source(x, y):
        inside = (x >= 3 / 8) & (x <= 5 / 8) & (y >= 3 / 8) & (y <= 5 / 8)
        return np.where(inside, 1.0, 0.0)

    return ProblemSpec(name="monotonicity", domain=tuple(domain), kappa=kappa, source=source,
                       bc=RobinBC.constant(1e-9, 1.0, 0.0))


def example1() -> ProblemSpec:
    """Isotropic, kappa = exp(-x-y), u = sin(pi x/2) sin(pi y/2) + pi/2, Robin delta = 1."""

    def u(x, y):
        return np.sin(PI * x / 2) * np.sin(PI * y / 2) + PI / 2

    def grad(x, y):
        gx = PI / 2 * np.cos(PI * x / 2) * np.sin(PI * y / 2)
        gy = PI / 2 * np.sin(PI * x / 2) * np.cos(PI * y / 2)
        return np.stack([gx, gy], axis=-1)

    def kappa(x, y):
        return scalar_tensor(np.exp(-np.asarray(x) - np.asarray(y)))

    def source(x, y):
        # -div(k grad u) = -k lap u - grad k . grad u with grad k = -k (1, 1)
        k = np.exp(-x - y)
        g = grad(x, y)
        lap = -(PI ** 2) / 2 * np.sin(PI * x / 2) * np.sin(PI * y / 2)
        return k * (-lap + g[..., 0] + g[..., 1])

    return ProblemSpec(name="example1", domain=UNIT_SQUARE, kappa=kappa, source=source,
                       bc=robin_from_exact(kappa, u, grad, 1.0, 1.0), exact_u=u, exact_grad=grad)


def rotated_tensor(k1: float, k2: float, theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    R = np.array([[c, s], [-s, c]])
    return R @ np.diag([k1, k2]) @ R.T


def example2(k1: float = 0.1, k2: float = 4.0, theta: float = PI / 6) -> ProblemSpec:
    """Constant anisotropic tensor, u = sin(pi x) sin(pi y) + 0.0041 pi, Robin delta = 1000."""
    K0 = rotated_tensor(k1, k2, theta)
    kappa = constant_tensor(K0)

    def u(x, y):
        return np.sin(PI * x) * np.sin(PI * y) + 0.0041 * PI

    def grad(x, y):
        return np.stack([PI * np.cos(PI * x) * np.sin(PI * y),
                         PI * np.sin(PI * x) * np.cos(PI * y)], axis=-1)

    def source(x, y):
        sxy = np.sin(PI * x) * np.sin(PI * y)
        cxy = np.cos(PI * x) * np.cos(PI * y)
        return PI ** 2 * ((K0[0, 0] + K0[1, 1]) * sxy - 2.0 * K0[0, 1] * cxy)

    return ProblemSpec(name="example2", domain=UNIT_SQUARE, kappa=kappa, source=source,
                       bc=robin_from_exact(kappa, u, grad, 1.0, 1000.0), exact_u=u, exact_grad=grad,
                       M=1000.0)


def example3() -> ProblemSpec:
    """Piecewise tensor diag(4,1) | diag(6,1) across x = 1/3, Robin delta = 10000."""
    shift = 2 * np.sqrt(3) * PI * 1e-4
    c3 = np.sqrt(3) / 3

    def left(x):
        return np.asarray(x) <= 1 / 3

    def u(x, y):
        return np.where(left(x), np.sin(PI * x / 2) * np.sin(PI * y),
                        c3 * np.sin(PI * x) * np.sin(PI * y)) + shift

    def grad(x, y):
        gx = np.where(left(x), PI / 2 * np.cos(PI * x / 2) * np.sin(PI * y),
                      c3 * PI * np.cos(PI * x) * np.sin(PI * y))
        gy = np.where(left(x), PI * np.sin(PI * x / 2) * np.cos(PI * y),
                      c3 * PI * np.sin(PI * x) * np.cos(PI * y))
        return np.stack([gx, gy], axis=-1)

    def kappa(x, y):
        x = np.asarray(x, dtype=float)
        K = np.zeros(x.shape + (2, 2))
        K[..., 0, 0] = np.where(left(x), 4.0, 6.0)
        K[..., 1, 1] = 1.0
        return K

    def source(x, y):
        return np.where(left(x), 2 * PI ** 2 * np.sin(PI * x / 2) * np.sin(PI * y),
                        7 * c3 * PI ** 2 * np.sin(PI * x) * np.sin(PI * y))

    return ProblemSpec(name="example3", domain=UNIT_SQUARE, kappa=kappa, source=source,
                       bc=robin_from_exact(kappa, u, grad, 1.0, 10000.0), exact_u=u, exact_grad=grad,
                       x_interfaces=(1 / 3,), base_n=6, n_multiple=3, M=1000.0)


def larsen_coefficient(E, gradE, Z):
    """Flux-limited coefficient (1/D^2 + |grad E|^2 / E^2)^(-1/2) with D = Z^-3 E^(3/4)."""
    E = np.asarray(E, dtype=float)
    Z = np.asarray(Z, dtype=float)
    if np.any(E <= 0.0):
        raise DomainError("radiation energy must be positive")
    if np.any(Z <= 0.0):
        raise InvalidArgument("atomic number must be positive")
    D = Z ** -3.0 * E ** 0.75
    g2 = np.sum(np.asarray(gradE, dtype=float) ** 2, axis=-1)
    return (1.0 / D ** 2 + g2 / E ** 2) ** -0.5


OBSTACLES = (((3 / 16, 7 / 16), (9 / 16, 13 / 16)), ((9 / 16, 13 / 16), (3 / 16, 7 / 16)))


def atomic_number(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Z = np.ones(np.broadcast_shapes(x.shape, y.shape))
    for (xa, xb), (ya, yb) in OBSTACLES:
        Z = np.where((x > xa) & (x < xb) & (y > ya) & (y < yb), 10.0, Z)
    return Z


def radiation_initial(x, y):
    r2 = np.asarray(x) ** 2 + np.asarray(y) ** 2
    return 0.001 + 100.0 * np.exp(-r2 / 0.01)


def radiation_kappa(mesh: QuadMesh, geom: ElementGeom, E) -> np.ndarray:
    """Element tensors D_L(E_Q) I, with E_Q the mean of the element's nodal values."""
    E = np.asarray(E, dtype=float)
    Ek = E[mesh.elems]
    EQ = Ek.mean(axis=1)
    gradQ = gradient_at_barycenter(geom, Ek)
    Q = geom.barycenter
    Z = atomic_number(Q[:, 0], Q[:, 1])
    return scalar_tensor(larsen_coefficient(EQ, gradQ, Z))


def radiation_problem() -> ProblemSpec:
    lines = tuple(sorted({c for box in OBSTACLES for pair in box for c in pair}))
    return ProblemSpec(
        name="radiation",
        domain=UNIT_SQUARE,
        kappa=None,
        source=lambda x, y: np.zeros(np.shape(x)),
        bc=RobinBC.constant(1.0, 0.0, 0.0),
        initial=radiation_initial,
        element_kappa=radiation_kappa,
        x_interfaces=lines,
        y_interfaces=lines,
        base_n=16,
        n_multiple=16,
    )


PROBLEMS = {
    "monotonicity": monotonicity_problem,
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "radiation": radiation_problem,
}


def get_problem(name: str, **kwargs) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise InvalidArgument(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**kwargs)
