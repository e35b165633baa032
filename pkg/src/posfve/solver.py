"""Damped Picard iteration and backward-Euler time stepping."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, NonConvergence, PositivityViolation
from .linalg import KrylovConfig, krylov_solve
from .mesh import DualPartition, QuadMesh
from .problems import ProblemSpec
from .scheme import MonotoneScheme, StandardScheme

logger = logging.getLogger(__name__)

SCHEMES = ("monotone", "standard")


@dataclass(frozen=True)
class PicardConfig:
    eps_non: float = 1e-7
    omega: float = 1.0
    max_picard: int = 200
    M: float = 1.0
    C: float = 1.0
    krylov: KrylovConfig = field(default_factory=KrylovConfig)
    positivity_floor: float = 1e-11

    def __post_init__(self):
        if not (0.0 < self.omega <= 1.0):
            raise InvalidArgument(f"omega must lie in (0, 1], got {self.omega}")
        if self.eps_non <= 0.0:
            raise InvalidArgument("eps_non must be positive")
        if self.max_picard < 1:
            raise InvalidArgument("max_picard must be >= 1")


@dataclass(frozen=True)
class TimeConfig:
    dt: float = 5e-4
    t_final: float = 0.1
    scheme: str = "monotone"
    standard_mass: str = "consistent"

    def __post_init__(self):
        if self.dt <= 0.0 or self.t_final < self.dt:
            raise InvalidArgument("need dt > 0 and t_final >= dt")
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"unknown scheme {self.scheme!r}")
        if self.standard_mass not in ("consistent", "lumped"):
            raise InvalidArgument(f"unknown standard_mass {self.standard_mass!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class PicardResult:
    U: np.ndarray
    n_picard: int
    total_linear_iters: int


def make_scheme(problem: ProblemSpec, mesh: QuadMesh, dual: DualPartition, scheme: str,
                cfg: PicardConfig, U=None, standard_mass: str = "consistent"):
    problem.check_mesh(mesh)
    kappa = problem.kappa_for(mesh, U)
    if scheme == "monotone":
        return MonotoneScheme(mesh, dual, kappa, problem.bc, M=cfg.M, C=cfg.C)
    if scheme == "standard":
        return StandardScheme(mesh, kappa, problem.bc, mass_kind=standard_mass)
    raise InvalidArgument(f"unknown scheme {scheme!r}; choose from {SCHEMES}")


def _check_floor(U, cfg: PicardConfig, step=None):
    floor = -cfg.positivity_floor * np.abs(U).max(initial=0.0)
    if U.min(initial=0.0) < floor:
        raise PositivityViolation(
            f"iterate below positivity floor: min {U.min():.4e} < {floor:.4e}", field=U, step=step)


def picard(disc, problem: ProblemSpec, rhs, U0, cfg: PicardConfig, mass=None, dt: float = 1.0,
           enforce_positivity: bool = True, step=None) -> PicardResult:
    """Relaxed Picard loop for ``(mass + dt A(U)) U = rhs`` (``mass=None``: ``A(U) U = rhs``).

    ``mass`` is a diagonal vector or a sparse matrix.
    Stops once ``||U^k - U^{k-1}||_2 <= eps_non ||U^0||_2``. A discretization
    whose matrix does not depend on the state is solved once.
    """
    U_hat = np.array(U0, dtype=float)
    norm0 = float(np.linalg.norm(U_hat))
    state_free = isinstance(disc, StandardScheme) and not problem.nonlinear
    linear_iters = 0
    for k in range(1, cfg.max_picard + 1):
        if problem.nonlinear:
            disc.set_kappa(problem.kappa_for(disc.mesh, U_hat))
        A = disc.matrix(U_hat, mass_coeff=mass, scale=dt)
        res = krylov_solve(A, rhs, cfg.krylov, x0=U_hat)
        linear_iters += res.iters
        if not res.converged:
            logger.warning("linear solve not converged (iter %d, residual %.3e)", res.iters, res.residual_norm)
        U_new = U_hat + cfg.omega * (res.x - U_hat)
        if enforce_positivity:
            _check_floor(U_new, cfg, step=step)
        diff = float(np.linalg.norm(U_new - U_hat))
        U_hat = U_new
        if state_free or diff <= cfg.eps_non * norm0:
            return PicardResult(U_hat, k, linear_iters)
    raise NonConvergence(f"Picard iteration did not converge in {cfg.max_picard} steps",
                         last=U_hat, iterations=cfg.max_picard)


def default_initial_guess(n: int) -> np.ndarray:
    return np.ones(n)


def picard_steady(problem: ProblemSpec, mesh: QuadMesh, dual: DualPartition,
                  cfg: PicardConfig = PicardConfig(), U0=None, scheme: str = "monotone") -> PicardResult:
    """Steady solve ``A(U) U = f + g``; the standard scheme takes a single linear solve."""
    if U0 is None:
        U0 = default_initial_guess(mesh.n_nodes)
    disc = make_scheme(problem, mesh, dual, scheme, cfg, U=U0)
    rhs = disc.source(problem.source) + disc.boundary_rhs
    return picard(disc, problem, rhs, U0, cfg, enforce_positivity=(scheme == "monotone"))


@dataclass
class StepStats:
    step: int
    t: float
    picard_iters: int
    avg_linear_iters: float
    min_u: float
    max_u: float


@dataclass
class Trajectory:
    steps: list
    checkpoints: dict
    U: np.ndarray
    mass: object  # diagonal vector or sparse matrix used in the time derivative

    @property
    def avg_picard(self) -> float:
        return float(np.mean([s.picard_iters for s in self.steps])) if self.steps else 0.0

    @property
    def avg_linear(self) -> float:
        """Linear iterations per Picard iteration over the whole run."""
        total_lin = sum(s.avg_linear_iters * s.picard_iters for s in self.steps)
        total_pic = sum(s.picard_iters for s in self.steps)
        return total_lin / total_pic if total_pic else 0.0


def backward_euler_run(problem: ProblemSpec, mesh: QuadMesh, dual: DualPartition, tcfg: TimeConfig,
                       pcfg: PicardConfig = PicardConfig(), U_init=None, checkpoints=(),
                       callback=None) -> Trajectory:
    """Implicit Euler with an inner Picard loop started from the previous level.

    ``checkpoints`` lists step indices whose fields are kept; ``callback`` is
    called with each :class:`StepStats` as soon as the step completes.
    """
    if U_init is None:
        if problem.initial is None:
            raise InvalidArgument(f"{problem.name}: no initial condition")
        U_init = problem.initial(mesh.nodes[:, 0], mesh.nodes[:, 1])
    U = np.array(U_init, dtype=float)
    if np.any(U < 0.0):
        raise InvalidArgument("initial field must be non-negative")
    monotone = tcfg.scheme == "monotone"
    disc = make_scheme(problem, mesh, dual, tcfg.scheme, pcfg, U=U, standard_mass=tcfg.standard_mass)
    mass = disc.time_mass
    forcing = tcfg.dt * (disc.source(problem.source) + disc.boundary_rhs)
    keep = set(checkpoints)
    saved = {0: U.copy()} if 0 in keep else {}
    stats = []
    for n in range(1, tcfg.n_steps + 1):
        rhs = forcing + mass @ U if sp.issparse(mass) else forcing + mass * U
        res = picard(disc, problem, rhs, U, pcfg, mass=mass, dt=tcfg.dt,
                     enforce_positivity=monotone, step=n)
        U = res.U
        st = StepStats(step=n, t=n * tcfg.dt, picard_iters=res.n_picard,
                       avg_linear_iters=res.total_linear_iters / res.n_picard,
                       min_u=float(U.min()), max_u=float(U.max()))
        stats.append(st)
        if n in keep:
            saved[n] = U.copy()
        if callback is not None:
            callback(st)
    return Trajectory(steps=stats, checkpoints=saved, U=U, mass=mass)
