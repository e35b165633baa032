"""Drivers for the benchmark studies, shared by the CLI and the acceptance tests."""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .analysis import ErrorReport, discrete_l2_norm, error_report, positivity_report, rates
from .errors import ConfigurationError, InvalidArgument
from .mesh import DistortionConfig, QuadMesh, build_dual, distort_random, generate_uniform
from .problems import ProblemSpec
from .solver import PicardConfig, TimeConfig, Trajectory, backward_euler_run, picard_steady


def make_mesh(problem: ProblemSpec, n: int, distort: bool = False, theta: float = 0.2,
              seed: int = 0, level: int = 0) -> QuadMesh:
    """``n x n`` mesh of the problem's domain, optionally perturbed.

    Interface lines of the problem stay straight under the perturbation.
    """
    if n < 1:
        raise InvalidArgument("n must be positive")
    if n % problem.n_multiple:
        raise ConfigurationError(
            f"{problem.name}: n={n} must be a multiple of {problem.n_multiple} to resolve its interfaces")
    mesh = generate_uniform(n, n, domain=problem.domain, level=level)
    if distort:
        mesh = distort_random(mesh, DistortionConfig(theta=theta, seed=seed, fixed_x=problem.x_interfaces,
                                                     fixed_y=problem.y_interfaces))
    problem.check_mesh(mesh)
    return mesh


def picard_config_for(problem: ProblemSpec, cfg: PicardConfig | None = None, M=None, C=None) -> PicardConfig:
    """``cfg`` with the problem's recommended M unless ``M`` is given explicitly."""
    cfg = cfg or PicardConfig()
    return replace(cfg, M=problem.M if M is None else M, C=cfg.C if C is None else C)


@dataclass
class LevelResult:
    level: int
    n: int
    report: ErrorReport
    l2_rate: float | None
    h1_rate: float | None
    n_picard: int
    linear_iters: int
    seconds: float


def convergence_study(problem: ProblemSpec, levels, scheme: str = "monotone", distort: bool = False,
                      theta: float = 0.2, seed: int = 0, cfg: PicardConfig | None = None,
                      on_level=None) -> list[LevelResult]:
    """Errors and observed rates over refinement levels.

    Distorted meshes are drawn afresh on every level with seed ``seed + level``.
    ``on_level`` is called with each :class:`LevelResult` as it completes.
    """
    if problem.exact_u is None:
        raise ConfigurationError(f"{problem.name} has no exact solution")
    cfg = cfg or picard_config_for(problem)
    out: list[LevelResult] = []
    reports = []
    for level in levels:
        n = problem.level_size(level)
        t0 = time.perf_counter()
        mesh = make_mesh(problem, n, distort, theta, seed + level, level=level)
        dual = build_dual(mesh)
        res = picard_steady(problem, mesh, dual, cfg, scheme=scheme)
        rep = error_report(mesh, dual, res.U, problem.exact_u, problem.exact_grad)
        reports.append(rep)
        l2r, h1r = rates(reports)[-1]
        lr = LevelResult(level, n, rep, l2r, h1r, res.n_picard, res.total_linear_iters,
                         time.perf_counter() - t0)
        out.append(lr)
        if on_level is not None:
            on_level(lr)
    return out


@dataclass
class MonotonicityRun:
    scheme: str
    distorted: bool
    n: int
    mesh: QuadMesh
    U: np.ndarray
    u_min: float
    u_max: float
    n_negative: int
    n_picard: int
    seconds: float


def monotonicity_run(problem: ProblemSpec, n: int, scheme: str, distort: bool, theta: float = 0.2,
                     seed: int = 7, cfg: PicardConfig | None = None) -> MonotonicityRun:
    cfg = cfg or picard_config_for(problem)
    t0 = time.perf_counter()
    mesh = make_mesh(problem, n, distort, theta, seed)
    res = picard_steady(problem, mesh, build_dual(mesh), cfg, scheme=scheme)
    # nodes below the solver floor count as negative
    rep = positivity_report(res.U, floor=cfg.positivity_floor * np.abs(res.U).max())
    return MonotonicityRun(scheme, distort, n, mesh, res.U, rep.min, rep.max, rep.n_negative,
                           res.n_picard, time.perf_counter() - t0)


@dataclass
class RadiationRun:
    scheme: str
    mesh: QuadMesh
    trajectory: Trajectory
    final_l2: float
    seconds: float


# the overlapping dual covers the domain twice; halve the weights to compare with a |Omega| norm
RADIATION_L2_WEIGHT = 0.5


def radiation_run(problem: ProblemSpec, n: int, scheme: str, tcfg: TimeConfig | None = None,
                  cfg: PicardConfig | None = None, distort: bool = False, theta: float = 0.2,
                  seed: int = 0, checkpoints=(), callback=None) -> RadiationRun:
    if n % 16:
        raise ConfigurationError(f"radiation needs n divisible by 16, got {n}")
    tcfg = replace(tcfg or TimeConfig(), scheme=scheme)
    cfg = cfg or picard_config_for(problem)
    t0 = time.perf_counter()
    mesh = make_mesh(problem, n, distort, theta, seed)
    dual = build_dual(mesh)
    traj = backward_euler_run(problem, mesh, dual, tcfg, cfg, checkpoints=checkpoints, callback=callback)
    norm = discrete_l2_norm(dual, traj.U, weight_scale=RADIATION_L2_WEIGHT)
    return RadiationRun(scheme, mesh, traj, norm, time.perf_counter() - t0)
