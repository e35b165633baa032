"""Command-line harness: convergence tables, monotonicity comparison, radiation runs."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import (ConfigurationError, DomainError, FVEError, InvalidArgument, InvalidMesh,
                     NonConvergence, PositivityViolation, SingularMatrix)
from .experiments import (RADIATION_L2_WEIGHT, convergence_study, make_mesh, monotonicity_run,
                          picard_config_for, radiation_run)
from .io import CONVERGENCE_COLUMNS, STEP_COLUMNS, TableWriter, export_field, write_json
from .mesh import write_mesh
from .problems import PROBLEMS, get_problem, monotonicity_problem
from .solver import PicardConfig, TimeConfig

logger = logging.getLogger("posfve")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SOLVER = 3
EXIT_POSITIVITY = 4

DOMAINS = {"unit": (0.0, 1.0, 0.0, 1.0), "biunit": (0.0, 2.0, 0.0, 2.0)}


def _schemes(choice: str):
    return ("monotone", "standard") if choice == "both" else (choice,)


def _picard(args, problem) -> PicardConfig:
    base = PicardConfig(eps_non=args.eps_non, omega=args.omega, max_picard=args.max_picard)
    return picard_config_for(problem, base, M=args.M, C=args.C)


def _tag(distorted: bool) -> str:
    return "distorted" if distorted else "uniform"


def _mesh_out(args, mesh, suffix: str = "") -> None:
    if args.mesh_out is None:
        return
    path = Path(args.mesh_out)
    if suffix:
        path = path.with_name(f"{path.stem}_{suffix}{path.suffix}")
    write_mesh(mesh, path)


def cmd_converge(args) -> int:
    problem = get_problem(args.problem)
    cfg = _picard(args, problem)
    out = Path(args.out)
    levels = range(1, args.levels + 1)
    summary = {"problem": problem.name, "M": cfg.M, "C": cfg.C, "distorted": args.distort,
               "theta": args.theta, "seed": args.seed, "runs": {}}
    for scheme in _schemes(args.scheme):
        name = f"{problem.name}_{scheme}_{_tag(args.distort)}"
        with TableWriter(out / f"{name}.csv", CONVERGENCE_COLUMNS) as table:
            def record(lr):
                r = lr.report
                table.write(level=lr.level, n=lr.n, h=r.h, l2=r.l2, l2_rate=lr.l2_rate, h1=r.h1,
                            h1_rate=lr.h1_rate, u_min=r.u_min, u_max=r.u_max)
                logger.info("%s level %d n=%d l2=%.4e h1=%.4e (%.1fs)", name, lr.level, lr.n, r.l2, r.h1,
                            lr.seconds)
            results = convergence_study(problem, levels, scheme, args.distort, args.theta, args.seed, cfg,
                                        on_level=record)
        last = results[-1]
        summary["runs"][scheme] = {"l2_rate": last.l2_rate, "h1_rate": last.h1_rate,
                                   "picard_iters": [r.n_picard for r in results]}
        print(f"{name}: finest l2 rate {last.l2_rate}, h1 rate {last.h1_rate}")
    write_json(summary, out / f"{problem.name}_{_tag(args.distort)}_summary.json")
    return EXIT_OK


def cmd_monotonicity(args) -> int:
    problem = monotonicity_problem(domain=DOMAINS[args.domain])
    cfg = _picard(args, problem)
    out = Path(args.out)
    report = {"domain": args.domain, "n": args.n, "theta": args.theta, "seed": args.seed, "runs": []}
    for distorted in (False, True):
        for scheme in _schemes(args.scheme):
            run = monotonicity_run(problem, args.n, scheme, distorted, args.theta, args.seed, cfg)
            export_field(run.mesh, run.U, out / f"monotonicity_{scheme}_{_tag(distorted)}")
            report["runs"].append({"scheme": scheme, "mesh": _tag(distorted), "u_min": run.u_min,
                                   "u_max": run.u_max, "n_negative": run.n_negative,
                                   "picard_iters": run.n_picard})
            print(f"{scheme:9s} {_tag(distorted):9s} u_min={run.u_min:.6e} u_max={run.u_max:.6e} "
                  f"negative={run.n_negative}")
            _mesh_out(args, run.mesh, _tag(distorted))
    write_json(report, out / "monotonicity_report.json")
    return EXIT_OK


def cmd_radiation(args) -> int:
    problem = get_problem("radiation")
    cfg = _picard(args, problem)
    tcfg = TimeConfig(dt=args.dt, t_final=args.t_final, standard_mass=args.standard_mass)
    out = Path(args.out)
    every = args.checkpoint_every or tcfg.n_steps
    checkpoints = sorted(set(range(0, tcfg.n_steps + 1, every)) | {tcfg.n_steps})
    meta = {"n": args.n, "dt": tcfg.dt, "t_final": tcfg.t_final, "distorted": args.distort,
            "l2_weight_scale": RADIATION_L2_WEIGHT, "standard_mass": tcfg.standard_mass, "runs": {}}
    for scheme in _schemes(args.scheme):
        table = TableWriter(out / f"radiation_{scheme}_steps.csv", STEP_COLUMNS)
        try:
            run = radiation_run(problem, args.n, scheme, tcfg, cfg, args.distort, args.theta, args.seed,
                                checkpoints=checkpoints, callback=lambda s: table.write(**vars(s)))
        except BaseException:
            table.abort()
            raise
        table.close()
        for step, U in run.trajectory.checkpoints.items():
            export_field(run.mesh, U, out / f"radiation_{scheme}_step{step:05d}")
        traj = run.trajectory
        meta["runs"][scheme] = {"final_l2_norm": run.final_l2, "avg_picard_iters": traj.avg_picard,
                                "avg_linear_iters": traj.avg_linear,
                                "min_u": min(s.min_u for s in traj.steps), "seconds": run.seconds}
        print(f"{scheme:9s} |E|={run.final_l2:.6f} picard/step={traj.avg_picard:.2f} "
              f"linear/picard={traj.avg_linear:.2f} min={meta['runs'][scheme]['min_u']:.4e}")
        _mesh_out(args, run.mesh)
    write_json(meta, out / "radiation_summary.json")
    return EXIT_OK


def cmd_mesh(args) -> int:
    if args.mesh_out is None:
        raise InvalidArgument("mesh command needs --mesh-out")
    problem = get_problem(args.problem)
    mesh = make_mesh(problem, args.n, args.distort, args.theta, args.seed)
    write_mesh(mesh, args.mesh_out)
    print(f"wrote {mesh.n_nodes} nodes, {mesh.n_elems} elements to {args.mesh_out}")
    return EXIT_OK


def _common(p: argparse.ArgumentParser, n_default=None) -> None:
    p.add_argument("--n", type=int, default=n_default, help="cells per side")
    p.add_argument("--distort", action="store_true", help="randomly perturb interior nodes")
    p.add_argument("--theta", type=float, default=0.2, help="perturbation amplitude / local edge length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--M", type=float, default=None, help="flux regularization M (default: per problem)")
    p.add_argument("--C", type=float, default=1.0, help="flux regularization C")
    p.add_argument("--eps-non", type=float, default=1e-7, help="Picard tolerance")
    p.add_argument("--omega", type=float, default=1.0, help="Picard relaxation")
    p.add_argument("--max-picard", type=int, default=200)
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--mesh-out", default=None, help="also write the mesh in quadmesh text format")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="posfve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    scheme_kw = dict(choices=("monotone", "standard", "both"))

    p = sub.add_parser("converge", help="error/rate tables on refined meshes")
    p.add_argument("--problem", required=True, choices=[k for k in PROBLEMS if k.startswith("example")])
    p.add_argument("--scheme", default="both", **scheme_kw)
    p.add_argument("--levels", type=int, default=5)
    _common(p)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("monotonicity", help="positivity comparison of both schemes")
    p.add_argument("--scheme", default="both", **scheme_kw)
    p.add_argument("--domain", default="unit", choices=sorted(DOMAINS))
    _common(p, n_default=32)
    p.set_defaults(func=cmd_monotonicity, seed=7)

    p = sub.add_parser("radiation", help="nonlinear radiation diffusion with backward Euler")
    p.add_argument("--scheme", default="both", **scheme_kw)
    p.add_argument("--dt", type=float, default=5e-4)
    p.add_argument("--t-final", type=float, default=0.1)
    p.add_argument("--checkpoint-every", type=int, default=0, help="steps between exported fields")
    p.add_argument("--standard-mass", default="consistent", choices=("consistent", "lumped"))
    _common(p, n_default=32)
    p.set_defaults(func=cmd_radiation)

    p = sub.add_parser("mesh", help="generate a mesh and write it")
    p.add_argument("--problem", default="example1", choices=sorted(PROBLEMS))
    _common(p, n_default=8)
    p.set_defaults(func=cmd_mesh)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PositivityViolation as e:
        step = f" at step {e.step}" if e.step is not None else ""
        print(f"positivity violation{step}: {e}", file=sys.stderr)
        return EXIT_POSITIVITY
    except (NonConvergence, SingularMatrix, DomainError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (InvalidArgument, ConfigurationError, InvalidMesh) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FVEError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SOLVER
