"""Acceptance criteria, each checked at its stated tolerance.

One PASS/FAIL line per criterion is printed in the pytest terminal summary
(and immediately with ``-s``). Set POSFVE_EXTENDED=1 to also run the long
radiation check (T = 1 on a 64 x 64 mesh).
"""
import os
import time

import numpy as np
import pytest

from posfve.experiments import convergence_study, monotonicity_run, picard_config_for, radiation_run
from posfve.geometry import ElementGeom, gradient_at_barycenter, jacobian, shoelace_area
from posfve.mesh import DistortionConfig, build_dual, distort_random, generate_uniform
from posfve.problems import example1, example2, example3, monotonicity_problem, radiation_problem
from posfve.scheme import MonotoneScheme, RobinBC
from posfve.solver import TimeConfig

from conftest import random_convex_quads
from test_problems import fd_source

RESULTS = []


def report(criterion, ok, detail=""):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)
    return ok


# ------------------------------------------------------------------ 1 and 2

@pytest.fixture(scope="module")
def monotonicity_runs():
    p = monotonicity_problem()
    runs = {}
    for n in (32, 64):
        for distorted in (False, True):
            for scheme in ("monotone", "standard"):
                runs[scheme, n, distorted] = monotonicity_run(p, n, scheme, distorted, theta=0.2, seed=7)
    return runs


def test_criterion_1_positivity(monotonicity_runs):
    lines, ok = [], True
    for (scheme, n, distorted), r in sorted(monotonicity_runs.items()):
        if scheme != "monotone":
            continue
        case_ok = r.u_min >= -1e-11 * r.u_max and r.n_negative == 0 and r.seconds < 60
        ok &= case_ok
        lines.append(f"{n}{'d' if distorted else 'u'} min={r.u_min:.2e} neg={r.n_negative} {r.seconds:.1f}s")
    assert report(1, ok, "; ".join(lines))


def test_criterion_2_standard_goes_negative(monotonicity_runs):
    mins = {n: monotonicity_runs["standard", n, True].u_min for n in (32, 64)}
    ok = any(v < 0 for v in mins.values())
    assert report(2, ok, "distorted standard u_min " + ", ".join(f"{n}: {v:.3e}" for n, v in mins.items()))


# ------------------------------------------------------------------ 3 and 4

LEVELS = range(1, 6)


def _rates_check(scheme):
    lines, ok = [], True
    t0 = time.perf_counter()
    for factory in (example1, example2, example3):
        p = factory()
        for distorted in (False, True):
            res = convergence_study(p, LEVELS, scheme, distort=distorted, theta=0.2, seed=7)
            l2, h1 = res[-1].l2_rate, res[-1].h1_rate
            if distorted:
                case_ok = 1.6 <= l2 <= 2.2 and h1 >= 0.85
            else:
                case_ok = 1.8 <= l2 <= 2.2 and h1 >= 1.6
            ok &= case_ok
            lines.append(f"{p.name}{'d' if distorted else 'u'} l2={l2:.3f} h1={h1:.3f}{'' if case_ok else ' <--'}")
    return ok, lines, time.perf_counter() - t0


def test_criterion_3_monotone_rates():
    ok, lines, secs = _rates_check("monotone")
    ok &= secs < 600
    assert report(3, ok, "; ".join(lines) + f" ({secs:.0f}s)")


def test_criterion_4_standard_rates():
    ok, lines, secs = _rates_check("standard")
    assert report(4, ok, "; ".join(lines) + f" ({secs:.0f}s)")


# ------------------------------------------------------------------ 5

def _anisotropic(x, y):
    x = np.asarray(x, dtype=float)
    K = np.empty(x.shape + (2, 2))
    K[..., 0, 0] = 1.0 + np.asarray(y) ** 2
    K[..., 0, 1] = K[..., 1, 0] = 0.8 * np.sin(3 * x)
    K[..., 1, 1] = 1.5 + 0.5 * x
    return K


def test_criterion_5_structure():
    rng = np.random.default_rng(2024)
    worst_col, max_nnz, ok = 0.0, 0, True
    for trial in range(50):
        n = int(rng.integers(3, 13))
        m = distort_random(generate_uniform(n, n), DistortionConfig(0.2, seed=trial))
        d = build_dual(m)
        U = rng.uniform(0, 3, m.n_nodes) * (rng.uniform(size=m.n_nodes) > 0.1)
        s = MonotoneScheme(m, d, _anisotropic, RobinBC.constant(1.0, 1.0))
        for (a1, a3), (n1, n3, _, _) in zip(s.coefficients(U), s._stencils):
            ok &= bool(np.array_equal(a1 * U[n1] - a3 * U[n3], -(a3 * U[n3] - a1 * U[n1])))
        A = s.matrix(U).toarray()
        diag = np.diag(A)
        off = A - np.diag(diag)
        cols = A.sum(axis=0)[~m.is_boundary()]
        worst_col = max(worst_col, float(np.abs(cols).max()))
        max_nnz = max(max_nnz, int(np.count_nonzero(A, axis=1).max()))
        ok &= bool(np.all(diag > 0) and np.all(off <= 0))
    ok &= worst_col <= 1e-12 and max_nnz <= 5
    assert report(5, ok, f"max |interior column sum|={worst_col:.1e}, max nnz/row={max_nnz}")


# ------------------------------------------------------------------ 6

def _max_diagonal_flux_error(p, n):
    m = generate_uniform(n, n)
    U = p.exact_u(m.nodes[:, 0], m.nodes[:, 1])
    s = MonotoneScheme(m, build_dual(m), p.kappa, None, M=p.M)
    xg, wg = np.polynomial.legendre.leggauss(16)
    t = 0.5 * (xg + 1)
    worst = 0.0
    for (a1, a3), (n1, n3, n2, n4), g in zip(s.coefficients(U), s._stencils, s.geoms):
        F = a1 * U[n1] - a3 * U[n3]
        a, b = m.nodes[n2], m.nodes[n4]
        pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
        grad = p.exact_grad(pts[..., 0], pts[..., 1])
        K = p.kappa(pts[..., 0], pts[..., 1])
        # -int kappa grad u . n over the diagonal, n pointing away from node 1; |q1| equals the length
        ref = 0.5 * np.einsum("kqi,kqij,kj->kq", grad, K, g.q1) @ wg
        worst = max(worst, float(np.abs(F - ref).max()))
    return worst, m.h


def test_criterion_6_truncation_order():
    p = example2()
    data = [_max_diagonal_flux_error(p, n) for n in (16, 32, 64)]
    orders = [np.log(data[i + 1][0] / data[i][0]) / np.log(data[i + 1][1] / data[i][1]) for i in range(2)]
    ok = min(orders) >= 1.8
    assert report(6, ok, "errors " + ", ".join(f"{e:.2e}" for e, _ in data)
                  + " orders " + ", ".join(f"{o:.2f}" for o in orders))


# ------------------------------------------------------------------ 7

def test_criterion_7_oracles():
    rng = np.random.default_rng(7)
    v = random_convex_quads(rng, 1000)
    g = ElementGeom.from_vertices(v)
    u = rng.normal(size=(1000, 4))
    J = jacobian(g, 0.5, 0.5)
    dref = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
    oracle = np.linalg.solve(np.transpose(J, (0, 2, 1)), (u @ dref)[..., None])[..., 0]
    grad_err = float(np.abs(gradient_at_barycenter(g, u) - oracle).max())
    area_err = float(np.abs(g.detJ_Q - shoelace_area(v)).max())
    f_err = 0.0
    for factory in (example1, example2, example3):
        p = factory()
        x = rng.uniform(0.02, 0.98, 300)
        y = rng.uniform(0.02, 0.98, 300)
        keep = np.abs(x - 1 / 3) > 0.02
        x, y = x[keep], y[keep]
        f = p.source(x, y)
        f_err = max(f_err, float(np.abs(f - fd_source(p, x, y)).max() / max(1.0, np.abs(f).max())))
    ok = grad_err <= 1e-12 and area_err <= 1e-12 and f_err <= 1e-6
    assert report(7, ok, f"gradient {grad_err:.1e}, detJ {area_err:.1e}, source {f_err:.1e}")


# ------------------------------------------------------------------ 8

def test_criterion_8_radiation():
    p = radiation_problem()
    tcfg = TimeConfig(dt=5e-4, t_final=0.1)
    cfg = picard_config_for(p)
    lines, ok = [], True
    t0 = time.perf_counter()
    for distorted in (False, True):
        runs = {s: radiation_run(p, 32, s, tcfg, cfg, distort=distorted, theta=0.2, seed=7)
                for s in ("monotone", "standard")}
        mono, std = runs["monotone"].trajectory, runs["standard"].trajectory
        positive = all(st.min_u > 0 for st in mono.steps)
        case_ok = positive and mono.avg_linear <= std.avg_linear
        ok &= case_ok
        lines.append(f"{'distorted' if distorted else 'uniform'}: min>0 {positive}, "
                     f"linear/picard {mono.avg_linear:.2f} vs {std.avg_linear:.2f}")
    secs = time.perf_counter() - t0
    ok &= secs < 900
    assert report(8, ok, "; ".join(lines) + f" ({secs:.0f}s)")


@pytest.mark.slow
@pytest.mark.skipif(os.environ.get("POSFVE_EXTENDED") != "1", reason="set POSFVE_EXTENDED=1 for the T=1 run")
def test_criterion_8_extended_norm():
    p = radiation_problem()
    r = radiation_run(p, 64, "monotone", TimeConfig(dt=5e-4, t_final=1.0))
    ok = 0.83 <= r.final_l2 <= 0.94 and all(st.min_u > 0 for st in r.trajectory.steps)
    assert report("8-extended", ok, f"final L2 norm {r.final_l2:.4f} ({r.seconds:.0f}s)")
