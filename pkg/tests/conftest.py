import numpy as np
import pytest

from posfve.mesh import DistortionConfig, build_dual, distort_random, generate_uniform


def random_convex_quads(rng, n, spread=0.3):
    """Perturbed unit squares at random scales, rotations and offsets; convex and CCW."""
    base = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    out = []
    while len(out) < n:
        v = base + rng.uniform(-spread, spread, size=(4, 2))
        e = np.roll(v, -1, axis=0) - v
        f = np.roll(e, -1, axis=0)
        if np.all(e[:, 0] * f[:, 1] - e[:, 1] * f[:, 0] > 1e-3):
            t = rng.uniform(0, 2 * np.pi)
            R = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
            out.append(rng.uniform(0.1, 3.0) * v @ R.T + rng.uniform(-5, 5, size=2))
    return np.array(out)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def unit_mesh():
    return generate_uniform(1, 1)


@pytest.fixture
def distorted_8():
    m = distort_random(generate_uniform(8, 8), DistortionConfig(theta=0.25, seed=3))
    return m, build_dual(m)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
