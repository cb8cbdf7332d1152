import numpy as np
import pytest

from ctemplates.config import load_example
from ctemplates.polyalg import MultiPoly, PolyMatrix
from ctemplates.sysmodel import InputSignal, StateAffineSystem


@pytest.fixture(scope="session")
def example_cfg():
    return load_example()


@pytest.fixture(scope="session")
def demo_sys(example_cfg):
    return example_cfg.system


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def double_integrator(p=1):
    return StateAffineSystem.from_numeric([[0.0, 1.0], [0.0, 0.0]], [[1.0, 0.0]], p=p)


def random_poly(rng, num_vars, max_deg=3, nterms=5):
    terms = {}
    for _ in range(nterms):
        e = tuple(int(k) for k in rng.integers(0, max_deg + 1, size=num_vars))
        if sum(e) <= max_deg:
            terms[e] = rng.uniform(-2, 2)
    return MultiPoly(num_vars, terms)


def random_system(rng, n=None, p=None, m=None):
    """Random state-affine system with affine A(u), constant C."""
    n = n or int(rng.integers(1, 5))
    p = p or int(rng.integers(1, 3))
    m = m or int(rng.integers(1, 3))
    A_entries = []
    for _ in range(n * n):
        terms = {(0,) * p: rng.normal(scale=0.7)}
        for k in range(p):
            e = [0] * p
            e[k] = 1
            terms[tuple(e)] = rng.normal(scale=0.3)
        A_entries.append(MultiPoly(p, terms))
    C = PolyMatrix.from_numeric(p, rng.normal(size=(m, n)))
    b = [MultiPoly(p, {(0,) * p: rng.normal()}) for _ in range(n)]
    return StateAffineSystem(PolyMatrix(n, n, A_entries), C, b)


def random_signal(rng, p, T=1.0, K=None):
    K = K or int(rng.integers(1, 5))
    inner = np.sort(rng.uniform(0.05, 0.95, size=K - 1)) * T
    bp = np.concatenate([[0.0], inner, [T]])
    if np.any(np.diff(bp) < 1e-3):
        bp = np.linspace(0, T, K + 1)
    return InputSignal(bp, rng.uniform(-1.5, 1.5, size=(K, p)))


def rotation_siso():
    """Scalar-input system x1' = (1-u) x2, x2' = -x1, y = x1.

    Its Kalman determinant is 1 - u, degree 1, vanishing only at u = 1.
    """
    one = MultiPoly.constant(1, 1.0)
    u = MultiPoly.variable(1, 0)
    zero = MultiPoly.zero(1)
    A = PolyMatrix.from_rows([[zero, one - u], [-one, zero]])
    C = PolyMatrix.from_rows([[one, zero]])
    return StateAffineSystem(A, C, [zero, zero])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
