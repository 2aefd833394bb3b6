import numpy as np
import pytest

from priorlasso.data import Dataset
from priorlasso.qp import KERNELS


def make_data(seed, n=40, p=4, sd=0.5, beta=None):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    if beta is None:
        beta = rng.uniform(-2.0, 2.0, p)
    y = 0.7 + X @ beta + sd * rng.standard_normal(n)
    return Dataset(y, X)


def random_qp(rng, d=None, m=None):
    """PD problem with the origin strictly feasible."""
    d = d or int(rng.integers(1, 11))
    m = int(rng.integers(0, 16)) if m is None else m
    M = rng.standard_normal((d, d))
    Q = M @ M.T + 0.1 * np.eye(d)
    c = rng.standard_normal(d)
    A = rng.standard_normal((m, d))
    b = np.abs(rng.standard_normal(m)) + 0.01
    return Q, c, A, b


@pytest.fixture(params=sorted(KERNELS))
def backend(request):
    return request.param


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k])
