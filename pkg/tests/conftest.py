import numpy as np
import pytest

from crlab.catalog import geodesic_sphere
from crlab.geometry import complex_to_real_matrix
from crlab.moebius import CRAutomorphism, compose_chart

ACCEPTANCE = []


def record_acceptance(number, ok, detail):
    ACCEPTANCE.append((number, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def real_slice_sphere(m=2, n=2):
    """Unit sphere of the real slice {y = 0}: the catalog sphere rotated by -i."""
    minus_i = complex_to_real_matrix(-1j * np.eye(n + 1))
    return compose_chart(CRAutomorphism.from_unitary(minus_i), geodesic_sphere(m, n), name="real_slice_sphere")


def e(k, n=2):
    v = np.zeros(2 * n + 2)
    v[k - 1] = 1.0
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
