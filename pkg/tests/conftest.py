import numpy as np
import pytest

from lieseries.analysis import henon_heiles
from lieseries.normalform import first_integral, normalize
from lieseries.series import HomogeneousBlock, PolynomialSeries, block_size

# one normalization serves every Henon-Heiles diagnostic: Phi to degree 28
HH_ORDER = 26


@pytest.fixture(scope="session")
def hh():
    return henon_heiles()


@pytest.fixture(scope="session")
def hh_result(hh):
    return normalize(hh, HH_ORDER)


@pytest.fixture(scope="session")
def hh_phi(hh_result):
    return first_integral(hh_result)


def random_block(rng, n, degree, complex_=False, density=1.0):
    size = block_size(n, degree)
    c = rng.standard_normal(size)
    if complex_:
        c = c + 1j * rng.standard_normal(size)
    if density < 1.0:
        c = c * (rng.random(size) < density)
    return HomogeneousBlock(n, degree, c)


def random_series(rng, n, degrees, complex_=False):
    return PolynomialSeries(n, [random_block(rng, n, d, complex_) for d in degrees])


def max_rel_diff(a: PolynomialSeries, b: PolynomialSeries) -> float:
    """max |a - b| coefficient over max(|a|, |b|) coefficient."""
    scale = max(a.max_abs_coeff(), b.max_abs_coeff(), 1e-300)
    d = a - b
    return d.max_abs_coeff() / scale if d.blocks() else 0.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# --------------------------------------------------------------------------
# acceptance report: one PASS/FAIL line per criterion at the end of the run

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = "; ".join(f"{k}={v}" for k, v in item.user_properties)
    _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[number]
        line = f"criterion {number:2d} {verdict}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
