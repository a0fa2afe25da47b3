"""Shared fixtures and the per-criterion pass/fail summary."""

from collections import OrderedDict

import numpy as np
import pytest

from proxy_sa.marginals import InputSpace
from proxy_sa.models import builtin, cdf_product, linear

_CRITERIA = OrderedDict()


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    tag, title = marker.args
    ok = call.excinfo is None
    prev = _CRITERIA.get(tag, (title, True, []))
    failed = prev[2] + ([item.name] if not ok else [])
    _CRITERIA[tag] = (title, prev[1] and ok, failed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(_CRITERIA, key=lambda t: int(t[1:])):
        title, ok, failed = _CRITERIA[tag]
        line = f"{'PASS' if ok else 'FAIL'}  {tag}  {title}"
        if failed:
            line += f"  (failed: {', '.join(failed)})"
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ishigami():
    return builtin("ishigami")


@pytest.fixture(scope="session")
def ishigami_mv():
    return builtin("ishigami_mv")


@pytest.fixture(scope="session")
def block_additive():
    return builtin("block_additive")


@pytest.fixture(scope="session")
def gsobol():
    return builtin("gsobol_mv")


@pytest.fixture(scope="session")
def product2():
    """``F(x1) F(x2)`` on the unit square."""
    return cdf_product(a=[1.0, 1.0], b=[0.0, 0.0])


@pytest.fixture(scope="session")
def additive2():
    """``x1 + x2`` on the unit square."""
    return linear([1.0, 1.0], InputSpace.uniform(0.0, 1.0, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
