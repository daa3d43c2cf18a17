from __future__ import annotations

import pytest

from fibolab.conjugacy import ConjugacyParams
from fibolab.kneading import fib_cut_times, golden_lambda
from fibolab.postcritical import orbit_points

# filled by test_acceptance.py, printed after the run
ACCEPTANCE: dict = {}

# far end of J_16 is c_{S(17)+S(15)} = c_5778
CACHE_INDEX = 5778


@pytest.fixture(scope="session")
def golden():
    return golden_lambda(verify=True)


@pytest.fixture(scope="session")
def s():
    return fib_cut_times(30)


@pytest.fixture(scope="session")
def cache(golden):
    return orbit_points(golden, CACHE_INDEX, 64)


@pytest.fixture(scope="session")
def small_cache(golden):
    return orbit_points(golden, 400, 64)


@pytest.fixture(scope="session")
def conj():
    return ConjugacyParams.of(2, "1.2")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        name, ok, secs, detail = ACCEPTANCE[num]
        tr.write_line(f"[{num:2d}] {'PASS' if ok else 'FAIL'}  {name:34s} {secs:7.2f}s  {detail}")


@pytest.fixture(scope="session")
def mp_orbit():
    """Independent reference orbit: plain mpmath floats at 1500 digits, first 2000 points."""
    import mpmath

    from fibolab.kneading import golden_record

    ctx = mpmath.mp.clone()
    ctx.dps = 1500
    lam = ctx.mpf(golden_record()["digits"][:1500])
    pts = [ctx.mpf(0)]
    for _ in range(2000):
        x = pts[-1]
        pts.append(lam * (1 - abs(x)) - 1)
    return pts


@pytest.fixture(scope="session")
def cocycle_loglam(golden):
    return golden.lambda_.with_precision(256).log()
