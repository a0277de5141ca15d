import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from surfchi import pipeline

settings.register_profile(
    "surfchi", deadline=None, max_examples=30,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("surfchi")


@pytest.fixture(scope="session")
def sphere_fx():
    return pipeline.fixture("sphere")


@pytest.fixture(scope="session")
def torus_fx():
    return pipeline.fixture("torus")


@pytest.fixture(scope="session")
def genus2_fx():
    return pipeline.fixture("genus2")


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def unit(v):
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


# acceptance results: criterion -> list of (clause, passed, detail)
ACCEPTANCE = {}


def record(criterion, clause, passed, detail=""):
    line = f"criterion {criterion} [{clause}]: {'PASS' if passed else 'FAIL'} {detail}".rstrip()
    print(line)
    ACCEPTANCE.setdefault(criterion, []).append((clause, bool(passed), detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE):
        clauses = ACCEPTANCE[crit]
        ok = all(p for _, p, _ in clauses)
        parts = "; ".join(f"{c}={'ok' if p else 'FAIL'} {d}".rstrip() for c, p, d in clauses)
        terminalreporter.write_line(f"CRITERION {crit}: {'PASS' if ok else 'FAIL'} | {parts}")
