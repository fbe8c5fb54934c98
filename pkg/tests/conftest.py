import numpy as np
import pytest

from hivadapt import PATIENT_CTL, builtin_patient, uniform_mesh
from hivadapt.problems import PatientSetup

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def mesh363():
    return uniform_mesh(363.0, 1.0)


@pytest.fixture(scope="session")
def p1_problem(mesh363):
    return PatientSetup(builtin_patient(1), PATIENT_CTL[1])(mesh363)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per criterion; lines are echoed and summarized."""
    def record(cid: str, title: str, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] {cid} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record
