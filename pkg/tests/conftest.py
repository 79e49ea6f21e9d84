import pytest

from qsat.instances import Clause, Instance, enumerate_solutions


def make_instance(n, literal_clauses, solve=True):
    clauses = [Clause.from_literals(c) for c in literal_clauses]
    inst = Instance(n=n, k=clauses[0].k, clauses=clauses, meta={"id": "toy"})
    if solve:
        enumerate_solutions(inst)
    return inst


@pytest.fixture
def toy():
    # (v1 or not v2) and (v2 or v3)
    return make_instance(3, [[1, -2], [2, 3]])


# PASS/FAIL lines from tests/test_acceptance.py, repeated at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
