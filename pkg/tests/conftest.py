"""Shared test plumbing.

Every branch-and-bound run in the session is recorded so the acceptance
check on cut validity can cover all solves, and the acceptance module is
ordered last so that it sees them.
"""

from dataclasses import dataclass
from typing import List

import pytest

import otscuts.milp as milp


@dataclass
class SolveRecord:
    setting: str
    status: str
    incumbents_checked: int
    cut_violations: int
    pool_size: int


SOLVE_RECORDS: List[SolveRecord] = []

_original_run = milp._Solver.run


def _recording_run(self):
    inc, st = _original_run(self)
    SOLVE_RECORDS.append(SolveRecord(self.cfg.setting, st.status, st.incumbents_checked,
                                     st.cut_violations, len(self.pool)))
    return inc, st


milp._Solver.run = _recording_run


@pytest.fixture(scope="session")
def solve_records() -> List[SolveRecord]:
    return SOLVE_RECORDS


def pytest_collection_modifyitems(items):
    items.sort(key=lambda it: it.fspath.basename == "test_acceptance.py")
