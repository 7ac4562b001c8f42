from __future__ import annotations

from functools import lru_cache
from pathlib import Path

import pytest

from unimech.constraints import Policy, run_algorithm
from unimech.jetcalc import LagrangianSystem
from unimech.unified import build_unified
from unimech.symbolic.parser import parse_lagrangian

LAGRANGIANS = Path(__file__).resolve().parent.parent / "lagrangians"

# one line per acceptance criterion, filled in by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


@lru_cache(maxsize=None)
def load_system(name: str) -> LagrangianSystem:
    chart, lag = parse_lagrangian((LAGRANGIANS / f"{name}.lag").read_text())
    return LagrangianSystem(chart, lag)


@lru_cache(maxsize=None)
def relativistic_ledger(semispray1: bool = True):
    return run_algorithm(build_unified(load_system("relativistic_particle")), Policy(semispray1=semispray1))


@pytest.fixture(scope="session")
def pu():
    return load_system("pais_uhlenbeck")


@pytest.fixture(scope="session")
def free():
    return load_system("free_particle")


@pytest.fixture(scope="session")
def rel():
    return load_system("relativistic_particle")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
