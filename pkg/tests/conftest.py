import os
from pathlib import Path

import numpy as np
import pytest

from gggp.data import Dataset
from gggp.grammar import load_grammar

ROOT = Path(__file__).resolve().parents[1]

_ACCEPTANCE: dict[str, str] = {}


def record_criterion(name: str, passed: bool | None, detail: str = "") -> None:
    """Store one summary line; ``passed=None`` marks a skipped criterion."""
    status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
    _ACCEPTANCE[name] = f"{status}  {name}" + (f"  ({detail})" if detail else "")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[key])


@pytest.fixture(scope="session")
def base():
    return load_grammar("base.bnf")


@pytest.fixture(scope="session")
def nodiv():
    return load_grammar("nodiv.bnf")


@pytest.fixture(scope="session")
def nobias():
    return load_grammar("nobias.bnf")


def make_dataset(X, y, names=None, target="y") -> Dataset:
    X = np.asarray(X, dtype=float)
    names = tuple(names or (f"x{i}" for i in range(X.shape[1])))
    vals = np.column_stack([X, np.asarray(y, dtype=float)])
    return Dataset(names + (target,), vals, np.zeros(vals.shape, bool), target, names)


def nhanes_path() -> Path | None:
    p = Path(os.environ.get("GGGP_NHANES_CSV", ROOT / "data" / "nhanes_2017_2018.csv"))
    return p if p.exists() else None
