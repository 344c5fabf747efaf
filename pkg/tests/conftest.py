"""Shared fixtures and the acceptance-criteria terminal summary."""

import numpy as np
import pytest

from varimp.backend import load_pure_kernels
from varimp.data import from_arrays

# one (number, passed, detail) entry per acceptance criterion, printed as a
# summary section at the end of the run
CRITERION_LINES = []


def record_criterion(num: int, passed: bool, detail: str) -> bool:
    CRITERION_LINES.append((num, passed, detail))
    return passed


def pytest_terminal_summary(terminalreporter):
    if not CRITERION_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(CRITERION_LINES):
        verdict = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:2d} {verdict}: {detail}")


@pytest.fixture(scope="session")
def pure_kernels():
    """The interpreted kernel module (same source as the compiled one)."""
    return load_pure_kernels()


def make_ordinal_ds(x_columns, y, names=None):
    """Dataset with all-ordinal predictors from plain arrays."""
    x_columns = [np.asarray(c, dtype=np.float64) for c in x_columns]
    if names is None:
        names = [f"x{k + 1}" for k in range(len(x_columns))]
    return from_arrays(names, x_columns, ["n"] * len(x_columns),
                       np.asarray(y, dtype=np.float64))


def make_mixed_ds(ord_cols, cat_cols, y):
    """Dataset with ordinal columns first, then categorical ones."""
    names = [f"x{k + 1}" for k in range(len(ord_cols) + len(cat_cols))]
    cols = [np.asarray(c, dtype=np.float64) for c in ord_cols] + list(cat_cols)
    roles = ["n"] * len(ord_cols) + ["c"] * len(cat_cols)
    return from_arrays(names, cols, roles, np.asarray(y, dtype=np.float64))


@pytest.fixture
def ordinal_ds_factory():
    return make_ordinal_ds


@pytest.fixture
def mixed_ds_factory():
    return make_mixed_ds
