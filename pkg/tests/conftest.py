import math

import numpy as np
import pytest

from ratedisp.source_model import DistortionSpec

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def binary_entropy(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log(x) - (1 - x) * np.log(1 - x)
    return np.where((x <= 0) | (x >= 1), 0.0, h)[()]


def var_log(p):
    p = np.asarray(p, dtype=float)
    lp = np.log(p)
    return float(p @ (lp - p @ lp) ** 2)


@pytest.fixture
def ham2():
    return DistortionSpec.hamming(2)


@pytest.fixture
def ham3():
    return DistortionSpec.hamming(3)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


def fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.3g}"
