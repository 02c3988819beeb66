import math

import numpy as np
import pytest

from lambda_rts.core import ProductionUnit, validate_dataset

LN35 = math.log(3) / math.log(5)

_ac_results: dict[str, list[str]] = {}


def make_dataset(xs, ys, ids=None):
    ids = ids or [str(i + 1) for i in range(len(xs))]
    return validate_dataset([ProductionUnit(i, tuple(np.atleast_1d(x)), tuple(np.atleast_1d(y))) for i, x, y in zip(ids, xs, ys)])


def random_dataset(rng, j_max=20, n_max=4, p_max=4, lo=0.1, hi=10.0):
    J = int(rng.integers(1, j_max + 1))
    n = int(rng.integers(1, n_max + 1))
    p = int(rng.integers(1, p_max + 1))
    return make_dataset(rng.uniform(lo, hi, (J, n)), rng.uniform(lo, hi, (J, p)))


@pytest.fixture
def example1():
    return make_dataset([1, 4, 2.5, 3], [1, 2, 1.5, 5])


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    name = report.nodeid.split("::")[-1]
    if "test_acceptance.py" in report.nodeid and name.startswith("test_ac"):
        label = "AC" + str(int(name[7:9]))
        _ac_results.setdefault(label, []).append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ac_results:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ac_results, key=lambda s: int(s[2:])):
        ok = all(o == "passed" for o in _ac_results[label])
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'}")
