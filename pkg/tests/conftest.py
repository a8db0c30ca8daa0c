import numpy as np
import pytest

from qmcorr.models import PLUS, build_cnot, build_controlled_rotation, build_shift_model
from qmcorr.quantum import State

CRITERIA = {
    1: "CNOT fixture: sharp POVM, all checks true, all correlations 1",
    2: "controlled rotation: unsharp POVM, first kind, not repeatable, rho table, oracle agreement",
    3: "randomized verification suite: zero failures, byte-identical rerun",
    4: "reduced final states of unitary vector schemes: rho = 1, equal spectra",
    5: "cyclic shift model: spectral POVM, Lueders transformer, correlations 1",
    6: "truncated quadrature model: variance split, observable correlation trend, value correlation",
    7: "dependence algebra on constructed tables",
    8: "brute-force oracle gate on every built-in fixture inside the oracle dimension limit",
}

_outcomes: dict[int, list[tuple[str, str]]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion exercised by the test")


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _outcomes.setdefault(crit, []).append((report.nodeid, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(CRITERIA):
        results = _outcomes.get(crit)
        if not results:
            tr.write_line(f"CRITERION {crit} NOT RUN  {CRITERIA[crit]}")
            continue
        failed = [nid.split("::")[-1] for nid, out in results if out != "passed"]
        status = "PASS" if not failed else "FAIL"
        line = f"CRITERION {crit} {status} ({len(results) - len(failed)}/{len(results)})  {CRITERIA[crit]}"
        if failed:
            line += "  failing: " + ", ".join(failed)
        tr.write_line(line)


@pytest.fixture
def plus():
    return State.pure(PLUS)


@pytest.fixture
def cnot():
    return build_cnot()


@pytest.fixture
def crot():
    return build_controlled_rotation(np.pi / 2)


@pytest.fixture
def shift3():
    return build_shift_model(3, [0, 1, 2])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
