import numpy as np
import pytest

from rsmatch import _kernels
from rsmatch.model import BitCode, FeatureRecord, Session, build_gallery


def real_gallery(n, dim, seed=0, classes=None, sessions=True):
    """Random unit-vector gallery with ``classes`` labels assigned round-robin."""
    rng = np.random.default_rng(seed)
    classes = classes or max(2, n // 4)
    vecs = rng.standard_normal((n, dim))
    records = []
    for k in range(n):
        session = Session.ONE if (k // classes) % 2 == 0 else Session.TWO
        records.append(
            FeatureRecord(f"r{k}", k % classes, vecs[k], session if sessions else Session.UNSPECIFIED)
        )
    return build_gallery(records)


def binary_gallery(n, bits, seed=0, classes=None):
    rng = np.random.default_rng(seed)
    classes = classes or max(2, n // 4)
    records = []
    for k in range(n):
        session = Session.ONE if (k // classes) % 2 == 0 else Session.TWO
        code = BitCode.from_bits(rng.integers(0, 2, bits).astype(bool))
        records.append(FeatureRecord(f"b{k}", k % classes, code, session))
    return build_gallery(records)


@pytest.fixture
def small_real():
    return real_gallery(40, 8, seed=1)


@pytest.fixture
def small_binary():
    return binary_gallery(40, 70, seed=2)


@pytest.fixture(params=sorted(_kernels.AVAILABLE))
def backend(request, monkeypatch):
    """Run the test once per available kernel backend."""
    monkeypatch.setattr(_kernels, "backend", _kernels.AVAILABLE[request.param])
    return request.param


_ACCEPTANCE = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""

    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
