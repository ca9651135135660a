import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from rcspipe import kernels

DATA = Path(__file__).resolve().parent.parent / "src" / "rcspipe" / "data"
SAMPLE_QASM = DATA / "sycamore_12q_14c_EFGH.qasm"


@pytest.fixture
def sample_qasm_text():
    return SAMPLE_QASM.read_text()


@pytest.fixture(params=sorted(kernels.available_backends()))
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    impl = kernels.available_backends()[request.param]
    for name in ("apply_1q", "apply_2q", "cumulative", "search_cdf"):
        monkeypatch.setattr(kernels, name, getattr(impl, name))
    return request.param


def random_state(rng, n):
    a = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return a / np.linalg.norm(a)


def random_unitary(rng, dim):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(cid, text): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" and outcome != "error":
                continue
            info = dict(rep.user_properties).get("criterion")
            if info:
                lines.append((info[0], "PASS" if outcome == "passed" else "FAIL", info[1],
                              rep.duration))
    if lines:
        terminalreporter.section("acceptance criteria")
        for cid, status, text, dur in sorted(lines):
            terminalreporter.write_line(f"{cid:<5} {status}  {text}  ({dur:.1f} s)")
