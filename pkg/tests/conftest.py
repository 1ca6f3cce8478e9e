import warnings

import pytest

from dipchain.model import ChainConfig, ValidityWarning


@pytest.fixture
def electron():
    """Electron-spin chain factory at a chosen alpha; low omega0 keeps the ODE oracle cheap."""

    def make(L, alpha=0.02, omega0_mhz=10.0, **kw):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            return ChainConfig.from_mhz(L, omega0_mhz, 141.0, -52.0, **kw).with_alpha(alpha)

    return make


CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> bool:
        CRITERIA[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
