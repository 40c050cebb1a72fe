import pytest

from ngpsd.pulses import synth_set

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def oracle_set():
    """2 x 500 labelled synthetic pulses, slow fractions 0.15 / 0.35, noise sigma 0.01."""
    return synth_set(500, gamma_slow=0.15, neutron_slow=0.35, noise_sigma=0.01, seed=2024)


@pytest.fixture(scope="session")
def small_set():
    return synth_set(150, noise_sigma=0.01, seed=7)


@pytest.fixture
def acceptance_report():
    def record(criterion, passed, detail=""):
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] criterion {criterion}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
