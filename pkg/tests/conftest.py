import numpy as np
import pytest

from dpmepf import FeatureMap


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_map():
    return FeatureMap.random(3, (6, 5), seed=2, moments=2)



def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE, ACCEPTANCE_TITLES

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        failed = [c for c in checks if not c[1]]
        status = "PASS" if not failed else "FAIL"
        line = f"[{status}] criterion {n:>2}: {ACCEPTANCE_TITLES[n]} ({len(checks) - len(failed)}/{len(checks)} checks)"
        if failed:
            line += "; failed: " + "; ".join(f"{c[0]} {c[2]}".strip() for c in failed)
        terminalreporter.write_line(line)
