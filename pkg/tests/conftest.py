import math

import numpy as np
import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def _dense_shrink_max(s: float, n: int = 6001) -> float:
    """Brute-force max of K3 with r1 = 1, r2 = s.

    The phase enters only through -s sin(t1) sin(t2) cos(dphi); with both
    sines non-negative on [0, pi] the maximum over dphi sits at cos = -1.
    """
    t = np.linspace(0.0, math.pi, n)
    t1, t2 = t[:, None], t[None, :]
    k3 = np.cos(t1) + s * np.cos(t2) - s * np.cos(t1 + t2)
    return float(k3.max())


@pytest.fixture
def dense_shrink_oracle():
    return _dense_shrink_max


@pytest.fixture
def acceptance_report():
    def report(number: int, title: str, ok: bool, detail: str = "") -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        if detail:
            line += f" -- {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
