"""Shared test fixtures and the acceptance-summary hook.

test_acceptance.py records one line per criterion through the
``criterion`` fixture; pytest_terminal_summary prints them all at the end
of the run so the verdict for every criterion is visible in one block,
including any that never got to record (shown as "not run").
"""

from __future__ import annotations

import pytest

CRITERIA = {
    1: "joint/sum action-evaluation ratio is exactly 85 (rational arithmetic)",
    2: "model sizes: 0.82 MB decentralized vs 70 MB centralized, serialized files match",
    3: "sparse Q equals brute-force dense Q (compact kernels 1e-12; truncated Gaussian within 0.05)",
    4: "factorized Gaussian features equal direct multivariate evaluation within 1e-9",
    5: "Sarsa(lambda) on a 4-state chain matches the tabular oracle bitwise",
    6: "counter ratios on shared streams: multiply-adds exactly 85; active terms <= 27 vs 2145",
    7: "wall-time strictly ordered drl-fsbf < drl-gaussian < crl-fsbf < crl-gaussian, <= 1 ms",
    8: "training improves final-100 distance/angle errors and beats the zero-weight success rate",
    9: "phase-aware state model final distance error <= legacy under shared seeds",
    10: "repeated commands with the same seed/config produce byte-identical artifacts",
    11: "epsilon schedule endpoints: 1.0 at episode 0, exp(-15) at episode 1500",
}

_results: dict[int, tuple[bool, str]] = {}


def record_criterion(num: int, passed: bool, detail: str = "") -> None:
    if num not in CRITERIA:
        raise KeyError(f"unknown criterion number {num}")
    _results[num] = (passed, detail)


@pytest.fixture
def criterion():
    """Recorder callable: criterion(num, passed, detail)."""
    return record_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        if num in _results:
            passed, detail = _results[num]
            word = "PASS" if passed else "FAIL"
        else:
            word, detail = "not run", ""
        line = f"[{word:>7}] criterion {num:2d}: {CRITERIA[num]}"
        if detail:
            line += f"  ({detail})"
        terminalreporter.write_line(line)
