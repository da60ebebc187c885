"""Session-wide solves shared by the solver and acceptance suites."""

import time

import pytest

from reluinj.solver import SolverConfig, capacity_root, minimal_sequence

ALPHA1 = 6.7004


def _timed(func, *args, **kwargs):
    t0 = time.perf_counter()
    out = func(*args, **kwargs)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="session")
def weak_sequence():
    """Weak plain minimal sequence through 4 layers, with per-call wall time."""
    return _timed(minimal_sequence, 4, ALPHA1, "weak", "plain", SolverConfig())


@pytest.fixture(scope="session")
def weak2(weak_sequence):
    return weak_sequence[0][1]


@pytest.fixture(scope="session")
def strong2():
    return _timed(capacity_root, (ALPHA1,), "strong", "plain", SolverConfig())


@pytest.fixture(scope="session")
def strong3(strong2):
    res = strong2[0]
    return _timed(capacity_root, (ALPHA1, res.alpha_bound), "strong", "plain", SolverConfig(),
                  start=res.vars_at_opt)


@pytest.fixture(scope="session")
def lifted_weak():
    return _timed(capacity_root, (ALPHA1,), "weak", "lifted", SolverConfig())


@pytest.fixture(scope="session")
def lifted_strong():
    return _timed(capacity_root, (ALPHA1,), "strong", "lifted", SolverConfig())


# one status line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE = {}


def record(criterion, label, ok, detail):
    """Store one check of ``criterion`` and echo it; returns ``ok``."""
    ACCEPTANCE.setdefault(criterion, []).append((label, bool(ok), detail))
    print(f"criterion {criterion} [{label}]: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=str):
        checks = ACCEPTANCE[crit]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        detail = "; ".join(f"{label}: {'ok' if ok else 'FAIL'} {d}" for label, ok, d in checks)
        terminalreporter.write_line(f"criterion {crit}: {status} | {detail}")
