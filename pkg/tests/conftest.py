import functools
import time

import pytest

from cvbandit.harness import parse_config, run_batch

ACCEPTANCE_SEED = 2024
ACCEPTANCE_RUNS = 200
ACCEPTANCE_LINES = []


def report(criterion, ok, detail):
    line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


@functools.lru_cache(maxsize=None)
def suite_batch(name, rho=None, policies=None):
    """200-run batch on a default suite, shared between test modules."""
    suite = {"name": name}
    if rho is not None:
        suite["rho"] = rho
    cfg = {"horizon": 5000, "runs": ACCEPTANCE_RUNS, "base_seed": ACCEPTANCE_SEED, "suite": suite,
           "write_traces": False}
    if policies is not None:
        cfg["policies"] = list(policies)
    t0 = time.perf_counter()
    res = run_batch(parse_config(cfg), write=False)
    res.elapsed = time.perf_counter() - t0
    return res


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    from cvbandit.stats_core import RandomSource
    return RandomSource(12345)
