import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import acceptance_log  # noqa: E402


@pytest.fixture(scope="session")
def planning_report():
    """Planning protocol at n in {100, 400}: 10 instances, 100 runs per stochastic policy."""
    from rdtsp.bench import BenchConfig, run_bench
    cfg = BenchConfig(families=("random_cities", "line3", "random_clusters", "rural_urban"),
                      ns=(100, 400), n_mdp=10, n_alg=100, reference="none", master_seed=0)
    return run_bench(cfg)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(acceptance_log.RESULTS):
        ok, detail = acceptance_log.RESULTS[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")
