import pytest

from splitopt.config_space import ArchPolicy, ParameterSpace
from splitopt.engine import EvaluatorStack, ExactFlops, GAParams
from splitopt.oracle import OracleAccuracy, SyntheticOracle

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def space():
    return ParameterSpace()


@pytest.fixture(scope="session")
def policy():
    return ArchPolicy()


@pytest.fixture(scope="session")
def oracle():
    return SyntheticOracle()


@pytest.fixture(scope="session")
def make_stack(policy, oracle):
    def _make(budget, snr_db, accuracy=None, dataset=None, flops=None):
        kw = {} if dataset is None else {"dataset": dataset}
        return EvaluatorStack(budget, snr_db, flops or ExactFlops(policy),
                              accuracy or OracleAccuracy(oracle, policy), **kw)
    return _make


@pytest.fixture
def fast_ga():
    return GAParams(population=10, generations=10, restarts=2, seed=3)
