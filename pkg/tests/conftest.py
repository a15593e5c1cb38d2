import numpy as np
import pytest

from ratiopop import FrequencyTable, load_dataset


@pytest.fixture(scope="session")
def datasets():
    names = ("meth", "polyps_low", "polyps_high", "scrapie", "butterfly", "microbial")
    return {name: load_dataset(name) for name in names}


@pytest.fixture
def three_cell():
    """Two ratio points, so every scheme gives the same exact line."""
    return FrequencyTable({1: 100, 2: 50, 3: 10})


@pytest.fixture
def poisson_shape():
    """f_x proportional to 1/x!, every ratio equal to one."""
    return FrequencyTable({1: 120, 2: 60, 3: 20, 4: 5})


def random_table(rng: np.random.Generator, n_cells: int, lo=1, hi=500) -> FrequencyTable:
    return FrequencyTable({x: int(rng.integers(lo, hi)) for x in range(1, n_cells + 1)})


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
