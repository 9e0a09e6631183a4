import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vibropsi.bape import CandidateSet, LikelihoodTable
from vibropsi.psymodel import GridConfig, build_grid


@pytest.fixture(scope="session")
def default_grid():
    return build_grid()


@pytest.fixture(scope="session")
def default_candidates():
    return CandidateSet.default()


@pytest.fixture(scope="session")
def default_table(default_grid, default_candidates):
    return LikelihoodTable(default_grid, default_candidates)


@pytest.fixture(scope="session")
def small_grid():
    # compact lattice for brute-force comparisons
    return build_grid(GridConfig(a_min=5, a_max=40, a_count=6,
                                 b_min=0.5, b_max=6, b_count=5,
                                 gamma_min=0.05, gamma_max=0.9, gamma_count=7,
                                 delta=0.02))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
