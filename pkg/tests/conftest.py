import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from quench_entanglement import anderson, lattice as lat  # noqa: E402

INF = math.inf


def chain_hamiltonian(k):
    lattice = lat.build_box(1, [(0, len(k) - 1)])
    return lattice, anderson.from_matrix(anderson.anderson_matrix(lattice, np.asarray(k, float)), dimension=1)


@pytest.fixture
def chain10():
    lattice = lat.build_box(1, [(0, 9)])
    H = anderson.build_effective_hamiltonian(lattice, anderson.sample_disorder(lattice, 1.0, 7, 0))
    return lattice, H


def toy_doc(**over):
    doc = {
        "geometry": {"dimension": 1, "bounds": [[0, 9]]},
        "tiling": {"kind": "singletons"},
        "bipartition": {"boxes": [[[0, 4]]]},
        "betas": ["all-ground"],
        "time_grid": {"t_max": 1.0, "n_steps": 3},
        "disorder": {"k_max": 1.0, "master_seed": 7, "n_realizations": 3},
    }
    doc.update(over)
    return doc


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
