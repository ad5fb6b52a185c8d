import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cliquefit.compatgraph import CompatGraph
from cliquefit.graphsolvers import core_decomposition


@pytest.fixture(scope="session", autouse=True)
def warm_numba():
    """Trigger the peeling kernel's JIT once so timed tests see steady state."""
    g = CompatGraph(3, np.array([[0, 1], [1, 2]]))
    core_decomposition(g)
